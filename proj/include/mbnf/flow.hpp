#pragma once

#include "mbnf/diffnet.hpp"

namespace mbnf {

/// One affine coupling: half the dimensions pass through unchanged, the rest
/// are scaled and translated by nets fed with the pass-through half. The
/// Jacobian is triangular, so its log-determinant is just the sum of the
/// effective scales.
struct CouplingLayer {
    bool pass_first = true; // which half passes through
    int keep = 0;           // floor(D/2) pass-through dims
    MlpSpec s_spec, t_spec; // keep -> D - keep
    Vec s_params, t_params;
};

struct FlowConfig {
    int num_layers = 6;
    int hidden = 64;
    int hidden_layers = 2;
    double s_clamp = 5.0; // effective scale is s_clamp * tanh(raw / s_clamp)
};

/// Real-NVP stack with a standard-normal base and per-dimension input
/// standardization (mean/scale captured from the training data).
struct FlowModel {
    int dim = 0;
    double s_clamp = 5.0;
    std::vector<CouplingLayer> layers;
    Vec mean, scale;

    int param_count() const {
        int n = 0;
        for (const auto& l : layers) n += l.s_spec.param_count() + l.t_spec.param_count();
        return n;
    }
};

inline FlowModel make_flow(int dim, const FlowConfig& cfg, Rng& rng) {
    if (dim < 1) throw std::invalid_argument("flow dimension must be >= 1");
    FlowModel m;
    m.dim = dim;
    m.s_clamp = cfg.s_clamp;
    m.mean.assign(dim, 0.0);
    m.scale.assign(dim, 1.0);
    const int keep = dim / 2;
    for (int i = 0; i < cfg.num_layers; ++i) {
        CouplingLayer layer;
        layer.pass_first = i % 2 == 0; // alternate which half is transformed
        layer.keep = keep;
        std::vector<int> widths = {keep};
        for (int h = 0; h < cfg.hidden_layers; ++h) widths.push_back(cfg.hidden);
        widths.push_back(dim - keep);
        layer.s_spec = mlp_spec(widths);
        layer.t_spec = mlp_spec(widths);
        layer.s_params = init_params(layer.s_spec, rng);
        layer.t_params = init_params(layer.t_spec, rng);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

namespace flow_detail {

inline void split(const CouplingLayer& l, int dim, const Vec& v, Vec& a, Vec& b) {
    const int keep = l.keep;
    a.resize(keep);
    b.resize(dim - keep);
    if (l.pass_first) {
        std::copy(v.begin(), v.begin() + keep, a.begin());
        std::copy(v.begin() + keep, v.end(), b.begin());
    } else {
        std::copy(v.end() - keep, v.end(), a.begin());
        std::copy(v.begin(), v.end() - keep, b.begin());
    }
}

inline void merge(const CouplingLayer& l, int dim, const Vec& a, const Vec& b, Vec& v) {
    v.resize(dim);
    if (l.pass_first) {
        std::copy(a.begin(), a.end(), v.begin());
        std::copy(b.begin(), b.end(), v.begin() + l.keep);
    } else {
        std::copy(b.begin(), b.end(), v.begin());
        std::copy(a.begin(), a.end(), v.end() - l.keep);
    }
}

struct LayerTrace {
    Vec xa, xb, s_eff, exp_s;
    MlpCache s_cache, t_cache;
};

struct Workspace {
    std::vector<LayerTrace> traces;
};

} // namespace flow_detail

/// z = F(x) on the flow's own coordinates (standardization is applied by
/// log_prob/sample, not here). Returns z and the Jacobian log-determinant.
inline std::pair<Vec, double> flow_forward(const FlowModel& m, const Vec& x,
                                           flow_detail::Workspace* ws = nullptr) {
    if (static_cast<int>(x.size()) != m.dim) throw std::invalid_argument("flow dimension mismatch");
    flow_detail::Workspace local;
    flow_detail::Workspace& w = ws ? *ws : local;
    w.traces.resize(m.layers.size());
    Vec cur = x;
    double log_det = 0.0;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const CouplingLayer& l = m.layers[li];
        auto& tr = w.traces[li];
        flow_detail::split(l, m.dim, cur, tr.xa, tr.xb);
        const Vec& s_raw = mlp_forward(l.s_spec, l.s_params, tr.xa, tr.s_cache);
        const Vec& t_out = mlp_forward(l.t_spec, l.t_params, tr.xa, tr.t_cache);
        const int nb = static_cast<int>(tr.xb.size());
        tr.s_eff.resize(nb);
        tr.exp_s.resize(nb);
        Vec zb(nb);
        for (int j = 0; j < nb; ++j) {
            tr.s_eff[j] = m.s_clamp * std::tanh(s_raw[j] / m.s_clamp);
            tr.exp_s[j] = std::exp(tr.s_eff[j]);
            zb[j] = tr.xb[j] * tr.exp_s[j] + t_out[j];
            log_det += tr.s_eff[j];
        }
        flow_detail::merge(l, m.dim, tr.xa, zb, cur);
        if (!all_finite(cur)) throw std::runtime_error("non-finite flow intermediate");
    }
    return {std::move(cur), log_det};
}

inline Vec flow_inverse(const FlowModel& m, const Vec& z) {
    if (static_cast<int>(z.size()) != m.dim) throw std::invalid_argument("flow dimension mismatch");
    Vec cur = z;
    MlpCache s_cache, t_cache;
    Vec za, zb;
    for (auto it = m.layers.rbegin(); it != m.layers.rend(); ++it) {
        const CouplingLayer& l = *it;
        flow_detail::split(l, m.dim, cur, za, zb);
        const Vec& s_raw = mlp_forward(l.s_spec, l.s_params, za, s_cache);
        const Vec& t_out = mlp_forward(l.t_spec, l.t_params, za, t_cache);
        for (size_t j = 0; j < zb.size(); ++j) {
            const double s_eff = m.s_clamp * std::tanh(s_raw[j] / m.s_clamp);
            zb[j] = (zb[j] - t_out[j]) * std::exp(-s_eff);
        }
        flow_detail::merge(l, m.dim, za, zb, cur);
        if (!all_finite(cur)) throw std::runtime_error("non-finite flow intermediate");
    }
    return cur;
}

/// Exact log-density of x under the flow, standardization included.
inline double flow_log_prob(const FlowModel& m, const Vec& x) {
    Vec xs(m.dim);
    double std_log_det = 0.0;
    for (int j = 0; j < m.dim; ++j) {
        xs[j] = (x[j] - m.mean[j]) / m.scale[j];
        std_log_det -= std::log(m.scale[j]);
    }
    auto [z, log_det] = flow_forward(m, xs);
    return -0.5 * m.dim * std::log(2.0 * M_PI) - 0.5 * dot(z, z) + log_det + std_log_det;
}

inline Vec flow_sample_one(const FlowModel& m, Rng& rng) {
    Vec z(m.dim);
    for (double& v : z) v = rng.normal();
    Vec x = flow_inverse(m, z);
    for (int j = 0; j < m.dim; ++j) x[j] = m.mean[j] + m.scale[j] * x[j];
    return x;
}

inline Mat flow_sample(const FlowModel& m, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    Mat out(n, m.dim);
    for (int i = 0; i < n; ++i) out.set_row(i, flow_sample_one(m, rng));
    return out;
}

// ---------------------------------------------------------------------------
// Flat parameter view (checkpoints, finite-difference tests, sharpness)
// ---------------------------------------------------------------------------

inline Vec flow_get_params(const FlowModel& m) {
    Vec flat;
    flat.reserve(m.param_count());
    for (const auto& l : m.layers) {
        flat.insert(flat.end(), l.s_params.begin(), l.s_params.end());
        flat.insert(flat.end(), l.t_params.begin(), l.t_params.end());
    }
    return flat;
}

inline void flow_set_params(FlowModel& m, const Vec& flat) {
    if (static_cast<int>(flat.size()) != m.param_count())
        throw std::invalid_argument("flow parameter count mismatch");
    size_t off = 0;
    for (auto& l : m.layers) {
        std::copy(flat.begin() + off, flat.begin() + off + l.s_params.size(), l.s_params.begin());
        off += l.s_params.size();
        std::copy(flat.begin() + off, flat.begin() + off + l.t_params.size(), l.t_params.begin());
        off += l.t_params.size();
    }
}

/// Mean negative log-likelihood of standardized rows plus its gradient with
/// respect to the flat parameter vector. `rows` must already be standardized;
/// the standardization constant is added so the value matches flow_log_prob.
inline double flow_nll_grad_standardized(const FlowModel& m, const Mat& rows, Vec& grad,
                                         flow_detail::Workspace& ws) {
    grad.assign(m.param_count(), 0.0);
    double nll_sum = 0.0;
    const double inv_n = 1.0 / rows.rows;
    Vec x(m.dim), dz, ga, gb, ds_raw, dt, ia, ib;

    // flat layout offsets: per layer s params then t params
    std::vector<size_t> s_off(m.layers.size()), t_off(m.layers.size());
    size_t off = 0;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        s_off[li] = off;
        off += m.layers[li].s_params.size();
        t_off[li] = off;
        off += m.layers[li].t_params.size();
    }

    for (int r = 0; r < rows.rows; ++r) {
        for (int j = 0; j < m.dim; ++j) x[j] = rows(r, j);
        auto [z, log_det] = flow_forward(m, x, &ws);
        nll_sum += 0.5 * m.dim * std::log(2.0 * M_PI) + 0.5 * dot(z, z) - log_det;

        dz = z; // d(0.5 |z|^2) / dz, scaled by 1/n at the end
        for (int li = static_cast<int>(m.layers.size()) - 1; li >= 0; --li) {
            const CouplingLayer& l = m.layers[li];
            const auto& tr = ws.traces[li];
            flow_detail::split(l, m.dim, dz, ga, gb);
            const int nb = static_cast<int>(tr.xb.size());
            ds_raw.resize(nb);
            dt.resize(nb);
            for (int j = 0; j < nb; ++j) {
                // zb = xb * exp(s_eff) + t and the -log_det term
                const double ds_eff = gb[j] * tr.xb[j] * tr.exp_s[j] - 1.0;
                const double th = tr.s_eff[j] / m.s_clamp;
                ds_raw[j] = ds_eff * (1.0 - th * th);
                dt[j] = gb[j];
                gb[j] *= tr.exp_s[j]; // d/dxb
            }
            mlp_backward(l.s_spec, l.s_params, tr.s_cache, ds_raw, grad.data() + s_off[li], ia);
            mlp_backward(l.t_spec, l.t_params, tr.t_cache, dt, grad.data() + t_off[li], ib);
            for (int j = 0; j < l.keep; ++j) ga[j] += ia[j] + ib[j];
            flow_detail::merge(l, m.dim, ga, gb, dz);
        }
    }
    for (double& g : grad) g *= inv_n;
    double std_log_det = 0.0;
    for (int j = 0; j < m.dim; ++j) std_log_det -= std::log(m.scale[j]);
    return nll_sum * inv_n - std_log_det;
}

inline double flow_nll_grad(const FlowModel& m, const Mat& raw_rows, Vec& grad) {
    Mat rows = raw_rows;
    for (int r = 0; r < rows.rows; ++r)
        for (int j = 0; j < m.dim; ++j) rows(r, j) = (rows(r, j) - m.mean[j]) / m.scale[j];
    flow_detail::Workspace ws;
    return flow_nll_grad_standardized(m, rows, grad, ws);
}

// ---------------------------------------------------------------------------
// Maximum-likelihood training
// ---------------------------------------------------------------------------

struct FlowFitResult {
    std::vector<double> epoch_mean_loglik;
};

/// Minibatch gradient ascent on the average log-likelihood. Captures the
/// standardization stats from the data (scale floored at 1e-3 so constant
/// dimensions stay finite). `max_steps` > 0 caps the total number of
/// gradient steps across epochs.
inline FlowFitResult flow_fit(FlowModel& m, const Mat& data, int epochs, int batch, double lr,
                              Rng& rng, long long max_steps = -1, bool record_curve = true) {
    if (data.rows < 1 || data.cols != m.dim) throw std::invalid_argument("bad flow training data");
    if (batch < 1 || batch > data.rows) throw std::invalid_argument("bad flow batch size");

    m.mean.assign(m.dim, 0.0);
    m.scale.assign(m.dim, 1.0);
    for (int j = 0; j < m.dim; ++j) {
        Vec col(data.rows);
        for (int r = 0; r < data.rows; ++r) col[r] = data(r, j);
        m.mean[j] = mean_of(col);
        m.scale[j] = std::max(sample_std(col), 1e-3);
    }
    Mat std_rows(data.rows, data.cols);
    for (int r = 0; r < data.rows; ++r)
        for (int j = 0; j < m.dim; ++j) std_rows(r, j) = (data(r, j) - m.mean[j]) / m.scale[j];

    double std_log_det = 0.0;
    for (int j = 0; j < m.dim; ++j) std_log_det -= std::log(m.scale[j]);

    Optimizer opt; // Adam over the flat parameter vector
    Vec params = flow_get_params(m);
    Vec grad;
    flow_detail::Workspace ws;
    std::vector<int> order(data.rows);
    std::iota(order.begin(), order.end(), 0);

    FlowFitResult result;
    Mat batch_rows(batch, m.dim);
    long long steps_done = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        if (max_steps >= 0 && steps_done >= max_steps) break;
        for (int i = data.rows - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(i + 1)]);
        for (int start = 0; start + batch <= data.rows; start += batch) {
            if (max_steps >= 0 && steps_done >= max_steps) break;
            for (int b = 0; b < batch; ++b)
                for (int j = 0; j < m.dim; ++j) batch_rows(b, j) = std_rows(order[start + b], j);
            const double nll = flow_nll_grad_standardized(m, batch_rows, grad, ws);
            if (!std::isfinite(nll)) throw std::runtime_error("flow training diverged (non-finite loss)");
            opt.step(params, grad, lr);
            flow_set_params(m, params);
            ++steps_done;
        }
        const bool last_epoch =
            epoch == epochs - 1 || (max_steps >= 0 && steps_done >= max_steps);
        if (!record_curve && !last_epoch) continue;
        // mean log-likelihood over the full training data
        double ll = 0.0;
        Vec x(m.dim);
        for (int r = 0; r < data.rows; ++r) {
            for (int j = 0; j < m.dim; ++j) x[j] = std_rows(r, j);
            auto [z, log_det] = flow_forward(m, x, &ws);
            ll += -0.5 * m.dim * std::log(2.0 * M_PI) - 0.5 * dot(z, z) + log_det;
        }
        result.epoch_mean_loglik.push_back(ll / data.rows + std_log_det);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpointing: flat params + topology sidecar
// ---------------------------------------------------------------------------

inline void save_flow_checkpoint(const std::string& base, const FlowModel& m) {
    save_params(base + ".bin", flow_get_params(m));
    nlohmann::json j;
    j["dim"] = m.dim;
    j["s_clamp"] = m.s_clamp;
    j["mean"] = m.mean;
    j["scale"] = m.scale;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : m.layers)
        j["layers"].push_back({{"pass_first", l.pass_first},
                               {"keep", l.keep},
                               {"s_spec", spec_to_json(l.s_spec)},
                               {"t_spec", spec_to_json(l.t_spec)}});
    std::ofstream side(base + ".json");
    side << j.dump(2) << '\n';
}

inline FlowModel load_flow_checkpoint(const std::string& base) {
    std::ifstream side(base + ".json");
    if (!side) throw std::runtime_error("missing sidecar " + base + ".json");
    nlohmann::json j;
    side >> j;
    FlowModel m;
    m.dim = j.at("dim");
    m.s_clamp = j.at("s_clamp");
    m.mean = j.at("mean").get<Vec>();
    m.scale = j.at("scale").get<Vec>();
    for (const auto& lj : j.at("layers")) {
        CouplingLayer l;
        l.pass_first = lj.at("pass_first");
        l.keep = lj.at("keep");
        l.s_spec = spec_from_json(lj.at("s_spec"));
        l.t_spec = spec_from_json(lj.at("t_spec"));
        l.s_params.assign(l.s_spec.param_count(), 0.0);
        l.t_params.assign(l.t_spec.param_count(), 0.0);
        m.layers.push_back(std::move(l));
    }
    flow_set_params(m, load_params(base + ".bin"));
    return m;
}

} // namespace mbnf
