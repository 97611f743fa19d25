#pragma once

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mbnf/common.hpp"

namespace mbnf {

enum class OutputAct { Identity, Tanh };

/// Fully connected net: ReLU on hidden layers, identity or tanh on the
/// output. Parameters live in one flat vector, per layer W (row-major,
/// out x in) then b.
struct MlpSpec {
    std::vector<int> widths;
    OutputAct output_act = OutputAct::Identity;

    int num_layers() const { return static_cast<int>(widths.size()) - 1; }
    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }

    int param_count() const {
        int n = 0;
        for (int l = 0; l < num_layers(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
        return n;
    }
    int layer_offset(int layer) const {
        int off = 0;
        for (int l = 0; l < layer; ++l) off += widths[l] * widths[l + 1] + widths[l + 1];
        return off;
    }
};

inline MlpSpec mlp_spec(std::vector<int> widths, OutputAct act = OutputAct::Identity) {
    if (widths.size() < 2) throw std::invalid_argument("MLP needs at least one layer");
    // width 0 is allowed for the input only: a bias-only net (constant output)
    if (widths.front() < 0) throw std::invalid_argument("MLP widths must be positive");
    for (size_t i = 1; i < widths.size(); ++i)
        if (widths[i] <= 0) throw std::invalid_argument("MLP widths must be positive");
    return MlpSpec{std::move(widths), act};
}

/// Kaiming-uniform on ReLU layers, +-1/sqrt(fan_in) on the output layer.
inline Vec init_params(const MlpSpec& spec, Rng& rng) {
    Vec p(spec.param_count());
    for (int l = 0; l < spec.num_layers(); ++l) {
        const int in = spec.widths[l], out = spec.widths[l + 1];
        const bool last = l == spec.num_layers() - 1;
        const double fan_in = std::max(in, 1);
        const double bound = last ? 1.0 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
        double* w = p.data() + spec.layer_offset(l);
        for (int i = 0; i < in * out; ++i) w[i] = rng.uniform(-bound, bound);
        for (int i = 0; i < out; ++i) w[in * out + i] = 0.0;
    }
    return p;
}

/// Scratch per forward pass; reuse across calls to avoid allocation churn.
struct MlpCache {
    std::vector<Vec> act; // act[0] = input, act[l+1] = post-activation of layer l
    std::vector<Vec> pre; // pre[l] = pre-activation of layer l
};

inline const Vec& mlp_forward(const MlpSpec& spec, const Vec& params, const Vec& x,
                              MlpCache& cache) {
    const int L = spec.num_layers();
    if (static_cast<int>(x.size()) != spec.input_dim())
        throw std::invalid_argument("MLP input dimension mismatch");
    cache.act.resize(L + 1);
    cache.pre.resize(L);
    cache.act[0] = x;
    for (int l = 0; l < L; ++l) {
        const int in = spec.widths[l], out = spec.widths[l + 1];
        const double* W = params.data() + spec.layer_offset(l);
        const double* b = W + in * out;
        Vec& z = cache.pre[l];
        z.assign(out, 0.0);
        const Vec& a = cache.act[l];
        for (int o = 0; o < out; ++o) {
            const double* wrow = W + static_cast<size_t>(o) * in;
            double acc = b[o];
            for (int i = 0; i < in; ++i) acc += wrow[i] * a[i];
            z[o] = acc;
        }
        Vec& y = cache.act[l + 1];
        y.resize(out);
        if (l < L - 1) {
            for (int o = 0; o < out; ++o) y[o] = z[o] > 0.0 ? z[o] : 0.0;
        } else if (spec.output_act == OutputAct::Tanh) {
            for (int o = 0; o < out; ++o) y[o] = std::tanh(z[o]);
        } else {
            y = z;
        }
    }
    return cache.act[L];
}

inline Vec mlp_forward(const MlpSpec& spec, const Vec& params, const Vec& x) {
    MlpCache cache;
    return mlp_forward(spec, params, x, cache);
}

/// Reverse-mode pass for <upstream, f(x)>. Accumulates into param_grad
/// (size param_count, not cleared) and returns via input_grad. The ReLU
/// subgradient at 0 is taken as 0.
inline void mlp_backward(const MlpSpec& spec, const Vec& params, const MlpCache& cache,
                         const Vec& upstream, double* param_grad, Vec& input_grad) {
    const int L = spec.num_layers();
    if (static_cast<int>(upstream.size()) != spec.output_dim())
        throw std::invalid_argument("MLP upstream dimension mismatch");
    Vec delta = upstream;
    if (spec.output_act == OutputAct::Tanh) {
        const Vec& y = cache.act[L];
        for (size_t o = 0; o < delta.size(); ++o) delta[o] *= 1.0 - y[o] * y[o];
    }
    for (int l = L - 1; l >= 0; --l) {
        const int in = spec.widths[l], out = spec.widths[l + 1];
        const double* W = params.data() + spec.layer_offset(l);
        double* gW = param_grad + spec.layer_offset(l);
        double* gb = gW + in * out;
        const Vec& a = cache.act[l];
        Vec prev(in, 0.0);
        for (int o = 0; o < out; ++o) {
            const double g = delta[o];
            if (g != 0.0) {
                double* grow = gW + static_cast<size_t>(o) * in;
                const double* wrow = W + static_cast<size_t>(o) * in;
                for (int i = 0; i < in; ++i) {
                    grow[i] += g * a[i];
                    prev[i] += g * wrow[i];
                }
                gb[o] += g;
            }
        }
        if (l > 0) {
            const Vec& z = cache.pre[l - 1];
            for (int i = 0; i < in; ++i) prev[i] = z[i] > 0.0 ? prev[i] : 0.0;
        }
        delta = std::move(prev);
    }
    input_grad = std::move(delta);
}

inline void mlp_backward(const MlpSpec& spec, const Vec& params, const MlpCache& cache,
                         const Vec& upstream, Vec& param_grad, Vec& input_grad) {
    mlp_backward(spec, params, cache, upstream, param_grad.data(), input_grad);
}

/// Convenience form returning both gradients.
inline std::pair<Vec, Vec> mlp_grad(const MlpSpec& spec, const Vec& params, const Vec& x,
                                    const Vec& upstream) {
    MlpCache cache;
    mlp_forward(spec, params, x, cache);
    Vec pg(spec.param_count(), 0.0), ig;
    mlp_backward(spec, params, cache, upstream, pg.data(), ig);
    return {std::move(pg), std::move(ig)};
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

enum class OptKind { Sgd, Adam };

struct Optimizer {
    OptKind kind = OptKind::Adam;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Vec m, v;
    long step_count = 0;

    void step(Vec& params, const Vec& grad, double lr) {
        if (grad.size() != params.size()) throw std::invalid_argument("optimizer shape mismatch");
        if (!all_finite(grad)) throw std::runtime_error("non-finite gradient");
        if (kind == OptKind::Sgd) {
            for (size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
            return;
        }
        if (m.size() != params.size()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
            step_count = 0;
        }
        ++step_count;
        const double c1 = 1.0 - std::pow(beta1, step_count);
        const double c2 = 1.0 - std::pow(beta2, step_count);
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

// ---------------------------------------------------------------------------
// Checkpoints: flat 64-bit little-endian params with an 8-byte length header
// plus a JSON sidecar describing the spec.
// ---------------------------------------------------------------------------

inline void save_params(const std::string& path, const Vec& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    const uint64_t n = params.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(8 * n));
}

inline Vec load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    Vec params(n);
    in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(8 * n));
    if (!in) throw std::runtime_error("truncated checkpoint " + path);
    return params;
}

inline nlohmann::json spec_to_json(const MlpSpec& spec) {
    return {{"widths", spec.widths},
            {"output_activation", spec.output_act == OutputAct::Tanh ? "tanh" : "identity"}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
    MlpSpec spec;
    spec.widths = j.at("widths").get<std::vector<int>>();
    spec.output_act = j.at("output_activation") == "tanh" ? OutputAct::Tanh : OutputAct::Identity;
    return spec;
}

inline void save_mlp_checkpoint(const std::string& base, const MlpSpec& spec, const Vec& params) {
    save_params(base + ".bin", params);
    std::ofstream side(base + ".json");
    side << spec_to_json(spec).dump(2) << '\n';
}

inline std::pair<MlpSpec, Vec> load_mlp_checkpoint(const std::string& base) {
    std::ifstream side(base + ".json");
    if (!side) throw std::runtime_error("missing sidecar " + base + ".json");
    nlohmann::json j;
    side >> j;
    return {spec_from_json(j), load_params(base + ".bin")};
}

} // namespace mbnf
