#pragma once

#include "mbnf/flow.hpp"
#include "mbnf/replay.hpp"
#include "mbnf/trading_env.hpp"

namespace mbnf {

/// Transition model backed by a normalizing flow over one-day price deltas.
/// The flow is unconditional: balance, holdings and reward follow
/// deterministically from the sampled prices and the action. A rolling
/// close-price window is kept so indicators can be recomputed at predicted
/// prices.
struct NfDynamics {
    FlowModel flow;
    Mat closes;              // real close rows the model was fitted beside
    int history_window = 120; // >= longest indicator warm-up (60)
};

struct NfDynConfig {
    FlowConfig flow;
    int epochs = 40;
    int batch = 128;
    double lr = 1e-3;
    long long max_steps = -1; // cap on gradient steps, -1 = epochs decide
};

inline Mat first_differences(const Mat& price_rows) {
    if (price_rows.rows < 2) throw std::invalid_argument("need at least 2 price rows");
    Mat deltas(price_rows.rows - 1, price_rows.cols);
    for (int t = 0; t + 1 < price_rows.rows; ++t)
        for (int j = 0; j < price_rows.cols; ++j)
            deltas(t, j) = price_rows(t + 1, j) - price_rows(t, j);
    return deltas;
}

/// Fits the flow on the first differences of the given price rows. The
/// training matrix is exactly the first-difference of the input; prices are
/// never modeled directly.
inline NfDynamics nf_dyn_fit(const Mat& price_rows, const NfDynConfig& cfg, Rng& rng) {
    NfDynamics dyn;
    dyn.closes = price_rows;
    const Mat deltas = first_differences(price_rows);
    dyn.flow = make_flow(price_rows.cols, cfg.flow, rng);
    const int batch = std::min(cfg.batch, deltas.rows);
    flow_fit(dyn.flow, deltas, cfg.epochs, batch, cfg.lr, rng, cfg.max_steps,
             /*record_curve=*/false);
    return dyn;
}

/// Mean NF training objective (negative log-likelihood) on held data;
/// logged as the dynamic-model loss.
inline double nf_dyn_loss(const NfDynamics& dyn, const Mat& price_rows) {
    const Mat deltas = first_differences(price_rows);
    double ll = 0.0;
    for (int r = 0; r < deltas.rows; ++r) ll += flow_log_prob(dyn.flow, deltas.row(r));
    return -ll / deltas.rows;
}

// ---------------------------------------------------------------------------
// Gaussian ensemble baseline
// ---------------------------------------------------------------------------

struct EnsembleConfig {
    int members = 5;
    int hidden = 64;
    int hidden_layers = 2;
    int epochs = 40;
    int batch = 128;
    double lr = 1e-3;
    long long max_steps = -1; // per-member cap on gradient steps
};

constexpr double kLogVarMin = -10.0;
constexpr double kLogVarMax = 5.0;

/// Bootstrap ensemble of diagonal-Gaussian nets mapping the previous price
/// delta to the distribution of the next one.
struct GaussianEnsemble {
    MlpSpec spec; // d -> (mean_d, logvar_d)
    std::vector<Vec> member_params;
    Vec x_mean, x_scale, y_mean, y_scale;
    Mat closes;
    int history_window = 120;

    int dim() const { return static_cast<int>(x_mean.size()); }
};

namespace dyn_detail {

inline void standardize_stats(const Mat& rows, Vec& mean, Vec& scale) {
    mean.assign(rows.cols, 0.0);
    scale.assign(rows.cols, 1.0);
    for (int j = 0; j < rows.cols; ++j) {
        Vec col(rows.rows);
        for (int r = 0; r < rows.rows; ++r) col[r] = rows(r, j);
        mean[j] = mean_of(col);
        scale[j] = std::max(sample_std(col), 1e-3);
    }
}

/// Gaussian NLL gradient for one standardized (x, y) pair; accumulates into
/// param_grad scaled by inv_n. Returns the sample NLL (constants dropped).
inline double member_nll_grad(const MlpSpec& spec, const Vec& params, const Vec& x, const Vec& y,
                              double inv_n, double* param_grad, MlpCache& cache, Vec& input_grad) {
    const int d = static_cast<int>(y.size());
    const Vec& out = mlp_forward(spec, params, x, cache);
    double nll = 0.0;
    Vec upstream(2 * d, 0.0);
    for (int j = 0; j < d; ++j) {
        const double m = out[j];
        const bool clamped = out[d + j] < kLogVarMin || out[d + j] > kLogVarMax;
        const double lv = std::clamp(out[d + j], kLogVarMin, kLogVarMax);
        const double inv_var = std::exp(-lv);
        const double err = y[j] - m;
        nll += 0.5 * (err * err * inv_var + lv);
        upstream[j] = -err * inv_var * inv_n;
        upstream[d + j] = clamped ? 0.0 : 0.5 * (1.0 - err * err * inv_var) * inv_n;
    }
    mlp_backward(spec, params, cache, upstream, param_grad, input_grad);
    return nll;
}

} // namespace dyn_detail

/// Trains each member on its own bootstrap resample of (previous delta,
/// next delta) pairs by Gaussian negative log-likelihood.
inline GaussianEnsemble ens_fit(const Mat& price_rows, const EnsembleConfig& cfg, Rng& rng) {
    const Mat deltas = first_differences(price_rows);
    if (deltas.rows < 2) throw std::invalid_argument("not enough transitions for ensemble fit");
    const int d = deltas.cols;
    const int pairs = deltas.rows - 1;

    GaussianEnsemble ens;
    ens.closes = price_rows;
    std::vector<int> widths = {d};
    for (int i = 0; i < cfg.hidden_layers; ++i) widths.push_back(cfg.hidden);
    widths.push_back(2 * d);
    ens.spec = mlp_spec(widths);

    Mat xs(pairs, d), ys(pairs, d);
    for (int t = 0; t < pairs; ++t)
        for (int j = 0; j < d; ++j) {
            xs(t, j) = deltas(t, j);
            ys(t, j) = deltas(t + 1, j);
        }
    dyn_detail::standardize_stats(xs, ens.x_mean, ens.x_scale);
    dyn_detail::standardize_stats(ys, ens.y_mean, ens.y_scale);
    for (int t = 0; t < pairs; ++t)
        for (int j = 0; j < d; ++j) {
            xs(t, j) = (xs(t, j) - ens.x_mean[j]) / ens.x_scale[j];
            ys(t, j) = (ys(t, j) - ens.y_mean[j]) / ens.y_scale[j];
        }

    for (int member = 0; member < cfg.members; ++member) {
        Rng member_rng = rng.split(member);
        Vec params = init_params(ens.spec, member_rng);
        std::vector<int> boot(pairs);
        for (int& idx : boot) idx = member_rng.uniform_int(pairs);

        Optimizer opt;
        Vec grad(ens.spec.param_count());
        MlpCache cache;
        Vec input_grad, x(d), y(d);
        const int batch = std::min(cfg.batch, pairs);
        long long steps_done = 0;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            if (cfg.max_steps >= 0 && steps_done >= cfg.max_steps) break;
            for (int start = 0; start + batch <= pairs; start += batch) {
                if (cfg.max_steps >= 0 && steps_done >= cfg.max_steps) break;
                std::fill(grad.begin(), grad.end(), 0.0);
                double nll = 0.0;
                for (int b = 0; b < batch; ++b) {
                    const int row = boot[(start + b) % pairs];
                    for (int j = 0; j < d; ++j) {
                        x[j] = xs(row, j);
                        y[j] = ys(row, j);
                    }
                    nll += dyn_detail::member_nll_grad(ens.spec, params, x, y, 1.0 / batch,
                                                       grad.data(), cache, input_grad);
                }
                if (!std::isfinite(nll)) throw std::runtime_error("ensemble training diverged");
                opt.step(params, grad, cfg.lr);
                ++steps_done;
            }
        }
        ens.member_params.push_back(std::move(params));
    }
    return ens;
}

/// Mean and variance of the next delta under one member, in delta units.
inline std::pair<Vec, Vec> ens_member_predict(const GaussianEnsemble& ens, int member,
                                              const Vec& prev_delta) {
    const int d = ens.dim();
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = (prev_delta[j] - ens.x_mean[j]) / ens.x_scale[j];
    const Vec out = mlp_forward(ens.spec, ens.member_params[member], x);
    Vec mean(d), var(d);
    for (int j = 0; j < d; ++j) {
        const double lv = std::clamp(out[d + j], kLogVarMin, kLogVarMax);
        mean[j] = ens.y_mean[j] + ens.y_scale[j] * out[j];
        var[j] = ens.y_scale[j] * ens.y_scale[j] * std::exp(lv);
    }
    return {std::move(mean), std::move(var)};
}

/// Delta draw from a diagonal Gaussian; zero variance is deterministic.
inline Vec gaussian_delta_sample(const Vec& mean, const Vec& var, Rng& rng) {
    Vec out(mean.size());
    for (size_t j = 0; j < mean.size(); ++j)
        out[j] = mean[j] + (var[j] > 0.0 ? std::sqrt(var[j]) * rng.normal() : 0.0);
    return out;
}

/// Held-out Gaussian NLL (full constants) averaged over members and rows.
inline double ens_loss(const GaussianEnsemble& ens, const Mat& price_rows) {
    const Mat deltas = first_differences(price_rows);
    double nll = 0.0;
    long long count = 0;
    for (int t = 0; t + 1 < deltas.rows; ++t) {
        for (size_t member = 0; member < ens.member_params.size(); ++member) {
            const auto [mean, var] = ens_member_predict(ens, static_cast<int>(member), deltas.row(t));
            for (int j = 0; j < deltas.cols; ++j) {
                const double err = deltas(t + 1, j) - mean[j];
                nll += 0.5 * (err * err / var[j] + std::log(var[j]) + std::log(2.0 * M_PI));
            }
            ++count;
        }
    }
    return nll / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Prediction and rollouts
// ---------------------------------------------------------------------------

namespace dyn_detail {

inline Vec sample_next_delta(const NfDynamics& dyn, const Mat& /*window*/, Rng& rng) {
    return flow_sample_one(dyn.flow, rng);
}

inline Vec sample_next_delta(const GaussianEnsemble& ens, const Mat& window, Rng& rng) {
    Vec prev_delta(ens.dim(), 0.0);
    if (window.rows >= 2)
        for (int j = 0; j < ens.dim(); ++j)
            prev_delta[j] = window(window.rows - 1, j) - window(window.rows - 2, j);
    const int member = rng.uniform_int(static_cast<int>(ens.member_params.size()));
    const auto [mean, var] = ens_member_predict(ens, member, prev_delta);
    return gaussian_delta_sample(mean, var, rng);
}

/// Indicators at the final row of a close-only window (synthetic bars carry
/// high = low = close).
inline Vec window_indicators(const Mat& window) {
    PriceTable t;
    t.tickers.assign(window.cols, "");
    t.dates.resize(window.rows);
    t.close = window;
    t.open = window;
    t.high = window;
    t.low = window;
    t.volume = Mat(window.rows, window.cols, 0.0);
    const IndicatorTable ind = compute_indicators(t);
    return ind.row(window.rows - 1);
}

} // namespace dyn_detail

/// Rebuilds an EnvState from a stored observation vector.
inline EnvState state_from_obs(const Vec& obs, int d, int t, bool include_indicators) {
    EnvState s;
    s.balance = obs[0];
    s.prices.assign(obs.begin() + 1, obs.begin() + 1 + d);
    s.holdings.resize(d);
    for (int i = 0; i < d; ++i) s.holdings[i] = static_cast<long long>(std::llround(obs[1 + d + i]));
    if (include_indicators)
        s.indicators.assign(obs.begin() + 1 + 2 * d, obs.end());
    else
        s.indicators.assign(7 * d, 0.0);
    s.t = t;
    return s;
}

/// One model step from an explicit window whose last row is the state's
/// prices. Appends the predicted close row to the window.
template <typename Model>
StepResult model_step(const Model& model, Mat& window, const EnvState& state, const Vec& raw_action,
                      double cost_percentage, bool include_indicators, Rng& rng) {
    const Vec delta = dyn_detail::sample_next_delta(model, window, rng);
    Vec next_prices(state.prices.size());
    for (size_t j = 0; j < next_prices.size(); ++j)
        next_prices[j] = std::max(state.prices[j] + delta[j], kPriceFloor);

    window.push_row(next_prices);
    if (window.rows > model.history_window) {
        Mat trimmed(window.rows - 1, window.cols);
        std::copy(window.data.begin() + window.cols, window.data.end(), trimmed.data.begin());
        window = std::move(trimmed);
    }
    Vec next_ind(7 * state.prices.size(), 0.0);
    if (include_indicators) next_ind = dyn_detail::window_indicators(window);
    return env_step(state, action_scale(raw_action), next_prices, next_ind, cost_percentage);
}

/// Window of real closes ending at the state's time index.
template <typename Model>
Mat history_window_for(const Model& model, const EnvState& state) {
    const int end = std::min(state.t, model.closes.rows - 1);
    const int begin = std::max(0, end - model.history_window + 1);
    Mat window(end - begin + 1, model.closes.cols);
    for (int r = begin; r <= end; ++r)
        for (int j = 0; j < model.closes.cols; ++j) window(r - begin, j) = model.closes(r, j);
    // the state's prices are authoritative for the final row
    window.set_row(window.rows - 1, state.prices);
    return window;
}

template <typename Model>
TransitionSample predict_transition(const Model& model, const EnvState& state, const Vec& raw_action,
                                    double cost_percentage, bool include_indicators, Rng& rng) {
    Mat window = history_window_for(model, state);
    const StepResult step =
        model_step(model, window, state, raw_action, cost_percentage, include_indicators, rng);
    TransitionSample tr;
    tr.s = observation(state, include_indicators);
    tr.a = raw_action;
    tr.s_next = observation(step.next_state, include_indicators);
    tr.r = step.reward;
    tr.done = false;
    tr.model_generated = true;
    tr.t = state.t;
    return tr;
}

inline TransitionSample nf_dyn_predict(const NfDynamics& dyn, const EnvState& state,
                                       const Vec& raw_action, Rng& rng,
                                       double cost_percentage = 0.0,
                                       bool include_indicators = true) {
    return predict_transition(dyn, state, raw_action, cost_percentage, include_indicators, rng);
}

inline TransitionSample ens_predict(const GaussianEnsemble& ens, const EnvState& state,
                                    const Vec& raw_action, Rng& rng, double cost_percentage = 0.0,
                                    bool include_indicators = true) {
    return predict_transition(ens, state, raw_action, cost_percentage, include_indicators, rng);
}

/// k chained predicted transitions per start state under the given policy;
/// every appended sample is flagged model-generated.
template <typename Model, typename Policy>
std::vector<TransitionSample> model_rollout(const Model& model, Policy&& policy,
                                            const std::vector<EnvState>& start_states, int horizon,
                                            double cost_percentage, bool include_indicators,
                                            Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("rollout horizon must be >= 1");
    std::vector<TransitionSample> out;
    out.reserve(start_states.size() * static_cast<size_t>(horizon));
    for (const EnvState& start : start_states) {
        EnvState state = start;
        Mat window = history_window_for(model, state);
        for (int step_idx = 0; step_idx < horizon; ++step_idx) {
            const Vec raw_action = policy(observation(state, include_indicators));
            const StepResult step =
                model_step(model, window, state, raw_action, cost_percentage, include_indicators, rng);
            TransitionSample tr;
            tr.s = observation(state, include_indicators);
            tr.a = raw_action;
            tr.s_next = observation(step.next_state, include_indicators);
            tr.r = step.reward;
            tr.model_generated = true;
            tr.t = state.t;
            out.push_back(std::move(tr));
            state = step.next_state;
        }
    }
    return out;
}

} // namespace mbnf
