#pragma once

#include <functional>
#include <optional>

#include "mbnf/dynamics.hpp"
#include "mbnf/sac.hpp"

namespace mbnf {

/// Table-driven schedule: E total env steps, a model refit every M steps
/// (N gradient steps each), L policy updates per env step, and k-step
/// rollouts of `rollout_batch` start states per refit.
struct LoopSchedule {
    long long total_env_steps = 0;   // E
    int model_refit_every = 250;     // M
    int model_fit_steps = 200;       // N
    int policy_updates_per_step = 4; // L
    int rollout_horizon = 1;         // k
    int rollout_batch = 256;

    void validate() const {
        if (total_env_steps < 1 || model_refit_every < 1 || model_fit_steps < 1 ||
            policy_updates_per_step < 0 || rollout_horizon < 1 || rollout_batch < 1)
            throw std::invalid_argument("schedule fields must be positive");
        if (model_refit_every > total_env_steps)
            throw std::invalid_argument("refit interval exceeds total env steps");
    }
};

struct LoopConfig {
    LoopSchedule schedule;
    size_t buffer_capacity = 100000;
    long long warmup_random_steps = 500; // random actions before the first model fit
    double cost_percentage = 0.001;
    double b0 = 1e6;
    bool use_indicators = true;
    int sac_batch = 64;
    double sac_lr = 3e-4;
    SacConfig sac;
    NfDynConfig nf;
    EnsembleConfig ens;
};

/// Fixed affine observation scaling computed from the training split, so
/// runs are deterministic and states in the buffers stay in raw units.
struct ObsNormalizer {
    Vec shift, scale;

    Vec apply(const Vec& obs) const {
        Vec out(obs.size());
        for (size_t i = 0; i < obs.size(); ++i) out[i] = (obs[i] - shift[i]) / scale[i];
        return out;
    }
};

inline ObsNormalizer make_obs_normalizer(const PriceTable& prices, const IndicatorTable& indicators,
                                         const DatasetSplit& split, double b0,
                                         bool use_indicators) {
    const int d = prices.num_stocks();
    ObsNormalizer norm;
    norm.shift.push_back(b0);
    norm.scale.push_back(std::max(b0, 1.0));
    Vec price_mean(d);
    for (int i = 0; i < d; ++i) {
        Vec col;
        for (int t = split.train_begin; t < split.train_end; ++t) col.push_back(prices.close(t, i));
        price_mean[i] = mean_of(col);
        norm.shift.push_back(price_mean[i]);
        norm.scale.push_back(std::max(sample_std(col), 1e-3));
    }
    // holdings scaled by the cash a full position would tie up
    for (int i = 0; i < d; ++i) {
        norm.shift.push_back(0.0);
        norm.scale.push_back(std::max(b0 / std::max(price_mean[i], 1e-3), 1.0));
    }
    if (use_indicators) {
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < IndicatorTable::kPerStock; ++k) {
                Vec col;
                for (int t = split.train_begin; t < split.train_end; ++t)
                    col.push_back(indicators.at(t, i, k));
                norm.shift.push_back(mean_of(col));
                norm.scale.push_back(std::max(sample_std(col), 1e-3));
            }
    }
    return norm;
}

struct TrainLogRow {
    long long step = 0;
    double cum_reward = 0.0; // R_t, cumulative over the whole run
    double critic_loss = std::numeric_limits<double>::quiet_NaN();
    double actor_loss = std::numeric_limits<double>::quiet_NaN();
    double entropy_estimate = std::numeric_limits<double>::quiet_NaN();
    double model_loss = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
    SacAgent agent;
    ReplayBuffer env_buffer;
    ReplayBuffer model_buffer;
    std::vector<TrainLogRow> log;
    int refits = 0;
    // per-refit snapshots, for sharpness diagnostics over training
    std::vector<Vec> critic_snapshots;
    std::vector<FlowModel> flow_snapshots;     // mbnf runs
    std::vector<GaussianEnsemble> ens_snapshots; // mbpo runs
};

enum class ModelKind { Mbnf, Mbpo };

namespace loop_detail {

inline Mat train_price_rows(const PriceTable& prices, const DatasetSplit& split, int upto) {
    Mat rows(upto - split.train_begin + 1, prices.num_stocks());
    for (int t = split.train_begin; t <= upto; ++t)
        for (int j = 0; j < prices.num_stocks(); ++j) rows(t - split.train_begin, j) = prices.close(t, j);
    return rows;
}

} // namespace loop_detail

/// One MBRL training run: per env step append the real transition to the
/// env buffer; every M steps refit the dynamics model on the real prices
/// seen so far and push k-step rollouts into the agent buffer; then run L
/// SAC updates on agent-buffer batches.
inline RunResult run_loop(ModelKind kind, const PriceTable& prices, const IndicatorTable& indicators,
                          const DatasetSplit& split, const LoopConfig& cfg, uint64_t seed) {
    cfg.schedule.validate();
    if (split.train_size() < 2) throw std::invalid_argument("training split too short");
    const int d = prices.num_stocks();
    const int obs_dim = 1 + 2 * d + (cfg.use_indicators ? 7 * d : 0);

    Rng rng(seed);
    SacAgent agent = make_sac(obs_dim, d, cfg.sac, rng);
    ReplayBuffer env_buffer(cfg.buffer_capacity, BufferKind::Env);
    ReplayBuffer model_buffer(cfg.buffer_capacity, BufferKind::Model);
    const ObsNormalizer norm =
        make_obs_normalizer(prices, indicators, split, cfg.b0, cfg.use_indicators);

    std::optional<NfDynamics> nf_model;
    std::optional<GaussianEnsemble> ens_model;

    RunResult result{std::move(agent), std::move(env_buffer), std::move(model_buffer), {}, 0, {}, {}, {}};

    EnvState state = env_reset(prices, indicators, split.train_begin, cfg.b0);
    int max_revealed = split.train_begin;
    double cum_reward = 0.0;
    const int last_state_index = split.train_end - 1;

    std::vector<TransitionSample> norm_batch;
    std::vector<const TransitionSample*> norm_ptrs;

    for (long long step = 1; step <= cfg.schedule.total_env_steps; ++step) {
        // --- real environment step ---
        Vec raw_action(d);
        if (step <= cfg.warmup_random_steps) {
            for (double& v : raw_action) v = rng.uniform(-1.0, 1.0);
        } else {
            raw_action = sample_action(result.agent, norm.apply(observation(state, cfg.use_indicators)),
                                       rng)
                             .action;
        }
        const int next_t = state.t + 1;
        const StepResult sr = env_step(state, action_scale(raw_action), prices.close.row(next_t),
                                       indicators.row(next_t), cfg.cost_percentage);
        max_revealed = std::max(max_revealed, next_t);
        cum_reward += sr.reward;

        const bool done = next_t == last_state_index;
        TransitionSample tr;
        tr.s = observation(state, cfg.use_indicators);
        tr.a = raw_action;
        tr.s_next = observation(sr.next_state, cfg.use_indicators);
        tr.r = sr.reward;
        tr.done = done;
        tr.model_generated = false;
        tr.t = state.t;
        result.env_buffer.push(std::move(tr));

        state = done ? env_reset(prices, indicators, split.train_begin, cfg.b0) : sr.next_state;

        TrainLogRow row;
        row.step = step;
        row.cum_reward = cum_reward;

        // --- model refit + rollouts ---
        if (step % cfg.schedule.model_refit_every == 0 && step > cfg.warmup_random_steps) {
            const Mat price_rows = loop_detail::train_price_rows(prices, split, max_revealed);
            if (kind == ModelKind::Mbnf) {
                NfDynConfig nf_cfg = cfg.nf;
                nf_cfg.max_steps = cfg.schedule.model_fit_steps;
                nf_cfg.epochs = std::numeric_limits<int>::max();
                nf_model = nf_dyn_fit(price_rows, nf_cfg, rng);
                row.model_loss = nf_dyn_loss(*nf_model, price_rows);
                result.flow_snapshots.push_back(nf_model->flow);
            } else {
                EnsembleConfig ens_cfg = cfg.ens;
                ens_cfg.max_steps = cfg.schedule.model_fit_steps;
                ens_cfg.epochs = std::numeric_limits<int>::max();
                ens_model = ens_fit(price_rows, ens_cfg, rng);
                row.model_loss = ens_loss(*ens_model, price_rows);
                result.ens_snapshots.push_back(*ens_model);
            }
            result.critic_snapshots.push_back(result.agent.q1_params);
            ++result.refits;

            const auto starts_raw =
                result.env_buffer.sample_with_replacement(cfg.schedule.rollout_batch, rng);
            std::vector<EnvState> starts;
            starts.reserve(starts_raw.size());
            for (const TransitionSample* s : starts_raw)
                starts.push_back(state_from_obs(s->s, d, s->t, cfg.use_indicators));
            auto policy = [&](const Vec& obs) {
                return sample_action(result.agent, norm.apply(obs), rng).action;
            };
            std::vector<TransitionSample> rollouts;
            if (kind == ModelKind::Mbnf)
                rollouts = model_rollout(*nf_model, policy, starts, cfg.schedule.rollout_horizon,
                                         cfg.cost_percentage, cfg.use_indicators, rng);
            else
                rollouts = model_rollout(*ens_model, policy, starts, cfg.schedule.rollout_horizon,
                                         cfg.cost_percentage, cfg.use_indicators, rng);
            for (auto& r : rollouts) result.model_buffer.push(std::move(r));
        }

        // --- policy updates ---
        if (!result.model_buffer.empty()) {
            for (int u = 0; u < cfg.schedule.policy_updates_per_step; ++u) {
                const auto batch = result.model_buffer.sample(cfg.sac_batch, rng);
                norm_batch.clear();
                norm_batch.reserve(batch.size());
                for (const TransitionSample* p : batch) {
                    TransitionSample nb;
                    nb.s = norm.apply(p->s);
                    nb.a = p->a;
                    nb.s_next = norm.apply(p->s_next);
                    nb.r = p->r;
                    nb.done = p->done;
                    norm_batch.push_back(std::move(nb));
                }
                norm_ptrs.clear();
                for (const auto& nb : norm_batch) norm_ptrs.push_back(&nb);
                row.critic_loss = critic_update(result.agent, norm_ptrs, cfg.sac_lr, rng);
                row.actor_loss = actor_update(result.agent, norm_ptrs, cfg.sac_lr, rng);
                row.entropy_estimate = result.agent.last_entropy_estimate;
                soft_target_update(result.agent, result.agent.cfg.tau);
            }
        }
        result.log.push_back(row);
    }
    return result;
}

inline RunResult run_mbnf(const PriceTable& prices, const IndicatorTable& indicators,
                          const DatasetSplit& split, const LoopConfig& cfg, uint64_t seed) {
    return run_loop(ModelKind::Mbnf, prices, indicators, split, cfg, seed);
}

inline RunResult run_mbpo(const PriceTable& prices, const IndicatorTable& indicators,
                          const DatasetSplit& split, const LoopConfig& cfg, uint64_t seed) {
    return run_loop(ModelKind::Mbpo, prices, indicators, split, cfg, seed);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalTraceRow {
    int t = 0;
    double balance = 0.0;
    double asset = 0.0;
    double reward = 0.0;
    std::vector<int> executed;
};

struct EvalResult {
    Vec equity; // daily Asset_t, starting at the reset day
    std::vector<EvalTraceRow> trace;
};

/// Steps a policy through [begin, end) and records the daily equity curve.
/// The policy is a function obs -> raw action; evaluation never mutates it.
inline EvalResult evaluate_policy(const PriceTable& prices, const IndicatorTable& indicators,
                                  int begin, int end,
                                  const std::function<Vec(const Vec&)>& policy,
                                  double cost_percentage, double b0, bool use_indicators) {
    if (begin < 0 || end > prices.days() || end - begin < 2)
        throw std::invalid_argument("bad evaluation range");
    EvalResult out;
    EnvState state = env_reset(prices, indicators, begin, b0);
    out.equity.push_back(asset_value(state));
    for (int t = begin; t + 1 < end; ++t) {
        const Vec raw = policy(observation(state, use_indicators));
        const StepResult sr = env_step(state, action_scale(raw), prices.close.row(t + 1),
                                       indicators.row(t + 1), cost_percentage);
        out.equity.push_back(asset_value(sr.next_state));
        out.trace.push_back({t, sr.next_state.balance, out.equity.back(), sr.reward, sr.executed});
        state = sr.next_state;
    }
    return out;
}

/// Deterministic-mode evaluation of a trained agent.
inline EvalResult evaluate_agent(const SacAgent& agent, const ObsNormalizer& norm,
                                 const PriceTable& prices, const IndicatorTable& indicators,
                                 int begin, int end, double cost_percentage, double b0,
                                 bool use_indicators) {
    return evaluate_policy(
        prices, indicators, begin, end,
        [&](const Vec& obs) {
            Rng dummy(0); // deterministic mode draws nothing
            return sample_action(agent, norm.apply(obs), dummy, true).action;
        },
        cost_percentage, b0, use_indicators);
}

} // namespace mbnf
