#pragma once

#include "mbnf/diffnet.hpp"
#include "mbnf/replay.hpp"

namespace mbnf {

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double alpha = 0.2; // fixed entropy temperature
    int hidden = 64;
    int hidden_layers = 2;
    double reward_scale = 1.0; // applied to rewards inside the critic target
};

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kTanhEps = 1e-6;

/// Soft actor-critic with a tanh-squashed Gaussian policy and twin critics.
/// The policy net emits mean and log-std per action dimension; critics score
/// concatenated (observation, action) vectors.
struct SacAgent {
    int obs_dim = 0;
    int act_dim = 0;
    SacConfig cfg;
    MlpSpec policy_spec, q_spec;
    Vec policy_params, q1_params, q2_params, q1_target, q2_target;
    Optimizer policy_opt, q1_opt, q2_opt;
    double last_entropy_estimate = 0.0;
};

inline SacAgent make_sac(int obs_dim, int act_dim, const SacConfig& cfg, Rng& rng) {
    SacAgent a;
    a.obs_dim = obs_dim;
    a.act_dim = act_dim;
    a.cfg = cfg;
    std::vector<int> pol = {obs_dim};
    std::vector<int> q = {obs_dim + act_dim};
    for (int i = 0; i < cfg.hidden_layers; ++i) {
        pol.push_back(cfg.hidden);
        q.push_back(cfg.hidden);
    }
    pol.push_back(2 * act_dim);
    q.push_back(1);
    a.policy_spec = mlp_spec(pol);
    a.q_spec = mlp_spec(q);
    a.policy_params = init_params(a.policy_spec, rng);
    // near-zero policy head: every seed starts unsaturated at mean 0, std 1
    const int last = a.policy_spec.num_layers() - 1;
    const int head = a.policy_spec.layer_offset(last);
    for (int i = head; i < a.policy_spec.param_count(); ++i) a.policy_params[i] *= 0.01;
    a.q1_params = init_params(a.q_spec, rng);
    a.q2_params = init_params(a.q_spec, rng);
    a.q1_target = a.q1_params;
    a.q2_target = a.q2_params;
    return a;
}

struct ActionSample {
    Vec action;      // in [-1, 1]^d
    double log_prob; // 0 in deterministic mode
};

namespace sac_detail {

struct PolicyHead {
    Vec mean, log_std;
    std::vector<bool> clamped;
};

inline PolicyHead policy_head(const SacAgent& agent, const Vec& obs, MlpCache& cache) {
    const Vec& out = mlp_forward(agent.policy_spec, agent.policy_params, obs, cache);
    PolicyHead head;
    const int d = agent.act_dim;
    head.mean.assign(out.begin(), out.begin() + d);
    head.log_std.resize(d);
    head.clamped.resize(d);
    for (int j = 0; j < d; ++j) {
        head.clamped[j] = out[d + j] < kLogStdMin || out[d + j] > kLogStdMax;
        head.log_std[j] = std::clamp(out[d + j], kLogStdMin, kLogStdMax);
    }
    return head;
}

/// log pi(a|s) for a = tanh(mean + std * xi), including the tanh
/// change-of-variables correction.
inline double squashed_log_prob(const Vec& log_std, const Vec& xi, const Vec& action) {
    double lp = 0.0;
    for (size_t j = 0; j < xi.size(); ++j)
        lp += -0.5 * std::log(2.0 * M_PI) - log_std[j] - 0.5 * xi[j] * xi[j] -
              std::log(1.0 - action[j] * action[j] + kTanhEps);
    return lp;
}

inline double q_value(const SacAgent& agent, const Vec& params, const Vec& obs, const Vec& action,
                      MlpCache& cache) {
    Vec input;
    input.reserve(obs.size() + action.size());
    input.insert(input.end(), obs.begin(), obs.end());
    input.insert(input.end(), action.begin(), action.end());
    return mlp_forward(agent.q_spec, params, input, cache)[0];
}

} // namespace sac_detail

/// Online critic value (min of the twins when `both`).
inline double critic_value(const SacAgent& agent, const Vec& obs, const Vec& action,
                           bool both = false) {
    MlpCache cache;
    const double q1 = sac_detail::q_value(agent, agent.q1_params, obs, action, cache);
    if (!both) return q1;
    const double q2 = sac_detail::q_value(agent, agent.q2_params, obs, action, cache);
    return std::min(q1, q2);
}

inline ActionSample sample_action(const SacAgent& agent, const Vec& obs, Rng& rng,
                                  bool deterministic = false) {
    MlpCache cache;
    const sac_detail::PolicyHead head = sac_detail::policy_head(agent, obs, cache);
    if (!all_finite(head.mean)) throw std::runtime_error("non-finite policy output");
    ActionSample out;
    out.action.resize(agent.act_dim);
    if (deterministic) {
        for (int j = 0; j < agent.act_dim; ++j) out.action[j] = std::tanh(head.mean[j]);
        out.log_prob = 0.0;
        return out;
    }
    Vec xi(agent.act_dim);
    for (int j = 0; j < agent.act_dim; ++j) {
        xi[j] = rng.normal();
        out.action[j] = std::tanh(head.mean[j] + std::exp(head.log_std[j]) * xi[j]);
    }
    out.log_prob = sac_detail::squashed_log_prob(head.log_std, xi, out.action);
    return out;
}

/// One gradient step of both critics toward the entropy-regularized TD
/// target y = r + gamma (min_target_Q(s', a') - alpha log pi(a'|s')) with a'
/// freshly sampled. Truncation-aware: no terminal masking of the bootstrap.
inline double critic_update(SacAgent& agent, const std::vector<const TransitionSample*>& batch,
                            double lr, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const size_t n = batch.size();
    Vec g1(agent.q_spec.param_count(), 0.0), g2(agent.q_spec.param_count(), 0.0);
    MlpCache pol_cache, q_cache, q1_cache, q2_cache;
    Vec input_grad;
    double loss = 0.0;

    for (const TransitionSample* tr : batch) {
        const sac_detail::PolicyHead head = sac_detail::policy_head(agent, tr->s_next, pol_cache);
        Vec xi(agent.act_dim), a_next(agent.act_dim);
        for (int j = 0; j < agent.act_dim; ++j) {
            xi[j] = rng.normal();
            a_next[j] = std::tanh(head.mean[j] + std::exp(head.log_std[j]) * xi[j]);
        }
        const double log_pi = sac_detail::squashed_log_prob(head.log_std, xi, a_next);
        const double q1t = sac_detail::q_value(agent, agent.q1_target, tr->s_next, a_next, q_cache);
        const double q2t = sac_detail::q_value(agent, agent.q2_target, tr->s_next, a_next, q_cache);
        const double y = tr->r * agent.cfg.reward_scale +
                         agent.cfg.gamma * (std::min(q1t, q2t) - agent.cfg.alpha * log_pi);

        const double q1 = sac_detail::q_value(agent, agent.q1_params, tr->s, tr->a, q1_cache);
        const double q2 = sac_detail::q_value(agent, agent.q2_params, tr->s, tr->a, q2_cache);
        loss += 0.5 * ((q1 - y) * (q1 - y) + (q2 - y) * (q2 - y));
        const Vec up1 = {(q1 - y) / static_cast<double>(n)};
        const Vec up2 = {(q2 - y) / static_cast<double>(n)};
        mlp_backward(agent.q_spec, agent.q1_params, q1_cache, up1, g1.data(), input_grad);
        mlp_backward(agent.q_spec, agent.q2_params, q2_cache, up2, g2.data(), input_grad);
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) throw std::runtime_error("non-finite critic loss");
    agent.q1_opt.step(agent.q1_params, g1, lr);
    agent.q2_opt.step(agent.q2_params, g2, lr);
    return loss;
}

/// One reparameterized policy-gradient step on
/// E[alpha log pi(a~|s) - min Q(s, a~)].
inline double actor_update(SacAgent& agent, const std::vector<const TransitionSample*>& batch,
                           double lr, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const size_t n = batch.size();
    const int d = agent.act_dim;
    Vec pg(agent.policy_spec.param_count(), 0.0);
    Vec q_scratch(agent.q_spec.param_count(), 0.0);
    MlpCache pol_cache, q1_cache, q2_cache;
    Vec input_grad;
    double loss = 0.0, entropy = 0.0;

    for (const TransitionSample* tr : batch) {
        const sac_detail::PolicyHead head = sac_detail::policy_head(agent, tr->s, pol_cache);
        Vec xi(d), action(d), std_dev(d);
        for (int j = 0; j < d; ++j) {
            xi[j] = rng.normal();
            std_dev[j] = std::exp(head.log_std[j]);
            action[j] = std::tanh(head.mean[j] + std_dev[j] * xi[j]);
        }
        const double log_pi = sac_detail::squashed_log_prob(head.log_std, xi, action);
        const double q1 = sac_detail::q_value(agent, agent.q1_params, tr->s, action, q1_cache);
        const double q2 = sac_detail::q_value(agent, agent.q2_params, tr->s, action, q2_cache);
        const bool use_q1 = q1 <= q2;
        loss += agent.cfg.alpha * log_pi - std::min(q1, q2);
        entropy -= log_pi;

        // dQ/da through the chosen critic's input gradient
        const Vec up = {1.0};
        mlp_backward(agent.q_spec, use_q1 ? agent.q1_params : agent.q2_params,
                     use_q1 ? q1_cache : q2_cache, up, q_scratch.data(), input_grad);

        Vec upstream(2 * d, 0.0);
        for (int j = 0; j < d; ++j) {
            const double one_m_a2 = 1.0 - action[j] * action[j];
            const double dq_da = input_grad[agent.obs_dim + j];
            // d log pi / du via the tanh correction; the Gaussian terms cancel
            const double dlp_du = 2.0 * action[j] * one_m_a2 / (one_m_a2 + kTanhEps);
            const double du_dls = std_dev[j] * xi[j];
            const double g_mean = agent.cfg.alpha * dlp_du - dq_da * one_m_a2;
            const double g_ls =
                agent.cfg.alpha * (-1.0 + dlp_du * du_dls) - dq_da * one_m_a2 * du_dls;
            upstream[j] = g_mean / static_cast<double>(n);
            upstream[d + j] = head.clamped[j] ? 0.0 : g_ls / static_cast<double>(n);
        }
        mlp_backward(agent.policy_spec, agent.policy_params, pol_cache, upstream, pg.data(),
                     input_grad);
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) throw std::runtime_error("non-finite actor loss");
    agent.policy_opt.step(agent.policy_params, pg, lr);
    agent.last_entropy_estimate = entropy / static_cast<double>(n);
    return loss;
}

/// Polyak averaging of the critic targets: target <- tau online + (1-tau) target.
inline void soft_target_update(SacAgent& agent, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau outside (0, 1]");
    for (size_t i = 0; i < agent.q1_params.size(); ++i) {
        agent.q1_target[i] = tau * agent.q1_params[i] + (1.0 - tau) * agent.q1_target[i];
        agent.q2_target[i] = tau * agent.q2_params[i] + (1.0 - tau) * agent.q2_target[i];
    }
}

inline void save_sac_checkpoint(const std::string& base, const SacAgent& a) {
    save_mlp_checkpoint(base + "_policy", a.policy_spec, a.policy_params);
    save_mlp_checkpoint(base + "_q1", a.q_spec, a.q1_params);
    save_mlp_checkpoint(base + "_q2", a.q_spec, a.q2_params);
    save_mlp_checkpoint(base + "_q1_target", a.q_spec, a.q1_target);
    save_mlp_checkpoint(base + "_q2_target", a.q_spec, a.q2_target);
}

} // namespace mbnf
