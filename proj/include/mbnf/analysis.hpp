#pragma once

#include <functional>

#include "mbnf/csv.hpp"
#include "mbnf/replay.hpp"

namespace mbnf {

struct SharpnessResult {
    double lambda_max = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Largest-magnitude Hessian eigenvalue (with sign) by power iteration on
/// finite-difference Hessian-vector products
/// Hv ~ (grad(theta + eps v) - grad(theta - eps v)) / (2 eps).
inline SharpnessResult sharpness(const std::function<Vec(const Vec&)>& grad_fn, const Vec& params,
                                 double tol = 1e-6, int max_iter = 200, uint64_t seed = 0) {
    const size_t n = params.size();
    Rng rng(seed);
    Vec v(n);
    for (double& x : v) x = rng.normal();
    double vn = norm2(v);
    for (double& x : v) x /= vn;

    const double eps = 1e-4 * (1.0 + norm2(params));
    SharpnessResult res;
    Vec plus(n), minus(n), hv(n);
    for (int it = 1; it <= max_iter; ++it) {
        for (size_t i = 0; i < n; ++i) {
            plus[i] = params[i] + eps * v[i];
            minus[i] = params[i] - eps * v[i];
        }
        const Vec gp = grad_fn(plus);
        const Vec gm = grad_fn(minus);
        for (size_t i = 0; i < n; ++i) hv[i] = (gp[i] - gm[i]) / (2.0 * eps);

        const double lambda = dot(v, hv); // Rayleigh quotient carries the sign
        double resid = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double r = hv[i] - lambda * v[i];
            resid += r * r;
        }
        resid = std::sqrt(resid);
        res.lambda_max = lambda;
        res.iterations = it;
        res.residual = resid;
        if (resid <= tol * std::max(1.0, std::fabs(lambda))) {
            res.converged = true;
            return res;
        }
        const double hn = norm2(hv);
        if (hn == 0.0) { // zero Hessian: lambda 0 is exact
            res.lambda_max = 0.0;
            res.converged = true;
            return res;
        }
        for (size_t i = 0; i < n; ++i) v[i] = hv[i] / hn;
    }
    return res; // best estimate, flagged unconverged
}

// ---------------------------------------------------------------------------
// Buffer exports
// ---------------------------------------------------------------------------

namespace analysis_detail {

inline void header_block(std::vector<std::string>& header, const std::string& prefix, size_t n) {
    for (size_t i = 1; i <= n; ++i) header.push_back(prefix + "_" + std::to_string(i));
}

} // namespace analysis_detail

/// Rows `kind, s..., a..., s_next..., delta...` with delta = s_next - s; the
/// input for external embedding tools.
inline void export_buffer(const ReplayBuffer& env_buffer, const ReplayBuffer& model_buffer,
                          const std::string& path) {
    if (env_buffer.empty() && model_buffer.empty())
        throw std::invalid_argument("nothing to export: both buffers empty");
    const TransitionSample& probe =
        env_buffer.empty() ? model_buffer.at(0) : env_buffer.at(0);
    std::vector<std::string> header = {"kind"};
    analysis_detail::header_block(header, "s", probe.s.size());
    analysis_detail::header_block(header, "a", probe.a.size());
    analysis_detail::header_block(header, "s_next", probe.s_next.size());
    analysis_detail::header_block(header, "delta", probe.s.size());

    csv::Writer w(path);
    w.row(header);
    auto emit = [&w](const ReplayBuffer& buf, const char* kind) {
        for (size_t i = 0; i < buf.size(); ++i) {
            const TransitionSample& tr = buf.at(i);
            std::vector<std::string> row = {kind};
            for (double v : tr.s) row.push_back(csv::num(v));
            for (double v : tr.a) row.push_back(csv::num(v));
            for (double v : tr.s_next) row.push_back(csv::num(v));
            for (size_t j = 0; j < tr.s.size(); ++j) row.push_back(csv::num(tr.s_next[j] - tr.s[j]));
            w.row(row);
        }
    };
    emit(env_buffer, "real");
    emit(model_buffer, "model");
}

/// Rows `kind, s..., a..., s_next..., r`: the raw transition dump written
/// into every run directory.
inline void export_buffer_rewards(const ReplayBuffer& env_buffer, const ReplayBuffer& model_buffer,
                                  const std::string& path) {
    if (env_buffer.empty() && model_buffer.empty())
        throw std::invalid_argument("nothing to export: both buffers empty");
    const TransitionSample& probe =
        env_buffer.empty() ? model_buffer.at(0) : env_buffer.at(0);
    std::vector<std::string> header = {"kind"};
    analysis_detail::header_block(header, "s", probe.s.size());
    analysis_detail::header_block(header, "a", probe.a.size());
    analysis_detail::header_block(header, "s_next", probe.s_next.size());
    header.push_back("r");

    csv::Writer w(path);
    w.row(header);
    auto emit = [&w](const ReplayBuffer& buf, const char* kind) {
        for (size_t i = 0; i < buf.size(); ++i) {
            const TransitionSample& tr = buf.at(i);
            std::vector<std::string> row = {kind};
            for (double v : tr.s) row.push_back(csv::num(v));
            for (double v : tr.a) row.push_back(csv::num(v));
            for (double v : tr.s_next) row.push_back(csv::num(v));
            row.push_back(csv::num(tr.r));
            w.row(row);
        }
    };
    emit(env_buffer, "real");
    emit(model_buffer, "model");
}

/// Parses an export written by export_buffer_rewards back into transitions.
inline std::vector<TransitionSample> load_buffer_csv(const std::string& path, int obs_dim,
                                                     int act_dim) {
    const csv::Table t = csv::read(path);
    std::vector<TransitionSample> out;
    for (const auto& row : t.rows) {
        TransitionSample tr;
        tr.model_generated = row[0] == "model";
        size_t col = 1;
        for (int i = 0; i < obs_dim; ++i) tr.s.push_back(csv::to_double(row[col++]));
        for (int i = 0; i < act_dim; ++i) tr.a.push_back(csv::to_double(row[col++]));
        for (int i = 0; i < obs_dim; ++i) tr.s_next.push_back(csv::to_double(row[col++]));
        tr.r = csv::to_double(row[col]);
        out.push_back(std::move(tr));
    }
    return out;
}

} // namespace mbnf
