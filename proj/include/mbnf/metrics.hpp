#pragma once

#include <optional>

#include "mbnf/common.hpp"

namespace mbnf {

/// Daily net-asset values. Ratios below assume 252 trading days per year.
struct EquityCurve {
    Vec assets;
    static constexpr double kTradingDaysPerYear = 252.0;
};

/// Zero-denominator ratios are reported as unset rather than +-inf so the
/// report stays serializable and comparable.
struct MetricsReport {
    std::optional<double> annualized_return;
    std::optional<double> cumulative_return;
    std::optional<double> annualized_volatility;
    std::optional<double> sharpe;
    std::optional<double> calmar;
    std::optional<double> stability;
    std::optional<double> max_drawdown;
};

inline MetricsReport compute_metrics(const EquityCurve& curve) {
    const Vec& a = curve.assets;
    if (a.size() < 2) throw std::invalid_argument("equity curve needs at least 2 points");
    for (double v : a)
        if (!(v > 0.0)) throw std::invalid_argument("non-positive equity value");

    const double A = EquityCurve::kTradingDaysPerYear;
    const int T = static_cast<int>(a.size()) - 1; // number of return days

    MetricsReport rep;

    Vec returns(T);
    for (int t = 0; t < T; ++t) returns[t] = a[t + 1] / a[t] - 1.0;

    const double cumulative = a.back() / a.front() - 1.0;
    rep.cumulative_return = cumulative;

    const double ann_return = std::pow(1.0 + cumulative, A / T) - 1.0;
    rep.annualized_return = ann_return;

    if (T >= 2) rep.annualized_volatility = sample_std(returns) * std::sqrt(A);

    if (rep.annualized_volatility && *rep.annualized_volatility > 0.0)
        rep.sharpe = ann_return / *rep.annualized_volatility;

    double run_max = a[0];
    double mdd = 0.0;
    for (double v : a) {
        run_max = std::max(run_max, v);
        mdd = std::min(mdd, v / run_max - 1.0);
    }
    rep.max_drawdown = mdd;

    if (mdd < 0.0) rep.calmar = ann_return / std::fabs(mdd);

    // R^2 of OLS fit of ln(asset_t / asset_0) against t
    if (static_cast<int>(a.size()) >= 3) {
        const int n = static_cast<int>(a.size());
        Vec y(n);
        for (int t = 0; t < n; ++t) y[t] = std::log(a[t] / a[0]);
        double tbar = (n - 1) / 2.0;
        double ybar = mean_of(y);
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (int t = 0; t < n; ++t) {
            sxy += (t - tbar) * (y[t] - ybar);
            sxx += (t - tbar) * (t - tbar);
            syy += (y[t] - ybar) * (y[t] - ybar);
        }
        if (syy > 0.0) {
            const double slope = sxy / sxx;
            double ss_res = 0.0;
            for (int t = 0; t < n; ++t) {
                const double fit = ybar + slope * (t - tbar);
                ss_res += (y[t] - fit) * (y[t] - fit);
            }
            rep.stability = 1.0 - ss_res / syy;
        }
    }
    return rep;
}

} // namespace mbnf
