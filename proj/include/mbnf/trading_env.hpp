#pragma once

#include "mbnf/common.hpp"
#include "mbnf/market_data.hpp"

namespace mbnf {

/// Maximum shares traded per stock per step.
constexpr int kMaxShares = 100;

/// Price floor keeping the positivity invariant under sampled deltas.
constexpr double kPriceFloor = 0.01;

/// Immutable market observation: cash, prices, integer holdings and the
/// 7-per-stock indicator block. Flattened observation length is 1 + 2d + 7d.
struct EnvState {
    double balance = 0.0;
    Vec prices;
    std::vector<long long> holdings;
    Vec indicators;
    int t = 0;

    int num_stocks() const { return static_cast<int>(prices.size()); }
};

/// Integer shares per stock, each in [-kMaxShares, kMaxShares].
struct Action {
    std::vector<int> shares;
};

struct StepResult {
    EnvState next_state;
    double reward = 0.0;           // change in net asset value, cost included
    std::vector<int> executed;     // shares actually traded (signed)
    double cost = 0.0;             // P^T |executed| * cost_percentage
};

inline Vec observation(const EnvState& s, bool include_indicators = true) {
    Vec obs;
    obs.reserve(1 + 2 * s.prices.size() + (include_indicators ? s.indicators.size() : 0));
    obs.push_back(s.balance);
    obs.insert(obs.end(), s.prices.begin(), s.prices.end());
    for (long long w : s.holdings) obs.push_back(static_cast<double>(w));
    if (include_indicators) obs.insert(obs.end(), s.indicators.begin(), s.indicators.end());
    return obs;
}

inline double asset_value(const EnvState& s) {
    double v = s.balance;
    for (int i = 0; i < s.num_stocks(); ++i) v += s.prices[i] * static_cast<double>(s.holdings[i]);
    return v;
}

inline EnvState env_reset(const PriceTable& prices, const IndicatorTable& indicators, int t0,
                          double b0 = 1e6) {
    if (t0 < 0 || t0 >= prices.days() - 1)
        throw std::out_of_range("reset index leaves no next price to step to");
    EnvState s;
    s.balance = b0;
    s.prices = prices.close.row(t0);
    s.holdings.assign(prices.num_stocks(), 0);
    s.indicators = indicators.row(t0);
    s.t = t0;
    return s;
}

/// One market step. Sells execute first, clamped to holdings; buys follow in
/// ascending stock index, each clamped so cash (including the trade's own
/// cost) stays non-negative. The reward is the change in net asset value;
/// the transaction cost is already paid out of cash, so it is not subtracted
/// a second time.
inline StepResult env_step(const EnvState& state, const Action& action, const Vec& next_prices,
                           const Vec& next_indicators, double cost_percentage) {
    const int d = state.num_stocks();
    if (static_cast<int>(action.shares.size()) != d || static_cast<int>(next_prices.size()) != d)
        throw std::invalid_argument("dimension mismatch in env_step");
    for (double p : next_prices)
        if (!(p > 0.0)) throw std::invalid_argument("non-positive next price");

    StepResult res;
    res.executed.assign(d, 0);
    std::vector<long long> holdings = state.holdings;
    double cash = state.balance;
    double cost = 0.0;

    for (int i = 0; i < d; ++i) {
        if (action.shares[i] >= 0) continue;
        const long long sell = std::min<long long>(-action.shares[i], holdings[i]);
        const double notional = static_cast<double>(sell) * state.prices[i];
        cash += notional - notional * cost_percentage;
        cost += notional * cost_percentage;
        holdings[i] -= sell;
        res.executed[i] = static_cast<int>(-sell);
    }
    for (int i = 0; i < d; ++i) {
        if (action.shares[i] <= 0) continue;
        const double unit = state.prices[i] * (1.0 + cost_percentage);
        long long n = std::min<long long>(action.shares[i],
                                          static_cast<long long>(std::floor(cash / unit)));
        while (n > 0 && static_cast<double>(n) * unit > cash) --n;
        cash -= static_cast<double>(n) * unit;
        cost += static_cast<double>(n) * state.prices[i] * cost_percentage;
        holdings[i] += n;
        res.executed[i] = static_cast<int>(n);
    }

    res.next_state.balance = cash;
    res.next_state.prices = next_prices;
    res.next_state.holdings = std::move(holdings);
    res.next_state.indicators = next_indicators;
    res.next_state.t = state.t + 1;
    res.cost = cost;
    res.reward = asset_value(res.next_state) - asset_value(state);
    return res;
}

/// Bridges the policy's continuous output in [-1,1]^d to integer shares;
/// fractional shares round toward zero.
inline Action action_scale(const Vec& raw) {
    Action a;
    a.shares.reserve(raw.size());
    for (double r : raw) {
        const double clipped = std::clamp(r, -1.0, 1.0);
        a.shares.push_back(static_cast<int>(std::trunc(clipped * kMaxShares)));
    }
    return a;
}

} // namespace mbnf
