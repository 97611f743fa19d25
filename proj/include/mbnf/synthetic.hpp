#pragma once

#include "mbnf/market_data.hpp"
#include "mbnf/stable.hpp"
#include "mbnf/trading_env.hpp"

namespace mbnf {

/// Seeded synthetic market: each close follows an Ornstein-Uhlenbeck pull
/// toward its long-run level plus alpha-stable noise, so price differences
/// are stationary and heavy-tailed. Used for fixtures and smoke runs.
struct SyntheticMarketConfig {
    int num_stocks = 3;
    int days = 1000;
    double start_price = 50.0;
    double level = 80.0;        // long-run OU level
    double reversion = 0.004;   // daily pull toward the level
    double noise_scale = 0.35;  // stable scale of the daily delta
    double noise_alpha = 1.7;   // tail index of the delta noise
    std::string first_date = "2015-01-02";
};

inline PriceTable make_synthetic_market(const SyntheticMarketConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    PriceTable t;
    const int d = cfg.num_stocks, n = cfg.days;
    for (int i = 0; i < d; ++i) t.tickers.push_back("SYN" + std::to_string(i + 1));
    t.open = Mat(n, d);
    t.high = Mat(n, d);
    t.low = Mat(n, d);
    t.close = Mat(n, d);
    t.volume = Mat(n, d);
    t.shares_outstanding.assign(d, 1e7);

    const long long day0 = csv::iso_to_days(cfg.first_date);
    for (int r = 0; r < n; ++r) t.dates.push_back(csv::days_to_iso(day0 + r));

    const StableParams noise{cfg.noise_alpha, 0.0, 0.0, cfg.noise_scale};
    // mild common factor so stocks co-move and cross-sectional structure exists
    Vec level(d), price(d);
    for (int i = 0; i < d; ++i) {
        level[i] = cfg.level * (1.0 + 0.1 * i);
        price[i] = cfg.start_price * (1.0 + 0.1 * i);
    }
    for (int r = 0; r < n; ++r) {
        const double common = stable_sample_one(noise, rng);
        for (int i = 0; i < d; ++i) {
            const double own = stable_sample_one(noise, rng);
            double delta = cfg.reversion * (level[i] - price[i]) + 0.6 * common + 0.8 * own;
            delta = std::clamp(delta, -0.2 * price[i], 0.2 * price[i]); // cap stable outliers
            const double prev = price[i];
            price[i] = std::max(kPriceFloor, price[i] + delta);
            t.open(r, i) = prev;
            t.close(r, i) = price[i];
            t.high(r, i) = std::max(prev, price[i]) * (1.0 + 0.002 * rng.uniform());
            t.low(r, i) = std::min(prev, price[i]) * (1.0 - 0.002 * rng.uniform());
            t.volume(r, i) = std::floor(1e5 * (0.5 + rng.uniform()));
        }
    }
    return t;
}

inline void write_ohlcv_csv(const std::string& path, const PriceTable& t) {
    csv::Writer w(path);
    w.row({"date", "ticker", "open", "high", "low", "close", "volume", "shares_outstanding"});
    for (int r = 0; r < t.days(); ++r)
        for (int i = 0; i < t.num_stocks(); ++i)
            w.row({t.dates[r], t.tickers[i], csv::num(t.open(r, i)), csv::num(t.high(r, i)),
                   csv::num(t.low(r, i)), csv::num(t.close(r, i)), csv::num(t.volume(r, i)),
                   t.has_shares_outstanding() ? csv::num(t.shares_outstanding[i]) : ""});
}

} // namespace mbnf
