// Generates a seeded synthetic OHLCV csv: OU-reverting closes with
// alpha-stable daily deltas, the fixture market used by tests and demos.

#include <CLI11.hpp>

#include "mbnf/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic OHLCV sample data generator"};
    std::string out_path = "sample_prices.csv";
    mbnf::SyntheticMarketConfig cfg;
    uint64_t seed = 1;
    app.add_option("--out", out_path, "output csv");
    app.add_option("--stocks", cfg.num_stocks, "number of tickers");
    app.add_option("--days", cfg.days, "number of trading days");
    app.add_option("--seed", seed, "rng seed");
    app.add_option("--start-price", cfg.start_price, "initial price level");
    app.add_option("--level", cfg.level, "long-run OU level");
    app.add_option("--reversion", cfg.reversion, "daily pull toward the level");
    app.add_option("--noise-scale", cfg.noise_scale, "stable noise scale");
    app.add_option("--noise-alpha", cfg.noise_alpha, "stable tail index");
    app.add_option("--first-date", cfg.first_date, "ISO date of the first row");
    CLI11_PARSE(app, argc, argv);

    mbnf::write_ohlcv_csv(out_path, mbnf::make_synthetic_market(cfg, seed));
    return 0;
}
