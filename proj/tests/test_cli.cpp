#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mbnf/cli.hpp"
#include "test_support.hpp"

using namespace mbnf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
};

std::string make_market_csv(const fs::path& dir, int stocks = 2, int days = 140,
                            uint64_t seed = 3) {
    SyntheticMarketConfig mc;
    mc.num_stocks = stocks;
    mc.days = days;
    const std::string path = (dir / "prices.csv").string();
    write_ohlcv_csv(path, make_synthetic_market(mc, seed));
    return path;
}

std::string tiny_train_config(const fs::path& dir, const std::string& data_csv,
                              const std::vector<std::string>& tickers) {
    nlohmann::json tick = tickers;
    nlohmann::json j = {
        {"data_csv", data_csv},
        {"tickers", tick},
        {"train_end", "2015-03-30"},
        {"val_end", "2015-04-20"},
        {"schedule",
         {{"total_env_steps", 12},
          {"model_refit_every", 6},
          {"model_fit_steps", 4},
          {"policy_updates_per_step", 1},
          {"rollout_horizon", 1},
          {"rollout_batch", 4}}},
        {"warmup_random_steps", 0},
        {"sac", {{"hidden", 8}, {"hidden_layers", 1}, {"batch", 4}}},
        {"flow", {{"num_layers", 2}, {"hidden", 4}, {"batch", 4}}},
        {"ensemble", {{"members", 2}, {"hidden", 4}, {"batch", 4}}},
    };
    const std::string path = (dir / "config.json").string();
    std::ofstream out(path);
    out << j.dump(2);
    return path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("unknown subcommand exits 2") {
    CHECK(cli::dispatch({"frobnicate"}) == 2);
    CHECK(cli::dispatch({}) == 2);
}

TEST_CASE("config validation failures exit 3") {
    TempDir tmp("cli_cfg");
    const std::string data = make_market_csv(tmp.path);
    const std::string cfg = tiny_train_config(tmp.path, data, {"SYN1", "SYN2"});

    // invalid model name
    CHECK(cli::dispatch({"train", "--config", cfg, "--model", "gan", "--out",
                         (tmp.path / "run").string()}) == 3);

    // malformed json
    const std::string bad = (tmp.path / "bad.json").string();
    std::ofstream(bad) << "{ not json";
    CHECK(cli::dispatch({"train", "--config", bad, "--out", (tmp.path / "run").string()}) == 3);
}

TEST_CASE("indicators and fit-stable produce the documented tables") {
    TempDir tmp("cli_ind");
    const std::string data = make_market_csv(tmp.path, 2, 400);
    const std::string ind = (tmp.path / "indicators.csv").string();
    REQUIRE(cli::dispatch({"indicators", "--data", data, "--tickers", "SYN1,SYN2", "--out", ind}) ==
            0);
    const csv::Table t = csv::read(ind);
    CHECK(t.header == std::vector<std::string>{"date", "ticker", "macd", "sma30", "sma60", "boll",
                                               "rsi", "cci", "adx"});
    CHECK(t.rows.size() == 2 * 400);

    const std::string params = (tmp.path / "stable.csv").string();
    const std::string hist = (tmp.path / "hist.csv").string();
    REQUIRE(cli::dispatch({"fit-stable", "--data", data, "--tickers", "SYN1,SYN2", "--out", params,
                           "--hist-out", hist, "--bins", "30"}) == 0);
    const csv::Table pt = csv::read(params);
    CHECK(pt.header == std::vector<std::string>{"ticker", "alpha", "beta", "mu", "sigma"});
    REQUIRE(pt.rows.size() == 2);
    for (const auto& row : pt.rows) {
        const double alpha = csv::to_double(row[1]);
        CHECK(alpha > 0.5);
        CHECK(alpha <= 2.0);
    }
    CHECK(csv::read(hist).rows.size() == 2 * 30);
}

TEST_CASE("train writes a self-describing run directory, deterministically") {
    TempDir tmp("cli_train");
    const std::string data = make_market_csv(tmp.path);
    const std::string cfg = tiny_train_config(tmp.path, data, {"SYN1", "SYN2"});

    const std::string run_a = (tmp.path / "run_a").string();
    const std::string run_b = (tmp.path / "run_b").string();
    REQUIRE(cli::dispatch({"train", "--config", cfg, "--model", "mbnf", "--seed", "7", "--out",
                           run_a}) == 0);
    REQUIRE(cli::dispatch({"train", "--config", cfg, "--model", "mbnf", "--seed", "7", "--out",
                           run_b}) == 0);

    for (const char* name : {"config.json", "train_log.csv", "equity_train.csv", "equity_val.csv",
                             "equity_test.csv", "buffer_export.csv"}) {
        INFO(name);
        REQUIRE(fs::exists(fs::path(run_a) / name));
        CHECK(slurp(fs::path(run_a) / name) == slurp(fs::path(run_b) / name));
    }
    CHECK(fs::exists(fs::path(run_a) / "agent_policy.bin"));
    CHECK(fs::exists(fs::path(run_a) / "refit_0000_flow.bin"));
    CHECK(fs::exists(fs::path(run_a) / "refit_0001_critic.bin"));

    // different seed diverges
    const std::string run_c = (tmp.path / "run_c").string();
    REQUIRE(cli::dispatch({"train", "--config", cfg, "--model", "mbnf", "--seed", "8", "--out",
                           run_c}) == 0);
    CHECK(slurp(fs::path(run_a) / "train_log.csv") != slurp(fs::path(run_c) / "train_log.csv"));

    SECTION("sharpness over the run checkpoints") {
        const std::string sharp = (tmp.path / "sharp.csv").string();
        REQUIRE(cli::dispatch({"sharpness", "--checkpoint", run_a, "--target", "critic", "--out",
                               sharp}) == 0);
        const csv::Table t = csv::read(sharp);
        CHECK(t.rows.size() == 2); // one row per refit event
        REQUIRE(cli::dispatch({"sharpness", "--checkpoint", run_a, "--target", "flow", "--out",
                               sharp}) == 0);
        CHECK(csv::read(sharp).rows.size() == 2);

        // flow sharpness of an mbpo run is a config error
        const std::string run_gp = (tmp.path / "run_gp").string();
        REQUIRE(cli::dispatch({"train", "--config", cfg, "--model", "mbpo", "--seed", "7", "--out",
                               run_gp}) == 0);
        CHECK(cli::dispatch({"sharpness", "--checkpoint", run_gp, "--target", "flow", "--out",
                             sharp}) == 3);
    }

    SECTION("export-buffer emits the delta table") {
        const std::string exported = (tmp.path / "export.csv").string();
        REQUIRE(cli::dispatch({"export-buffer", "--run", run_a, "--out", exported}) == 0);
        const csv::Table t = csv::read(exported);
        CHECK(t.rows.size() == 12 + 2 * 4); // env steps + refits x rollout batch
        const int obs_dim = 1 + 2 * 2 + 7 * 2;
        CHECK(t.header.size() == 1 + 3 * obs_dim + 2);
    }

    SECTION("backtest on a run equity file") {
        const std::string rep_json = (tmp.path / "report.json").string();
        const std::string rep_csv = (tmp.path / "report.csv").string();
        REQUIRE(cli::dispatch({"backtest", "--equity", (fs::path(run_a) / "equity_test.csv").string(),
                               "--out-json", rep_json, "--out-csv", rep_csv}) == 0);
        const csv::Table t = csv::read(rep_csv);
        REQUIRE(t.rows.size() == 1);
        CHECK(t.header == cli::kMetricColumns);
        nlohmann::json j;
        std::ifstream(rep_json) >> j;
        CHECK(j.contains("sharpe_ratio"));
    }
}

TEST_CASE("backtest reports undefined sharpe for a flat curve") {
    TempDir tmp("cli_flat");
    const std::string eq = (tmp.path / "flat.csv").string();
    {
        csv::Writer w(eq);
        w.row({"date", "asset"});
        for (int i = 0; i < 30; ++i) w.row({csv::days_to_iso(16000 + i), "1000000"});
    }
    const std::string rep_csv = (tmp.path / "rep.csv").string();
    REQUIRE(cli::dispatch({"backtest", "--equity", eq, "--out-csv", rep_csv}) == 0);
    const csv::Table t = csv::read(rep_csv);
    const int sharpe_col = t.col("sharpe_ratio");
    CHECK(t.rows[0][sharpe_col].empty());
    CHECK(t.rows[0][t.col("cumulative_return")] == "0");
}

TEST_CASE("causality artifacts") {
    TempDir tmp("cli_caus");
    const std::string data = make_market_csv(tmp.path, 3, 300, 11);
    const std::string out_dir = (tmp.path / "caus").string();
    REQUIRE(cli::dispatch({"causality", "--data", data, "--tickers", "SYN1,SYN2,SYN3", "--out-dir",
                           out_dir}) == 0);
    for (const char* name : {"positive.csv", "negative.csv", "dark.csv", "edges_theta30.csv",
                             "edges_theta50.csv", "edges_theta70.csv"})
        CHECK(fs::exists(fs::path(out_dir) / name));
    const csv::Table pos = csv::read((fs::path(out_dir) / "positive.csv").string());
    REQUIRE(pos.rows.size() == 3);
    CHECK(pos.header.size() == 4);
    // edge lists honor the strict threshold
    const csv::Table edges = csv::read((fs::path(out_dir) / "edges_theta70.csv").string());
    for (const auto& row : edges.rows) CHECK(csv::to_double(row[3]) > 0.7);
}

TEST_CASE("report aggregates runs into paired rows") {
    TempDir tmp("cli_report");
    const std::string data = make_market_csv(tmp.path);
    const std::string cfg = tiny_train_config(tmp.path, data, {"SYN1", "SYN2"});

    std::vector<std::string> dirs;
    for (int seed : {1, 2}) {
        const std::string dir = (tmp.path / ("run_s" + std::to_string(seed))).string();
        REQUIRE(cli::dispatch({"train", "--config", cfg, "--seed", std::to_string(seed), "--out",
                               dir}) == 0);
        dirs.push_back(dir);
    }
    const std::string abl = (tmp.path / "run_noind").string();
    REQUIRE(cli::dispatch({"train", "--config", cfg, "--seed", "1", "--no-indicators", "--out",
                           abl}) == 0);
    dirs.push_back(abl);

    const std::string rep = (tmp.path / "comparison.csv").string();
    std::vector<std::string> args = {"report", "--out", rep, "--runs"};
    args.insert(args.end(), dirs.begin(), dirs.end());
    REQUIRE(cli::dispatch(args) == 0);

    const csv::Table t = csv::read(rep);
    REQUIRE(t.rows.size() == 6); // (with, without) x (mean, min, max)
    int with_rows = 0, without_rows = 0;
    for (const auto& row : t.rows) {
        if (row[1] == "with") ++with_rows;
        if (row[1] == "without") ++without_rows;
    }
    CHECK(with_rows == 3);
    CHECK(without_rows == 3);

    // the mean cumulative return equals an independent average of the runs
    Vec cum;
    for (int i = 0; i < 2; ++i) {
        const csv::Table eq = csv::read((fs::path(dirs[i]) / "equity_test.csv").string());
        const double first = csv::to_double(eq.rows.front()[1]);
        const double last = csv::to_double(eq.rows.back()[1]);
        cum.push_back(last / first - 1.0);
    }
    const int cum_col = t.col("cumulative_return");
    for (const auto& row : t.rows)
        if (row[1] == "with" && row[2] == "mean")
            CHECK(csv::to_double(row[cum_col]) ==
                  Catch::Approx((cum[0] + cum[1]) / 2.0).margin(1e-12));

    // idempotent: re-running report reproduces the file
    const std::string before = slurp(rep);
    REQUIRE(cli::dispatch(args) == 0);
    CHECK(slurp(rep) == before);
}
