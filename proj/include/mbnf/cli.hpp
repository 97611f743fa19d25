#pragma once

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "mbnf/analysis.hpp"
#include "mbnf/causality.hpp"
#include "mbnf/mbrl.hpp"
#include "mbnf/metrics.hpp"
#include "mbnf/synthetic.hpp"

namespace mbnf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Configuration problems exit with code 3; runtime failures with 1;
/// unrecognized commands with 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string data_csv;
    std::vector<std::string> tickers;
    std::pair<std::string, std::string> date_range = {"", ""};
    std::string train_end, val_end;
    int h_max = kMaxShares;
    LoopConfig loop;
    std::vector<uint64_t> seeds = {0};
    std::string model = "mbnf";
};

inline json loop_config_to_json(const LoopConfig& c) {
    return json{
        {"schedule",
         {{"total_env_steps", c.schedule.total_env_steps},
          {"model_refit_every", c.schedule.model_refit_every},
          {"model_fit_steps", c.schedule.model_fit_steps},
          {"policy_updates_per_step", c.schedule.policy_updates_per_step},
          {"rollout_horizon", c.schedule.rollout_horizon},
          {"rollout_batch", c.schedule.rollout_batch}}},
        {"buffer_capacity", c.buffer_capacity},
        {"warmup_random_steps", c.warmup_random_steps},
        {"cost_percentage", c.cost_percentage},
        {"b0", c.b0},
        {"use_indicators", c.use_indicators},
        {"sac",
         {{"gamma", c.sac.gamma},
          {"tau", c.sac.tau},
          {"alpha", c.sac.alpha},
          {"hidden", c.sac.hidden},
          {"hidden_layers", c.sac.hidden_layers},
          {"reward_scale", c.sac.reward_scale},
          {"lr", c.sac_lr},
          {"batch", c.sac_batch}}},
        {"flow",
         {{"num_layers", c.nf.flow.num_layers},
          {"hidden", c.nf.flow.hidden},
          {"hidden_layers", c.nf.flow.hidden_layers},
          {"s_clamp", c.nf.flow.s_clamp},
          {"lr", c.nf.lr},
          {"batch", c.nf.batch}}},
        {"ensemble",
         {{"members", c.ens.members},
          {"hidden", c.ens.hidden},
          {"hidden_layers", c.ens.hidden_layers},
          {"lr", c.ens.lr},
          {"batch", c.ens.batch}}}};
}

inline RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    try {
        cfg.data_csv = j.at("data_csv").get<std::string>();
        cfg.tickers = j.at("tickers").get<std::vector<std::string>>();
        cfg.train_end = j.at("train_end").get<std::string>();
        cfg.val_end = j.at("val_end").get<std::string>();
        if (j.contains("date_range")) {
            cfg.date_range.first = j["date_range"][0].get<std::string>();
            cfg.date_range.second = j["date_range"][1].get<std::string>();
        }
        if (j.contains("h_max")) cfg.h_max = j["h_max"].get<int>();
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
        if (j.contains("model")) cfg.model = j["model"].get<std::string>();

        LoopConfig& c = cfg.loop;
        if (j.contains("schedule")) {
            const json& s = j["schedule"];
            c.schedule.total_env_steps = s.value("total_env_steps", c.schedule.total_env_steps);
            c.schedule.model_refit_every = s.value("model_refit_every", c.schedule.model_refit_every);
            c.schedule.model_fit_steps = s.value("model_fit_steps", c.schedule.model_fit_steps);
            c.schedule.policy_updates_per_step =
                s.value("policy_updates_per_step", c.schedule.policy_updates_per_step);
            c.schedule.rollout_horizon = s.value("rollout_horizon", c.schedule.rollout_horizon);
            c.schedule.rollout_batch = s.value("rollout_batch", c.schedule.rollout_batch);
        }
        c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
        c.warmup_random_steps = j.value("warmup_random_steps", c.warmup_random_steps);
        c.cost_percentage = j.value("cost_percentage", c.cost_percentage);
        c.b0 = j.value("b0", c.b0);
        c.use_indicators = j.value("use_indicators", c.use_indicators);
        if (j.contains("sac")) {
            const json& s = j["sac"];
            c.sac.gamma = s.value("gamma", c.sac.gamma);
            c.sac.tau = s.value("tau", c.sac.tau);
            c.sac.alpha = s.value("alpha", c.sac.alpha);
            c.sac.hidden = s.value("hidden", c.sac.hidden);
            c.sac.hidden_layers = s.value("hidden_layers", c.sac.hidden_layers);
            c.sac.reward_scale = s.value("reward_scale", c.sac.reward_scale);
            c.sac_lr = s.value("lr", c.sac_lr);
            c.sac_batch = s.value("batch", c.sac_batch);
        }
        if (j.contains("flow")) {
            const json& s = j["flow"];
            c.nf.flow.num_layers = s.value("num_layers", c.nf.flow.num_layers);
            c.nf.flow.hidden = s.value("hidden", c.nf.flow.hidden);
            c.nf.flow.hidden_layers = s.value("hidden_layers", c.nf.flow.hidden_layers);
            c.nf.flow.s_clamp = s.value("s_clamp", c.nf.flow.s_clamp);
            c.nf.lr = s.value("lr", c.nf.lr);
            c.nf.batch = s.value("batch", c.nf.batch);
        }
        if (j.contains("ensemble")) {
            const json& s = j["ensemble"];
            c.ens.members = s.value("members", c.ens.members);
            c.ens.hidden = s.value("hidden", c.ens.hidden);
            c.ens.hidden_layers = s.value("hidden_layers", c.ens.hidden_layers);
            c.ens.lr = s.value("lr", c.ens.lr);
            c.ens.batch = s.value("batch", c.ens.batch);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    if (cfg.model != "mbnf" && cfg.model != "mbpo")
        throw ConfigError("model must be mbnf or mbpo");
    if (cfg.h_max != kMaxShares)
        throw ConfigError("h_max is fixed at " + std::to_string(kMaxShares));
    if (cfg.tickers.empty()) throw ConfigError("tickers must be non-empty");
    try {
        cfg.loop.schedule.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

inline std::string opt_num(const std::optional<double>& v) { return v ? csv::num(*v) : ""; }

inline std::string nan_num(double v) { return std::isnan(v) ? "" : csv::num(v); }

inline void write_metrics_json(const MetricsReport& rep, const std::string& path) {
    auto field = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
    };
    const json j = {{"annualized_return", field(rep.annualized_return)},
                    {"cumulative_return", field(rep.cumulative_return)},
                    {"annualized_volatility", field(rep.annualized_volatility)},
                    {"sharpe_ratio", field(rep.sharpe)},
                    {"calmar_ratio", field(rep.calmar)},
                    {"stability", field(rep.stability)},
                    {"max_drawdown", field(rep.max_drawdown)}};
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

inline const std::vector<std::string> kMetricColumns = {
    "annualized_return", "cumulative_return", "annualized_volatility", "sharpe_ratio",
    "calmar_ratio",      "stability",         "max_drawdown"};

inline std::vector<std::string> metric_fields(const MetricsReport& rep) {
    return {opt_num(rep.annualized_return), opt_num(rep.cumulative_return),
            opt_num(rep.annualized_volatility), opt_num(rep.sharpe),
            opt_num(rep.calmar), opt_num(rep.stability), opt_num(rep.max_drawdown)};
}

inline EquityCurve load_equity_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    const int c_asset = t.col("asset");
    if (c_asset < 0) throw std::runtime_error("equity CSV needs an `asset` column: " + path);
    EquityCurve curve;
    for (const auto& row : t.rows) curve.assets.push_back(csv::to_double(row[c_asset]));
    return curve;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int run_indicators(const std::string& data_csv, const std::vector<std::string>& tickers,
                          const std::string& out_path) {
    const PriceTable prices = load_ohlcv(data_csv, tickers);
    write_indicator_csv(out_path, prices, compute_indicators(prices));
    return 0;
}

inline int run_fit_stable(const std::string& data_csv, const std::vector<std::string>& tickers,
                          const std::string& out_path, const std::string& hist_path, int bins) {
    const PriceTable prices = load_ohlcv(data_csv, tickers);
    csv::Writer w(out_path);
    w.row({"ticker", "alpha", "beta", "mu", "sigma"});
    std::optional<csv::Writer> hist;
    if (!hist_path.empty()) {
        hist.emplace(hist_path);
        hist->row({"ticker", "bin_left", "bin_right", "count"});
    }
    for (int i = 0; i < prices.num_stocks(); ++i) {
        Vec close(prices.days());
        for (int t = 0; t < prices.days(); ++t) close[t] = prices.close(t, i);
        const Vec deltas = price_diff_series(close);
        const StableParams p = fit_stable(deltas);
        w.row({prices.tickers[i], csv::num(p.alpha), csv::num(p.beta), csv::num(p.mu),
               csv::num(p.sigma)});
        if (hist) {
            const auto [lo_it, hi_it] = std::minmax_element(deltas.begin(), deltas.end());
            const double lo = *lo_it, hi = *hi_it;
            const double width = (hi - lo) / bins;
            std::vector<long long> counts(bins, 0);
            for (double v : deltas) {
                int b = width > 0 ? static_cast<int>((v - lo) / width) : 0;
                b = std::clamp(b, 0, bins - 1);
                ++counts[b];
            }
            for (int b = 0; b < bins; ++b)
                hist->row({prices.tickers[i], csv::num(lo + b * width), csv::num(lo + (b + 1) * width),
                           std::to_string(counts[b])});
        }
    }
    return 0;
}

inline void write_equity_csv(const std::string& path, const PriceTable& prices, int begin,
                             const Vec& equity) {
    csv::Writer w(path);
    w.row({"date", "asset"});
    for (size_t i = 0; i < equity.size(); ++i)
        w.row({prices.dates[begin + static_cast<int>(i)], csv::num(equity[i])});
}

inline int run_train(const std::string& config_path, const std::string& model_override,
                     int64_t seed_override, const std::string& out_dir, bool no_indicators) {
    RunConfig cfg = load_run_config(config_path);
    if (!model_override.empty()) cfg.model = model_override;
    if (cfg.model != "mbnf" && cfg.model != "mbpo") throw ConfigError("model must be mbnf or mbpo");
    if (no_indicators) cfg.loop.use_indicators = false;
    const uint64_t seed = seed_override >= 0 ? static_cast<uint64_t>(seed_override) : cfg.seeds.at(0);

    const PriceTable prices = load_ohlcv(cfg.data_csv, cfg.tickers, cfg.date_range);
    const IndicatorTable indicators = compute_indicators(prices);
    DatasetSplit split;
    try {
        split = split_dataset(prices, cfg.train_end, cfg.val_end);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    fs::create_directories(out_dir);
    const RunResult res = cfg.model == "mbnf"
                              ? run_mbnf(prices, indicators, split, cfg.loop, seed)
                              : run_mbpo(prices, indicators, split, cfg.loop, seed);

    // config echo: everything needed to reproduce and reload the run
    json echo = loop_config_to_json(cfg.loop);
    echo["data_csv"] = cfg.data_csv;
    echo["tickers"] = cfg.tickers;
    echo["date_range"] = {cfg.date_range.first, cfg.date_range.second};
    echo["train_end"] = cfg.train_end;
    echo["val_end"] = cfg.val_end;
    echo["h_max"] = cfg.h_max;
    echo["model"] = cfg.model;
    echo["seed"] = seed;
    echo["refits"] = res.refits;
    {
        std::ofstream out(fs::path(out_dir) / "config.json");
        out << echo.dump(2) << '\n';
    }

    {
        csv::Writer w((fs::path(out_dir) / "train_log.csv").string());
        w.row({"step", "R_t", "critic_loss", "actor_loss", "entropy_estimate", "model_loss"});
        for (const TrainLogRow& row : res.log)
            w.row({std::to_string(row.step), csv::num(row.cum_reward), nan_num(row.critic_loss),
                   nan_num(row.actor_loss), nan_num(row.entropy_estimate), nan_num(row.model_loss)});
    }

    const ObsNormalizer norm =
        make_obs_normalizer(prices, indicators, split, cfg.loop.b0, cfg.loop.use_indicators);
    const auto eval_and_write = [&](int begin, int end, const std::string& name) {
        const EvalResult ev =
            evaluate_agent(res.agent, norm, prices, indicators, begin, end, cfg.loop.cost_percentage,
                           cfg.loop.b0, cfg.loop.use_indicators);
        write_equity_csv((fs::path(out_dir) / ("equity_" + name + ".csv")).string(), prices, begin,
                         ev.equity);
    };
    eval_and_write(split.train_begin, split.train_end, "train");
    eval_and_write(split.train_end, split.val_end, "val");
    eval_and_write(split.val_end, split.test_end, "test");

    export_buffer_rewards(res.env_buffer, res.model_buffer,
                          (fs::path(out_dir) / "buffer_export.csv").string());

    save_sac_checkpoint((fs::path(out_dir) / "agent").string(), res.agent);
    for (size_t i = 0; i < res.critic_snapshots.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "refit_%04zu_critic", i);
        save_mlp_checkpoint((fs::path(out_dir) / name).string(), res.agent.q_spec,
                            res.critic_snapshots[i]);
    }
    for (size_t i = 0; i < res.flow_snapshots.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "refit_%04zu_flow", i);
        save_flow_checkpoint((fs::path(out_dir) / name).string(), res.flow_snapshots[i]);
    }
    if (!res.flow_snapshots.empty())
        save_flow_checkpoint((fs::path(out_dir) / "flow_final").string(),
                             res.flow_snapshots.back());
    return 0;
}

inline int run_backtest(const std::string& equity_path, const std::string& out_json,
                        const std::string& out_csv) {
    const MetricsReport rep = compute_metrics(load_equity_csv(equity_path));
    if (!out_json.empty()) write_metrics_json(rep, out_json);
    if (!out_csv.empty()) {
        csv::Writer w(out_csv);
        w.row(kMetricColumns);
        w.row(metric_fields(rep));
    }
    return 0;
}

inline int run_causality(const std::string& data_csv, const std::vector<std::string>& tickers,
                         const std::string& out_dir) {
    const PriceTable prices = load_ohlcv(data_csv, tickers);
    const CausalityMatrix m = causality_matrix(prices);
    fs::create_directories(out_dir);

    const auto write_matrix = [&](const Mat& mat, const std::string& name) {
        csv::Writer w((fs::path(out_dir) / name).string());
        std::vector<std::string> header = {"ticker"};
        header.insert(header.end(), m.tickers.begin(), m.tickers.end());
        w.row(header);
        for (int i = 0; i < mat.rows; ++i) {
            std::vector<std::string> row = {m.tickers[i]};
            for (int j = 0; j < mat.cols; ++j) row.push_back(csv::num(mat(i, j)));
            w.row(row);
        }
    };
    write_matrix(m.positive, "positive.csv");
    write_matrix(m.negative, "negative.csv");
    write_matrix(m.dark, "dark.csv");

    for (int theta_pct : {30, 50, 70}) {
        csv::Writer w((fs::path(out_dir) / ("edges_theta" + std::to_string(theta_pct) + ".csv"))
                          .string());
        w.row({"from", "to", "kind", "strength"});
        const double theta = theta_pct / 100.0;
        const auto pos_adj = threshold_graph(m.positive, theta);
        const auto neg_adj = threshold_graph(m.negative, theta);
        for (int i = 0; i < m.positive.rows; ++i)
            for (int j = 0; j < m.positive.cols; ++j) {
                if (pos_adj[i][j])
                    w.row({m.tickers[i], m.tickers[j], "positive", csv::num(m.positive(i, j))});
                if (neg_adj[i][j])
                    w.row({m.tickers[i], m.tickers[j], "negative", csv::num(m.negative(i, j))});
            }
    }
    return 0;
}

inline int run_sharpness(const std::string& run_dir, const std::string& target,
                         const std::string& out_path) {
    std::ifstream cfg_in(fs::path(run_dir) / "config.json");
    if (!cfg_in) throw std::runtime_error("missing config.json in " + run_dir);
    json cfg;
    cfg_in >> cfg;
    const int refits = cfg.at("refits").get<int>();
    if (target != "critic" && target != "flow") throw ConfigError("target must be critic or flow");
    if (target == "flow" && cfg.at("model") != "mbnf")
        throw ConfigError("flow sharpness requires an mbnf run");

    csv::Writer w(out_path);
    w.row({"episode", "lambda_max", "iterations", "residual"});

    if (target == "flow") {
        const PriceTable prices =
            load_ohlcv(cfg.at("data_csv"), cfg.at("tickers").get<std::vector<std::string>>());
        const DatasetSplit split =
            split_dataset(prices, cfg.at("train_end"), cfg.at("val_end"));
        Mat rows(split.train_size(), prices.num_stocks());
        for (int t = split.train_begin; t < split.train_end; ++t)
            for (int j = 0; j < prices.num_stocks(); ++j)
                rows(t - split.train_begin, j) = prices.close(t, j);
        Mat deltas = first_differences(rows);
        if (deltas.rows > 512) {
            Mat head(512, deltas.cols);
            std::copy(deltas.data.begin(), deltas.data.begin() + 512 * deltas.cols,
                      head.data.begin());
            deltas = std::move(head);
        }
        for (int i = 0; i < refits; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "refit_%04d_flow", i);
            FlowModel flow = load_flow_checkpoint((fs::path(run_dir) / name).string());
            auto grad_fn = [&flow, &deltas](const Vec& p) {
                FlowModel probe = flow;
                flow_set_params(probe, p);
                Vec g;
                flow_nll_grad(probe, deltas, g);
                return g;
            };
            const SharpnessResult res = sharpness(grad_fn, flow_get_params(flow), 1e-4, 400);
            w.row({std::to_string(i), csv::num(res.lambda_max), std::to_string(res.iterations),
                   csv::num(res.residual)});
        }
        return 0;
    }

    // critic target: MSE of Q(s, a) against the recorded one-step rewards
    const double reward_scale = cfg.at("sac").at("reward_scale").get<double>();
    for (int i = 0; i < refits; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "refit_%04d_critic", i);
        const auto [spec, params] = load_mlp_checkpoint((fs::path(run_dir) / name).string());
        const int in_dim = spec.input_dim();
        // obs dim and act dim follow from the run geometry
        const int d = static_cast<int>(cfg.at("tickers").size());
        const int obs_dim = in_dim - d;
        const auto transitions =
            load_buffer_csv((fs::path(run_dir) / "buffer_export.csv").string(), obs_dim, d);
        const size_t use = std::min<size_t>(transitions.size(), 512);

        auto grad_fn = [&](const Vec& p) {
            Vec grad(spec.param_count(), 0.0);
            MlpCache cache;
            Vec input_grad, input;
            for (size_t k = 0; k < use; ++k) {
                const TransitionSample& tr = transitions[k];
                input.clear();
                input.insert(input.end(), tr.s.begin(), tr.s.end());
                input.insert(input.end(), tr.a.begin(), tr.a.end());
                const double q = mlp_forward(spec, p, input, cache)[0];
                const Vec up = {2.0 * (q - tr.r * reward_scale) / static_cast<double>(use)};
                mlp_backward(spec, p, cache, up, grad.data(), input_grad);
            }
            return grad;
        };
        const SharpnessResult res = sharpness(grad_fn, params, 1e-4, 400);
        w.row({std::to_string(i), csv::num(res.lambda_max), std::to_string(res.iterations),
               csv::num(res.residual)});
    }
    return 0;
}

inline int run_export_buffer(const std::string& run_dir, const std::string& out_path) {
    std::ifstream cfg_in(fs::path(run_dir) / "config.json");
    if (!cfg_in) throw std::runtime_error("missing config.json in " + run_dir);
    json cfg;
    cfg_in >> cfg;
    const int d = static_cast<int>(cfg.at("tickers").size());
    const bool use_ind = cfg.at("use_indicators").get<bool>();
    const int obs_dim = 1 + 2 * d + (use_ind ? 7 * d : 0);
    const auto transitions =
        load_buffer_csv((fs::path(run_dir) / "buffer_export.csv").string(), obs_dim, d);

    ReplayBuffer env(std::max<size_t>(transitions.size(), 1), BufferKind::Env);
    ReplayBuffer model(std::max<size_t>(transitions.size(), 1), BufferKind::Model);
    for (const auto& tr : transitions) (tr.model_generated ? model : env).push(tr);
    export_buffer(env, model, out_path);
    return 0;
}

inline int run_report(const std::vector<std::string>& run_dirs, const std::string& out_path) {
    struct Key {
        std::string model;
        bool indicators;
        bool operator<(const Key& o) const {
            return std::tie(model, indicators) < std::tie(o.model, o.indicators);
        }
    };
    std::map<Key, std::vector<MetricsReport>> groups;
    for (const std::string& dir : run_dirs) {
        std::ifstream cfg_in(fs::path(dir) / "config.json");
        if (!cfg_in) throw std::runtime_error("missing config.json in " + dir);
        json cfg;
        cfg_in >> cfg;
        const MetricsReport rep =
            compute_metrics(load_equity_csv((fs::path(dir) / "equity_test.csv").string()));
        groups[{cfg.at("model").get<std::string>(), cfg.at("use_indicators").get<bool>()}]
            .push_back(rep);
    }

    csv::Writer w(out_path);
    std::vector<std::string> header = {"model", "indicators", "stat", "seeds"};
    header.insert(header.end(), kMetricColumns.begin(), kMetricColumns.end());
    w.row(header);

    for (const auto& [key, reports] : groups) {
        auto collect = [&reports](const std::function<std::optional<double>(const MetricsReport&)>& get) {
            Vec defined;
            for (const MetricsReport& r : reports)
                if (const auto v = get(r)) defined.push_back(*v);
            return defined;
        };
        const std::vector<std::function<std::optional<double>(const MetricsReport&)>> getters = {
            [](const MetricsReport& r) { return r.annualized_return; },
            [](const MetricsReport& r) { return r.cumulative_return; },
            [](const MetricsReport& r) { return r.annualized_volatility; },
            [](const MetricsReport& r) { return r.sharpe; },
            [](const MetricsReport& r) { return r.calmar; },
            [](const MetricsReport& r) { return r.stability; },
            [](const MetricsReport& r) { return r.max_drawdown; }};

        for (const std::string& stat : {"mean", "min", "max"}) {
            std::vector<std::string> row = {key.model, key.indicators ? "with" : "without", stat,
                                            std::to_string(reports.size())};
            for (const auto& get : getters) {
                const Vec vals = collect(get);
                if (vals.empty()) {
                    row.emplace_back();
                    continue;
                }
                double v;
                if (stat == "mean") v = mean_of(vals);
                else if (stat == "min") v = *std::min_element(vals.begin(), vals.end());
                else v = *std::max_element(vals.begin(), vals.end());
                row.push_back(csv::num(v));
            }
            w.row(row);
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"mbnf: model-based RL portfolio research engine"};
    app.require_subcommand(1);

    std::string data_csv, out_path, out_dir, hist_path, config_path, model, run_dir, target;
    std::string equity_path, out_json, out_csv;
    std::vector<std::string> tickers, run_dirs;
    int bins = 50;
    int64_t seed = -1;
    bool no_indicators = false;

    CLI::App* c_ind = app.add_subcommand("indicators", "compute the 7 technical indicators");
    c_ind->add_option("--data", data_csv, "OHLCV csv")->required();
    c_ind->add_option("--tickers", tickers, "tickers")->required()->delimiter(',');
    c_ind->add_option("--out", out_path, "output csv")->required();

    CLI::App* c_fit = app.add_subcommand("fit-stable", "fit alpha-stable laws to price deltas");
    c_fit->add_option("--data", data_csv, "OHLCV csv")->required();
    c_fit->add_option("--tickers", tickers, "tickers")->required()->delimiter(',');
    c_fit->add_option("--out", out_path, "parameter table csv")->required();
    c_fit->add_option("--hist-out", hist_path, "histogram bins csv");
    c_fit->add_option("--bins", bins, "histogram bin count");

    CLI::App* c_train = app.add_subcommand("train", "run an MBRL training loop");
    c_train->add_option("--config", config_path, "run config json")->required();
    c_train->add_option("--model", model, "mbnf | mbpo");
    c_train->add_option("--seed", seed, "seed override");
    c_train->add_option("--out", out_dir, "run directory")->required();
    c_train->add_flag("--no-indicators", no_indicators, "drop the indicator block");

    CLI::App* c_back = app.add_subcommand("backtest", "metrics of an equity curve");
    c_back->add_option("--equity", equity_path, "equity csv (date,asset)")->required();
    c_back->add_option("--out-json", out_json, "report json");
    c_back->add_option("--out-csv", out_csv, "one-row report csv");

    CLI::App* c_caus = app.add_subcommand("causality", "pattern-causality matrices and graphs");
    c_caus->add_option("--data", data_csv, "OHLCV csv")->required();
    c_caus->add_option("--tickers", tickers, "tickers")->required()->delimiter(',');
    c_caus->add_option("--out-dir", out_dir, "output directory")->required();

    CLI::App* c_sharp = app.add_subcommand("sharpness", "largest Hessian eigenvalue per refit");
    c_sharp->add_option("--checkpoint", run_dir, "run directory")->required();
    c_sharp->add_option("--target", target, "critic | flow")->required();
    c_sharp->add_option("--out", out_path, "output csv")->required();

    CLI::App* c_exp = app.add_subcommand("export-buffer", "export buffers for embedding tools");
    c_exp->add_option("--run", run_dir, "run directory")->required();
    c_exp->add_option("--out", out_path, "output csv")->required();

    CLI::App* c_rep = app.add_subcommand("report", "aggregate seed runs into a comparison table");
    c_rep->add_option("--runs", run_dirs, "run directories")->required();
    c_rep->add_option("--out", out_path, "output csv")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        const int code = app.exit(e, msg, msg);
        std::cerr << msg.str();
        if (code == 0) return 0; // --help
        // unrecognized subcommand or bad usage
        return 2;
    }

    try {
        if (c_ind->parsed()) return run_indicators(data_csv, tickers, out_path);
        if (c_fit->parsed()) return run_fit_stable(data_csv, tickers, out_path, hist_path, bins);
        if (c_train->parsed()) return run_train(config_path, model, seed, out_dir, no_indicators);
        if (c_back->parsed()) return run_backtest(equity_path, out_json, out_csv);
        if (c_caus->parsed()) return run_causality(data_csv, tickers, out_dir);
        if (c_sharp->parsed()) return run_sharpness(run_dir, target, out_path);
        if (c_exp->parsed()) return run_export_buffer(run_dir, out_path);
        if (c_rep->parsed()) return run_report(run_dirs, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

inline int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}

} // namespace mbnf::cli
