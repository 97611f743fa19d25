#include <catch2/catch_amalgamated.hpp>

#include "mbnf/trading_env.hpp"
#include "test_support.hpp"

using namespace mbnf;

namespace {

EnvState make_state(double balance, Vec prices, std::vector<long long> holdings) {
    EnvState s;
    s.balance = balance;
    s.prices = std::move(prices);
    s.holdings = std::move(holdings);
    s.indicators.assign(7 * s.prices.size(), 0.0);
    return s;
}

} // namespace

TEST_CASE("buy at unchanged price with zero cost") {
    const EnvState s = make_state(1000.0, {10.0}, {0});
    const StepResult r = env_step(s, {{+5}}, {10.0}, s.indicators, 0.0);
    CHECK(r.next_state.balance == Catch::Approx(950.0));
    CHECK(r.next_state.holdings[0] == 5);
    CHECK(r.reward == Catch::Approx(0.0).margin(1e-12));
    CHECK(r.cost == 0.0);
}

TEST_CASE("buy then price rises") {
    const EnvState s = make_state(1000.0, {10.0}, {0});
    const StepResult r = env_step(s, {{+5}}, {12.0}, s.indicators, 0.0);
    CHECK(asset_value(r.next_state) == Catch::Approx(1010.0));
    CHECK(r.reward == Catch::Approx(10.0));
}

TEST_CASE("sell clamps to holdings and pays cost") {
    // hand-executed ledger: sell 3 of 5 requested at P=10, cost 0.1%
    // proceeds 30, cost 0.03, B' = 1029.97, asset 1030 -> 1029.97
    const EnvState s = make_state(1000.0, {10.0}, {3});
    const StepResult r = env_step(s, {{-5}}, {10.0}, s.indicators, 0.001);
    CHECK(r.executed[0] == -3);
    CHECK(r.cost == Catch::Approx(0.03));
    CHECK(r.next_state.balance == Catch::Approx(1029.97));
    CHECK(r.next_state.holdings[0] == 0);
    CHECK(r.reward == Catch::Approx(-0.03));
}

TEST_CASE("affordability clamp") {
    const EnvState s = make_state(30.0, {10.0}, {0});
    const StepResult r = env_step(s, {{+5}}, {10.0}, s.indicators, 0.0);
    CHECK(r.executed[0] == 3);
    CHECK(r.next_state.holdings[0] == 3);
    CHECK(r.next_state.balance == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("action scaling") {
    CHECK(action_scale({0.0}).shares[0] == 0);
    CHECK(action_scale({1.0}).shares[0] == 100);
    CHECK(action_scale({-0.349}).shares[0] == -34);
    CHECK(action_scale({2.5}).shares[0] == 100);   // clipped
    CHECK(action_scale({-2.5}).shares[0] == -100); // clipped
}

TEST_CASE("reset") {
    PriceTable t;
    t.tickers.assign(10, "T");
    const int n = 5;
    t.close = Mat(n, 10, 20.0);
    t.open = t.high = t.low = t.close;
    t.volume = Mat(n, 10, 1.0);
    for (int i = 0; i < n; ++i) t.dates.push_back(csv::days_to_iso(15000 + i));
    IndicatorTable ind;
    ind.values = Mat(n, 70, 0.5);

    const EnvState s = env_reset(t, ind, 0);
    CHECK(s.balance == 1e6);
    CHECK(observation(s).size() == 1 + 10 + 10 + 70);
    CHECK(observation(s, false).size() == 1 + 10 + 10);

    const EnvState s2 = env_reset(t, ind, 0);
    CHECK(observation(s2) == observation(s));

    CHECK_THROWS_AS(env_reset(t, ind, n - 1), std::out_of_range);
}

TEST_CASE("zero-cost episodes telescope and stay non-negative") {
    Rng rng(99);
    for (int episode = 0; episode < 50; ++episode) {
        const int d = 1 + rng.uniform_int(4);
        Vec prices(d);
        for (double& p : prices) p = rng.uniform(5.0, 50.0);
        EnvState s = make_state(rng.uniform(1e3, 1e5), prices, std::vector<long long>(d, 0));
        const double asset0 = asset_value(s);
        double reward_sum = 0.0;
        for (int step = 0; step < 25; ++step) {
            Action a;
            for (int i = 0; i < d; ++i) a.shares.push_back(rng.uniform_int(201) - 100);
            Vec next = s.prices;
            for (double& p : next) p = std::max(0.01, p * (1.0 + rng.normal(0.0, 0.02)));
            const StepResult r = env_step(s, a, next, s.indicators, 0.0);
            reward_sum += r.reward;
            s = r.next_state;
            REQUIRE(s.balance >= 0.0);
            for (long long w : s.holdings) REQUIRE(w >= 0);
        }
        CHECK(asset_value(s) - asset0 == Catch::Approx(reward_sum).margin(1e-6));
    }
}

TEST_CASE("no-op with unchanged prices is reward-neutral") {
    const EnvState s = make_state(500.0, {10.0, 20.0}, {3, 1});
    const StepResult r = env_step(s, {{0, 0}}, s.prices, s.indicators, 0.005);
    CHECK(r.reward == 0.0);
    CHECK(r.cost == 0.0);
}

TEST_CASE("cost monotonicity") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const EnvState s = make_state(1e4, {rng.uniform(5.0, 50.0)}, {10});
        const int shares = rng.uniform_int(201) - 100;
        const Vec next = {s.prices[0] * (1.0 + rng.normal(0.0, 0.02))};
        double prev_reward = std::numeric_limits<double>::infinity();
        for (double cost : {0.0, 0.001, 0.01, 0.05}) {
            const StepResult r = env_step(s, {{shares}}, next, s.indicators, cost);
            // fixed executed action: the clamp must not change what executes
            if (r.executed[0] == shares || shares < 0) {
                CHECK(r.reward <= prev_reward + 1e-12);
                prev_reward = r.reward;
            }
        }
    }
}
