#include <catch2/catch_amalgamated.hpp>

#include "mbnf/causality.hpp"
#include "mbnf/synthetic.hpp"
#include "test_support.hpp"

using namespace mbnf;

namespace {

Vec noise_series(int n, Rng& rng) {
    Vec x(n);
    for (double& v : x) v = rng.normal();
    return x;
}

} // namespace

TEST_CASE("self-coupled series vote positive") {
    Rng rng(1);
    const Vec x = noise_series(600, rng);
    const PcStrengths s = pattern_causality(x, x);
    CHECK(s.positive >= 0.9);
    CHECK(s.negative <= 0.02);
}

TEST_CASE("mirrored series vote negative") {
    Rng rng(2);
    const Vec x = noise_series(600, rng);
    Vec y = x;
    for (double& v : y) v = -v;
    const PcStrengths s = pattern_causality(x, y);
    CHECK(s.negative >= 0.9);
    CHECK(s.positive <= 0.02);
}

TEST_CASE("independent noise stays near the null") {
    Rng rng(3);
    for (int mc = 0; mc < 20; ++mc) {
        const Vec x = noise_series(2000, rng);
        const Vec y = noise_series(2000, rng);
        const PcStrengths s = pattern_causality(x, y);
        CHECK(s.positive < 0.45);
        CHECK(s.negative < 0.45);
        CHECK(std::fabs(s.positive - s.negative) < 0.2);
    }
}

TEST_CASE("vote fractions are a distribution") {
    Rng rng(4);
    for (int mc = 0; mc < 10; ++mc) {
        const Vec x = noise_series(400, rng);
        const Vec y = noise_series(400, rng);
        const PcStrengths s = pattern_causality(x, y);
        for (double v : {s.positive, s.negative, s.dark}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(s.positive + s.negative + s.dark == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("invariant under positive affine maps") {
    Rng rng(5);
    const Vec x = noise_series(500, rng);
    const Vec y = noise_series(500, rng);
    const PcStrengths base = pattern_causality(x, y);

    Vec x2 = x, y2 = y;
    for (double& v : x2) v = 3.5 * v + 11.0;
    for (double& v : y2) v = 0.25 * v - 4.0;
    const PcStrengths mapped = pattern_causality(x2, y2);
    CHECK(mapped.positive == base.positive);
    CHECK(mapped.negative == base.negative);
    CHECK(mapped.dark == base.dark);
}

TEST_CASE("determinism and error cases") {
    Rng rng(6);
    const Vec x = noise_series(300, rng);
    const Vec y = noise_series(300, rng);
    const PcStrengths a = pattern_causality(x, y);
    const PcStrengths b = pattern_causality(x, y);
    CHECK(a.positive == b.positive);
    CHECK(a.dark == b.dark);

    CHECK_THROWS_AS(pattern_causality(x, noise_series(299, rng)), std::invalid_argument);
    CHECK_THROWS_AS(pattern_causality(Vec(300, 1.0), y), std::invalid_argument);
    CHECK_THROWS_AS(pattern_causality(Vec{1, 2, 3}, Vec{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("causality matrix over tickers") {
    SyntheticMarketConfig cfg;
    cfg.num_stocks = 3;
    cfg.days = 500;
    const PriceTable prices = make_synthetic_market(cfg, 42);
    const CausalityMatrix m = causality_matrix(prices);

    CHECK(m.positive.rows == 3);
    CHECK(m.positive.cols == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(m.positive(i, j) >= 0.0);
            CHECK(m.positive(i, j) <= 1.0);
            CHECK(m.negative(i, j) >= 0.0);
            CHECK(m.dark(i, j) <= 1.0);
        }
    // self-direction: a ticker predicts itself
    for (int i = 0; i < 3; ++i) CHECK(m.positive(i, i) >= 0.9);

    // directed: each entry is its own computation, never a symmetrized copy
    std::vector<Vec> diffs(3);
    for (int i = 0; i < 3; ++i) {
        Vec close(prices.days());
        for (int t = 0; t < prices.days(); ++t) close[t] = prices.close(t, i);
        diffs[i] = price_diff_series(close);
    }
    const PcStrengths s01 = pattern_causality(diffs[0], diffs[1]);
    const PcStrengths s10 = pattern_causality(diffs[1], diffs[0]);
    CHECK(m.positive(0, 1) == s01.positive);
    CHECK(m.positive(1, 0) == s10.positive);
    CHECK(m.dark(0, 1) == s01.dark);
}

TEST_CASE("two identical tickers vote positive off-diagonal") {
    SyntheticMarketConfig cfg;
    cfg.num_stocks = 1;
    cfg.days = 400;
    const PriceTable one = make_synthetic_market(cfg, 9);
    PriceTable two = one;
    two.tickers = {"A", "B"};
    two.open = Mat(one.days(), 2);
    two.high = Mat(one.days(), 2);
    two.low = Mat(one.days(), 2);
    two.close = Mat(one.days(), 2);
    two.volume = Mat(one.days(), 2);
    for (int t = 0; t < one.days(); ++t)
        for (int i = 0; i < 2; ++i) {
            two.open(t, i) = one.open(t, 0);
            two.high(t, i) = one.high(t, 0);
            two.low(t, i) = one.low(t, 0);
            two.close(t, i) = one.close(t, 0);
            two.volume(t, i) = one.volume(t, 0);
        }
    const CausalityMatrix m = causality_matrix(two);
    CHECK(m.positive(0, 1) >= 0.9);
    CHECK(m.positive(1, 0) >= 0.9);
}

TEST_CASE("threshold graphs") {
    Mat m(2, 2);
    m(0, 0) = 1.0;
    m(0, 1) = 0.5;
    m(1, 0) = 0.7;
    m(1, 1) = 1.0;

    const auto empty = threshold_graph(m, 1.0);
    for (const auto& row : empty)
        for (bool e : row) CHECK_FALSE(e);

    const auto complete = threshold_graph(m, 0.0);
    CHECK(complete[0][1]);
    CHECK(complete[1][0]);
    CHECK_FALSE(complete[0][0]); // diagonal excluded

    // strict inequality at the boundary
    const auto at_half = threshold_graph(m, 0.5);
    CHECK_FALSE(at_half[0][1]);
    CHECK(at_half[1][0]);

    CHECK_THROWS_AS(threshold_graph(m, 1.5), std::invalid_argument);
}
