#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mbnf/market_data.hpp"
#include "test_support.hpp"

using namespace mbnf;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    return path.string();
}

PriceTable flat_table(const Vec& close, const std::string& ticker = "X") {
    PriceTable t;
    t.tickers = {ticker};
    const int n = static_cast<int>(close.size());
    t.open = Mat(n, 1);
    t.high = Mat(n, 1);
    t.low = Mat(n, 1);
    t.close = Mat(n, 1);
    t.volume = Mat(n, 1, 1000.0);
    for (int i = 0; i < n; ++i) {
        t.dates.push_back(csv::days_to_iso(15000 + i));
        t.open(i, 0) = close[i];
        t.high(i, 0) = close[i];
        t.low(i, 0) = close[i];
        t.close(i, 0) = close[i];
    }
    return t;
}

} // namespace

TEST_CASE("load_ohlcv echoes a small file") {
    const std::string path = write_temp_csv("md_small.csv",
                                            "date,ticker,open,high,low,close,volume\n"
                                            "2020-01-02,X,9.5,10.5,9.0,10.0,100\n"
                                            "2020-01-03,X,10.0,11.5,9.9,11.0,200\n");
    const PriceTable t = load_ohlcv(path, {"X"});
    REQUIRE(t.days() == 2);
    CHECK(t.close(0, 0) == 10.0);
    CHECK(t.close(1, 0) == 11.0);
    CHECK(t.dates[0] == "2020-01-02");

    CHECK_THROWS_WITH(load_ohlcv(path, {"Y"}), Catch::Matchers::ContainsSubstring("unknown ticker"));
}

TEST_CASE("load_ohlcv rejects non-positive close") {
    const std::string path = write_temp_csv("md_bad.csv",
                                            "date,ticker,open,high,low,close,volume\n"
                                            "2020-01-02,X,9.5,10.5,9.0,-1.0,100\n");
    CHECK_THROWS_WITH(load_ohlcv(path, {"X"}), Catch::Matchers::ContainsSubstring("non-positive"));
}

TEST_CASE("load_ohlcv aligns tickers by inner join") {
    const std::string path = write_temp_csv("md_join.csv",
                                            "date,ticker,open,high,low,close,volume\n"
                                            "2020-01-02,X,1,1,1,1,10\n"
                                            "2020-01-03,X,1,1,1,1,10\n"
                                            "2020-01-02,Y,2,2,2,2,20\n");
    const PriceTable t = load_ohlcv(path, {"X", "Y"});
    REQUIRE(t.days() == 1); // 2020-01-03 lacks Y and is dropped
    CHECK(t.dates[0] == "2020-01-02");
}

TEST_CASE("indicators on a constant series") {
    const PriceTable t = flat_table(Vec(120, 42.0));
    const IndicatorTable ind = compute_indicators(t);
    for (int day : {0, 60, 119}) {
        CHECK(ind.at(day, 0, 0) == Catch::Approx(0.0).margin(1e-12));  // MACD
        CHECK(ind.at(day, 0, 1) == Catch::Approx(42.0));               // SMA30
        CHECK(ind.at(day, 0, 2) == Catch::Approx(42.0));               // SMA60
        CHECK(ind.at(day, 0, 3) == 0.0);                               // BOLL
        CHECK(ind.at(day, 0, 4) == 50.0);                              // RSI
        CHECK(ind.at(day, 0, 5) == 0.0);                               // CCI
        CHECK(ind.at(day, 0, 6) == 0.0);                               // ADX
    }
}

TEST_CASE("RSI saturates at 100 on a strictly increasing series") {
    Vec close;
    for (int i = 0; i < 80; ++i) close.push_back(10.0 + i);
    const IndicatorTable ind = compute_indicators(flat_table(close));
    for (int day = 60; day < 80; ++day) CHECK(ind.at(day, 0, 4) == Catch::Approx(100.0));
}

TEST_CASE("SMA30 on the 1..100 ramp") {
    Vec close;
    for (int i = 1; i <= 100; ++i) close.push_back(i);
    const IndicatorTable ind = compute_indicators(flat_table(close));
    CHECK(ind.at(99, 0, 1) == Catch::Approx(85.5)); // mean of 71..100
}

TEST_CASE("indicator ranges and causality") {
    Rng rng(11);
    Vec close = {50.0};
    for (int i = 1; i < 200; ++i)
        close.push_back(std::max(1.0, close.back() + rng.normal(0.0, 1.0)));
    PriceTable t = flat_table(close);
    // widen high/low around close so ADX/CCI see non-degenerate bars
    for (int i = 0; i < t.days(); ++i) {
        t.high(i, 0) = close[i] + 0.5;
        t.low(i, 0) = std::max(0.5, close[i] - 0.5);
    }
    const IndicatorTable full = compute_indicators(t);

    for (int day = 0; day < t.days(); ++day) {
        CHECK(full.at(day, 0, 4) >= 0.0);
        CHECK(full.at(day, 0, 4) <= 100.0);
        CHECK(full.at(day, 0, 6) >= 0.0);
        CHECK(full.at(day, 0, 6) <= 100.0);
        CHECK(full.at(day, 0, 1) > 0.0);
        CHECK(full.at(day, 0, 2) > 0.0);
    }

    // causal beyond the longest warm-up: a prefix computation agrees with
    // the prefix of the full computation
    for (int prefix : {60, 95, 150}) {
        PriceTable head = t;
        head.dates.resize(prefix);
        head.open = Mat(prefix, 1);
        head.high = Mat(prefix, 1);
        head.low = Mat(prefix, 1);
        head.close = Mat(prefix, 1);
        head.volume = Mat(prefix, 1, 1000.0);
        for (int i = 0; i < prefix; ++i) {
            head.open(i, 0) = t.open(i, 0);
            head.high(i, 0) = t.high(i, 0);
            head.low(i, 0) = t.low(i, 0);
            head.close(i, 0) = t.close(i, 0);
        }
        const IndicatorTable part = compute_indicators(head);
        for (int day = 0; day < prefix; ++day)
            for (int k = 0; k < IndicatorTable::kPerStock; ++k)
                CHECK(part.at(day, 0, k) == Catch::Approx(full.at(day, 0, k)).margin(1e-12));
    }
}

TEST_CASE("turnover ranking") {
    SECTION("constant ratio") {
        PriceTable t = flat_table(Vec(30, 10.0));
        t.shares_outstanding = {10000.0};
        const auto ranked = rank_by_turnover(t, 20);
        REQUIRE(ranked.size() == 1);
        CHECK(ranked[0].turnover == Catch::Approx(0.1));
    }

    SECTION("ascending order") {
        PriceTable t;
        t.tickers = {"A", "B"};
        const int n = 30;
        t.open = Mat(n, 2, 10.0);
        t.high = Mat(n, 2, 10.0);
        t.low = Mat(n, 2, 10.0);
        t.close = Mat(n, 2, 10.0);
        t.volume = Mat(n, 2);
        t.shares_outstanding = {10000.0, 10000.0};
        for (int i = 0; i < n; ++i) {
            t.dates.push_back(csv::days_to_iso(15000 + i));
            t.volume(i, 0) = 3000.0; // turnover 0.3
            t.volume(i, 1) = 1000.0; // turnover 0.1
        }
        const auto ranked = rank_by_turnover(t, 20);
        CHECK(ranked[0].ticker == "B");
        CHECK(ranked[1].ticker == "A");

        CHECK_THROWS_AS(rank_by_turnover(t, 31), std::invalid_argument);
    }

    SECTION("proxy without shares outstanding matches a direct loop") {
        Rng rng(3);
        PriceTable t = flat_table(Vec(50, 10.0));
        for (int i = 0; i < 50; ++i) t.volume(i, 0) = std::floor(rng.uniform(100.0, 5000.0));
        const int window = 30;
        const auto ranked = rank_by_turnover(t, window);

        double vmax = 0.0;
        for (int i = 50 - window; i < 50; ++i) vmax = std::max(vmax, t.volume(i, 0));
        double acc = 0.0;
        for (int i = 50 - window; i < 50; ++i) acc += t.volume(i, 0) / vmax;
        CHECK(ranked[0].turnover == Catch::Approx(acc / window).margin(1e-12));
    }
}

TEST_CASE("dataset splits") {
    const PriceTable t10 = flat_table(Vec(10, 5.0));
    const DatasetSplit s = split_dataset(t10, t10.dates[5], t10.dates[7]);
    CHECK(s.train_size() == 6);
    CHECK(s.val_size() == 2);
    CHECK(s.test_size() == 2);
    CHECK(s.train_size() + s.val_size() + s.test_size() == t10.days());

    CHECK_THROWS_AS(split_dataset(t10, t10.dates[7], t10.dates[5]), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(t10, t10.dates[8], t10.dates[9]), std::invalid_argument);
}

TEST_CASE("reference split sizes on a 2576-day synthetic calendar") {
    const PriceTable t = flat_table(Vec(2576, 5.0));
    const DatasetSplit s = split_dataset(t, t.dates[1634], t.dates[1634 + 396]);
    CHECK(s.train_size() == 1635);
    CHECK(s.val_size() == 396);
    CHECK(s.test_size() == 545);
}
