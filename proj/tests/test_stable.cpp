#include <catch2/catch_amalgamated.hpp>

#include "mbnf/stable.hpp"
#include "test_support.hpp"

using namespace mbnf;

TEST_CASE("price differences") {
    CHECK(price_diff_series({10, 11, 9}) == Vec{1, -2});
    CHECK(price_diff_series(Vec(5, 3.0)) == Vec(4, 0.0));
    CHECK_THROWS_AS(price_diff_series({1.0}), std::invalid_argument);

    Rng rng(1);
    Vec prices(40);
    for (double& p : prices) p = rng.uniform(1, 100);
    const Vec d = price_diff_series(prices);
    double sum = 0;
    for (double v : d) sum += v;
    CHECK(sum == Catch::Approx(prices.back() - prices.front()).margin(1e-9));
}

TEST_CASE("characteristic function values") {
    CHECK(stable_char_fn({2, 0, 0, 1}, 1.0).real() == Catch::Approx(std::exp(-1.0)).margin(1e-10));
    CHECK(stable_char_fn({2, 0, 0, 1}, 1.0).imag() == Catch::Approx(0.0).margin(1e-10));
    CHECK(std::abs(stable_char_fn({1, 0, 0, 2}, 1.0)) == Catch::Approx(std::exp(-2.0)));

    Rng rng(2);
    for (int trial = 0; trial < 25; ++trial) {
        const StableParams p{rng.uniform(0.6, 2.0), rng.uniform(-1, 1), rng.uniform(-2, 2),
                             rng.uniform(0.1, 3.0)};
        CHECK(std::abs(stable_char_fn(p, 0.0)) == 1.0);
        CHECK(std::abs(stable_char_fn(p, rng.uniform(-5, 5))) <= 1.0 + 1e-12);
    }
}

TEST_CASE("alpha=2 sampling reduces to a Gaussian with variance 2 sigma^2") {
    Rng rng(3);
    const double sigma = 0.7;
    const int n = 200000;
    const Vec xs = stable_sample({2.0, 0.0, 0.0, sigma}, n, rng);
    double mean = mean_of(xs);
    double var = 0.0;
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= n - 1;
    CHECK(var == Catch::Approx(2 * sigma * sigma).epsilon(0.02));
}

TEST_CASE("symmetric draws center on mu") {
    Rng rng(4);
    const double mu = 1.5;
    const int n = 50000;
    Vec xs = stable_sample({1.4, 0.0, mu, 0.8}, n, rng);
    std::sort(xs.begin(), xs.end());
    const double median = xs[n / 2];
    // median standard error ~ 1/(2 f(mu) sqrt(n)); bound loosely via IQR
    const double iqr = xs[3 * n / 4] - xs[n / 4];
    CHECK(std::fabs(median - mu) < 3.0 * iqr / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("stability under addition at alpha=2") {
    Rng rng(5);
    const StableParams p{2.0, 0.0, 0.0, 1.0};
    const int n = 20000;
    const Vec a = stable_sample(p, n, rng), b = stable_sample(p, n, rng);
    Vec combined(n);
    for (int i = 0; i < n; ++i) combined[i] = (a[i] + b[i]) / std::sqrt(2.0);
    Vec fresh = stable_sample(p, n, rng);

    // two-sample Kolmogorov-Smirnov
    std::sort(combined.begin(), combined.end());
    std::sort(fresh.begin(), fresh.end());
    double ks = 0.0;
    size_t i = 0, j = 0;
    while (i < combined.size() && j < fresh.size()) {
        if (combined[i] <= fresh[j]) ++i;
        else ++j;
        ks = std::max(ks, std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / n));
    }
    const double stat = ks * std::sqrt(n / 2.0);
    const double p_value = 2.0 * std::exp(-2.0 * stat * stat);
    CHECK(p_value > 0.01);
}

TEST_CASE("McCulloch fit recovers known parameters") {
    Rng rng(6);
    SECTION("reference fit at alpha 1.6") {
        const Vec xs = stable_sample({1.6, 0.0, 0.0, 0.5}, 50000, rng);
        const StableParams fit = fit_stable(xs);
        CHECK(fit.alpha > 1.5);
        CHECK(fit.alpha < 1.7);
        CHECK(std::fabs(fit.beta) <= 0.15);
        CHECK(std::fabs(fit.mu) <= 0.05);
        CHECK(fit.sigma > 0.45);
        CHECK(fit.sigma < 0.55);
    }

    SECTION("Gaussian input") {
        Vec xs(50000);
        for (double& v : xs) v = rng.normal();
        const StableParams fit = fit_stable(xs);
        CHECK(fit.alpha >= 1.9);
        CHECK(fit.sigma == Catch::Approx(1.0 / std::sqrt(2.0)).margin(0.05));
    }

    SECTION("round trip over the (alpha, beta) grid") {
        for (double alpha : {1.2, 1.5, 1.8, 2.0})
            for (double beta : {-0.5, 0.0, 0.5}) {
                const StableParams truth{alpha, beta, 0.0, 1.0};
                const Vec xs = stable_sample(truth, 50000, rng);
                const StableParams fit = fit_stable(xs);
                INFO("alpha=" << alpha << " beta=" << beta);
                CHECK(std::fabs(fit.alpha - alpha) <= 0.1);
                CHECK(std::fabs(fit.sigma - 1.0) <= 0.1);
            }
    }
}

TEST_CASE("fit errors") {
    CHECK_THROWS_AS(fit_stable(Vec(50, 1.0)), std::invalid_argument);   // too few
    CHECK_THROWS_AS(fit_stable(Vec(500, 1.0)), std::invalid_argument);  // constant
}

TEST_CASE("sampler agrees with the characteristic function") {
    Rng rng(7);
    const StableParams p{1.6, 0.2, 0.1, 0.8};
    const Vec xs = stable_sample(p, 100000, rng);
    for (double u : {0.5, 1.0, 2.0}) {
        std::complex<double> emp{0.0, 0.0};
        for (double x : xs) emp += std::exp(std::complex<double>(0.0, u * x));
        emp /= static_cast<double>(xs.size());
        CHECK(std::abs(emp - stable_char_fn(p, u)) < 0.02);
    }
}

TEST_CASE("Student-t tails are flagged non-Gaussian") {
    Rng rng(8);
    Vec xs(60000);
    for (double& v : xs) {
        // t(3) via normal / sqrt(chi2_3 / 3)
        const double z = rng.normal();
        double chi = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double g = rng.normal();
            chi += g * g;
        }
        v = z / std::sqrt(chi / 3.0);
    }
    CHECK(fit_stable(xs).alpha < 1.9);
}
