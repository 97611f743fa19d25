#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbnf {

using Vec = std::vector<double>;

/// Dense row-major matrix; small enough that we do not need a linalg library.
struct Mat {
    int rows = 0;
    int cols = 0;
    Vec data;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    Vec row(int r) const {
        return Vec(data.begin() + static_cast<size_t>(r) * cols,
                   data.begin() + static_cast<size_t>(r + 1) * cols);
    }
    void set_row(int r, const Vec& v) {
        std::copy(v.begin(), v.end(), data.begin() + static_cast<size_t>(r) * cols);
    }
    void push_row(const Vec& v) {
        if (cols == 0) cols = static_cast<int>(v.size());
        data.insert(data.end(), v.begin(), v.end());
        ++rows;
    }
};

/// All randomness flows through this wrapper so a run is reproducible from a
/// single seed. Draw order is part of the determinism contract: do not
/// reorder calls inside library code.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int uniform_int(int n) { return static_cast<int>(engine_() % static_cast<uint64_t>(n)); }

    /// Standard normal via Box-Muller (no caching, one value per two draws).
    double normal() {
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Exponential with unit rate.
    double exponential() {
        double u = 0.0;
        do { u = uniform(); } while (u <= 0.0);
        return -std::log(u);
    }

    /// Derive an independent stream (member nets, bootstrap resamples, ...).
    Rng split(uint64_t stream) {
        return Rng(engine_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    }

private:
    std::mt19937_64 engine_;
};

inline double dot(const Vec& a, const Vec& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double mean_of(const Vec& a) {
    if (a.empty()) return 0.0;
    return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

/// Sample standard deviation (ddof = 1); 0 for fewer than two points.
inline double sample_std(const Vec& a) {
    const size_t n = a.size();
    if (n < 2) return 0.0;
    const double m = mean_of(a);
    double ss = 0.0;
    for (double v : a) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

inline bool all_finite(const Vec& a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

} // namespace mbnf
