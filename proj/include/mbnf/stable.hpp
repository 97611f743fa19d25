#pragma once

#include <complex>

#include "mbnf/common.hpp"

namespace mbnf {

/// Alpha-stable law S(alpha, beta, mu, sigma) in the S1 parameterization:
/// alpha is the tail index, beta the skewness, mu the location entering the
/// characteristic function as exp(i mu u), sigma the scale. alpha = 2 is a
/// Gaussian with variance 2 sigma^2.
struct StableParams {
    double alpha = 2.0;
    double beta = 0.0;
    double mu = 0.0;
    double sigma = 1.0;
};

inline void validate(const StableParams& p) {
    if (!(p.alpha > 0.0 && p.alpha <= 2.0)) throw std::invalid_argument("alpha outside (0, 2]");
    if (!(p.beta >= -1.0 && p.beta <= 1.0)) throw std::invalid_argument("beta outside [-1, 1]");
    if (!(p.sigma >= 0.0)) throw std::invalid_argument("negative sigma");
}

/// Consecutive differences P_{t+1} - P_t.
inline Vec price_diff_series(const Vec& prices) {
    if (prices.size() < 2) throw std::invalid_argument("need at least 2 prices");
    Vec out(prices.size() - 1);
    for (size_t t = 0; t + 1 < prices.size(); ++t) out[t] = prices[t + 1] - prices[t];
    return out;
}

/// Characteristic function, alpha != 1 and alpha == 1 branches.
inline std::complex<double> stable_char_fn(const StableParams& p, double u) {
    validate(p);
    using namespace std::complex_literals;
    if (u == 0.0) return {1.0, 0.0};
    const double sign_u = u > 0.0 ? 1.0 : -1.0;
    const double au = std::fabs(u);
    std::complex<double> exponent;
    if (p.alpha != 1.0) {
        const double scale_term = std::pow(p.sigma, p.alpha) * std::pow(au, p.alpha);
        exponent = -scale_term * (1.0 - 1i * p.beta * sign_u * std::tan(M_PI * p.alpha / 2.0)) +
                   1i * p.mu * u;
    } else {
        exponent = -p.sigma * au * (1.0 + 1i * p.beta * (2.0 / M_PI) * sign_u * std::log(au)) +
                   1i * p.mu * u;
    }
    return std::exp(exponent);
}

/// Chambers-Mallows-Stuck draw from the standard S1 law, then shifted and
/// scaled. The alpha = 1 branch needs the extra (2/pi) beta sigma ln sigma
/// location correction.
inline double stable_sample_one(const StableParams& p, Rng& rng) {
    const double th = rng.uniform(-M_PI / 2.0, M_PI / 2.0);
    const double w = rng.exponential();
    double x;
    if (p.alpha == 1.0) {
        const double bth = p.beta * th;
        x = 2.0 / M_PI *
            ((M_PI / 2.0 + bth) * std::tan(th) -
             p.beta * std::log((M_PI / 2.0 * w * std::cos(th)) / (M_PI / 2.0 + bth)));
        return p.sigma * x + p.mu + 2.0 / M_PI * p.beta * p.sigma * std::log(p.sigma);
    }
    const double ath = p.alpha * th;
    if (p.beta == 0.0) {
        x = std::sin(ath) / std::pow(std::cos(th), 1.0 / p.alpha) *
            std::pow(std::cos(th - ath) / w, (1.0 - p.alpha) / p.alpha);
    } else {
        const double val0 = p.beta * std::tan(M_PI * p.alpha / 2.0);
        const double th0 = std::atan(val0) / p.alpha;
        const double val3 = w / (std::cos(th) / std::tan(p.alpha * (th0 + th)) + std::sin(th));
        x = val3 * std::pow((std::cos(ath) + std::sin(ath) * std::tan(th) -
                             val0 * (std::sin(ath) - std::cos(ath) * std::tan(th))) /
                                w,
                            1.0 / p.alpha);
    }
    return p.sigma * x + p.mu;
}

inline Vec stable_sample(const StableParams& p, int n, Rng& rng) {
    validate(p);
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    Vec out(n);
    for (double& v : out) v = stable_sample_one(p, rng);
    return out;
}

namespace stable_detail {

/// Linear-interpolation quantile of sorted data (type 7).
inline double quantile_sorted(const Vec& sorted, double prob) {
    const double h = (sorted.size() - 1) * prob;
    const size_t lo = static_cast<size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

/// Bilinear interpolation on a tabulated grid, clamped at the edges.
inline double interp2(const Vec& xs, const Vec& ys, const std::vector<Vec>& table, double x,
                      double y) {
    auto bracket = [](const Vec& grid, double v, size_t& i, double& frac) {
        if (v <= grid.front()) {
            i = 0;
            frac = 0.0;
            return;
        }
        if (v >= grid.back()) {
            i = grid.size() - 2;
            frac = 1.0;
            return;
        }
        i = 0;
        while (v > grid[i + 1]) ++i;
        frac = (v - grid[i]) / (grid[i + 1] - grid[i]);
    };
    size_t i, j;
    double fx, fy;
    bracket(xs, x, i, fx);
    bracket(ys, y, j, fy);
    const double v00 = table[i][j], v01 = table[i][j + 1];
    const double v10 = table[i + 1][j], v11 = table[i + 1][j + 1];
    return (1 - fx) * ((1 - fy) * v00 + fy * v01) + fx * ((1 - fy) * v10 + fy * v11);
}

// McCulloch (1986) quantile lookup tables.
// nu_alpha rows x nu_beta columns; alpha = psi_1, beta = psi_2.
inline const Vec kNuAlphaGrid = {2.439, 2.5, 2.6, 2.7, 2.8, 3.0, 3.2, 3.5,
                                 4.0,   5.0, 6.0, 8.0, 10.0, 15.0, 25.0};
inline const Vec kNuBetaGrid = {0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};

inline const std::vector<Vec> kAlphaTable = {
    {2.000, 2.000, 2.000, 2.000, 2.000, 2.000, 2.000},
    {1.916, 1.924, 1.924, 1.924, 1.924, 1.924, 1.924},
    {1.808, 1.813, 1.829, 1.829, 1.829, 1.829, 1.829},
    {1.729, 1.730, 1.737, 1.745, 1.745, 1.745, 1.745},
    {1.664, 1.663, 1.663, 1.668, 1.676, 1.676, 1.676},
    {1.563, 1.560, 1.553, 1.548, 1.547, 1.547, 1.547},
    {1.484, 1.480, 1.471, 1.460, 1.448, 1.438, 1.438},
    {1.391, 1.386, 1.378, 1.364, 1.337, 1.318, 1.318},
    {1.279, 1.273, 1.266, 1.250, 1.210, 1.184, 1.150},
    {1.128, 1.121, 1.114, 1.101, 1.067, 1.027, 0.973},
    {1.029, 1.021, 1.014, 1.004, 0.974, 0.935, 0.874},
    {0.896, 0.892, 0.884, 0.883, 0.855, 0.823, 0.769},
    {0.818, 0.812, 0.806, 0.801, 0.780, 0.756, 0.691},
    {0.698, 0.695, 0.692, 0.689, 0.676, 0.656, 0.597},
    {0.593, 0.590, 0.588, 0.586, 0.579, 0.563, 0.513}};

inline const std::vector<Vec> kBetaTable = {
    {0.0, 2.160, 1.000, 1.000, 1.000, 1.000, 1.000},
    {0.0, 1.592, 3.390, 1.000, 1.000, 1.000, 1.000},
    {0.0, 0.759, 1.800, 1.000, 1.000, 1.000, 1.000},
    {0.0, 0.482, 1.048, 1.694, 1.000, 1.000, 1.000},
    {0.0, 0.360, 0.760, 1.232, 2.229, 1.000, 1.000},
    {0.0, 0.253, 0.518, 0.823, 1.575, 1.000, 1.000},
    {0.0, 0.203, 0.410, 0.632, 1.244, 1.906, 1.000},
    {0.0, 0.165, 0.332, 0.499, 0.943, 1.560, 1.000},
    {0.0, 0.136, 0.271, 0.404, 0.689, 1.230, 2.195},
    {0.0, 0.109, 0.216, 0.323, 0.539, 0.827, 1.917},
    {0.0, 0.096, 0.190, 0.284, 0.472, 0.693, 1.759},
    {0.0, 0.082, 0.163, 0.243, 0.412, 0.601, 1.596},
    {0.0, 0.074, 0.147, 0.220, 0.377, 0.546, 1.482},
    {0.0, 0.064, 0.128, 0.191, 0.330, 0.478, 1.362},
    {0.0, 0.056, 0.112, 0.167, 0.285, 0.428, 1.274}};

// alpha rows (ascending 0.5..2.0) x beta columns; scale = (q75-q25)/psi_3,
// zeta = q50 + scale * psi_5.
inline const Vec kAlphaGrid = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2,
                               1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};
inline const Vec kBetaGrid = {0.0, 0.25, 0.5, 0.75, 1.0};

inline const std::vector<Vec> kScaleTable = {
    {2.588, 3.073, 4.534, 6.636, 9.144},
    {2.337, 2.634, 3.542, 4.808, 6.247},
    {2.189, 2.392, 3.004, 3.844, 4.775},
    {2.098, 2.244, 2.676, 3.265, 3.912},
    {2.040, 2.149, 2.461, 2.886, 3.356},
    {2.000, 2.085, 2.311, 2.624, 2.973},
    {1.980, 2.040, 2.205, 2.435, 2.696},
    {1.965, 2.007, 2.125, 2.294, 2.491},
    {1.955, 1.984, 2.067, 2.188, 2.333},
    {1.946, 1.967, 2.022, 2.106, 2.211},
    {1.939, 1.952, 1.988, 2.045, 2.116},
    {1.933, 1.940, 1.962, 1.997, 2.043},
    {1.927, 1.930, 1.943, 1.961, 1.987},
    {1.921, 1.922, 1.927, 1.936, 1.947},
    {1.914, 1.915, 1.916, 1.918, 1.921},
    {1.908, 1.908, 1.908, 1.908, 1.908}};

inline const std::vector<Vec> kZetaTable = {
    {0.0, -0.061, -0.279, -0.659, -1.198},
    {0.0, -0.078, -0.272, -0.581, -0.997},
    {0.0, -0.089, -0.262, -0.520, -0.853},
    {0.0, -0.096, -0.250, -0.469, -0.742},
    {0.0, -0.099, -0.237, -0.424, -0.652},
    {0.0, -0.098, -0.223, -0.380, -0.576},
    {0.0, -0.095, -0.208, -0.346, -0.508},
    {0.0, -0.090, -0.192, -0.310, -0.447},
    {0.0, -0.084, -0.173, -0.276, -0.390},
    {0.0, -0.075, -0.154, -0.241, -0.335},
    {0.0, -0.066, -0.134, -0.206, -0.283},
    {0.0, -0.056, -0.111, -0.170, -0.232},
    {0.0, -0.043, -0.088, -0.132, -0.179},
    {0.0, -0.030, -0.061, -0.092, -0.123},
    {0.0, -0.017, -0.032, -0.049, -0.064},
    {0.0, 0.000, 0.000, 0.000, 0.000}};

} // namespace stable_detail

/// McCulloch quantile estimator. Estimates (alpha, beta) from the tabulated
/// quantile ratios, then scale and location; alpha is clipped to (0.5, 2].
inline StableParams fit_stable(const Vec& samples) {
    using namespace stable_detail;
    if (samples.size() < 100) throw std::invalid_argument("need at least 100 samples");
    Vec sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back())
        throw std::invalid_argument("degenerate (constant) samples");

    const double q05 = quantile_sorted(sorted, 0.05);
    const double q25 = quantile_sorted(sorted, 0.25);
    const double q50 = quantile_sorted(sorted, 0.50);
    const double q75 = quantile_sorted(sorted, 0.75);
    const double q95 = quantile_sorted(sorted, 0.95);
    if (q75 - q25 <= 0.0 || q95 - q05 <= 0.0)
        throw std::invalid_argument("degenerate interquantile range");

    const double nu_alpha = (q95 - q05) / (q75 - q25);
    const double nu_beta = (q95 + q05 - 2.0 * q50) / (q95 - q05);

    StableParams p;
    if (nu_alpha >= kNuAlphaGrid.front()) {
        const double sign_nb = nu_beta >= 0.0 ? 1.0 : -1.0;
        p.alpha = interp2(kNuAlphaGrid, kNuBetaGrid, kAlphaTable, nu_alpha, std::fabs(nu_beta));
        p.beta = sign_nb * interp2(kNuAlphaGrid, kNuBetaGrid, kBetaTable, nu_alpha, std::fabs(nu_beta));
    } else {
        p.alpha = 2.0;
        p.beta = nu_beta >= 0.0 ? (nu_beta > 0.0 ? 1.0 : 0.0) : -1.0;
    }
    p.alpha = std::clamp(p.alpha, std::nextafter(0.5, 1.0), 2.0);
    p.beta = std::clamp(p.beta, -1.0, 1.0);

    const double sign_b = p.beta >= 0.0 ? 1.0 : -1.0;
    const double psi3 = interp2(kAlphaGrid, kBetaGrid, kScaleTable, p.alpha, std::fabs(p.beta));
    p.sigma = (q75 - q25) / psi3;
    const double psi5 = sign_b * interp2(kAlphaGrid, kBetaGrid, kZetaTable, p.alpha, std::fabs(p.beta));
    const double zeta = q50 + p.sigma * psi5;
    p.mu = p.alpha != 1.0 ? zeta - p.beta * p.sigma * std::tan(M_PI * p.alpha / 2.0) : zeta;
    return p;
}

} // namespace mbnf
