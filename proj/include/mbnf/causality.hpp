#pragma once

#include "mbnf/market_data.hpp"
#include "mbnf/stable.hpp"

namespace mbnf {

/// Delay-embedding configuration for the pattern-causality vote.
struct PcConfig {
    int embed_dim = 3;  // E
    int lag = 1;        // tau
    int neighbors = 3;  // k
    int horizon = 1;    // h

    int min_length() const { return (embed_dim - 1) * lag + horizon + neighbors + 1; }
};

struct PcStrengths {
    double positive = 0.0;
    double negative = 0.0;
    double dark = 0.0;
};

struct CausalityMatrix {
    std::vector<std::string> tickers;
    Mat positive, negative, dark;
};

namespace pc_detail {

/// Sign signature of consecutive differences: E-1 symbols in {-1, 0, +1}.
inline std::vector<int> signature(const Vec& point) {
    std::vector<int> sig(point.size() - 1);
    for (size_t j = 0; j + 1 < point.size(); ++j) {
        const double diff = point[j + 1] - point[j];
        sig[j] = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
    }
    return sig;
}

inline bool flipped(const std::vector<int>& a, const std::vector<int>& b) {
    for (size_t j = 0; j < a.size(); ++j)
        if (a[j] != -b[j]) return false;
    return true;
}

inline Vec embed_point(const Vec& series, int t, int embed_dim, int lag) {
    Vec point(embed_dim);
    for (int j = 0; j < embed_dim; ++j) point[j] = series[t - (embed_dim - 1 - j) * lag];
    return point;
}

} // namespace pc_detail

/// Votes on how y relates to x's local dynamics. Both series are
/// delay-embedded; for each time t the k nearest attractor points of x
/// (including t itself) are cross-mapped into y at horizon h, and the sign
/// signature of that weighted prediction is compared against x's actual
/// signature at t + h. An identical signature is a positive vote, an exactly
/// mirrored one negative, anything else dark. Neighbor weights are
/// inverse-distance with a relative regularizer, so the vote is exactly
/// invariant under positive affine maps of either series.
inline PcStrengths pattern_causality(const Vec& x, const Vec& y, const PcConfig& cfg = {}) {
    const int n = static_cast<int>(x.size());
    if (static_cast<int>(y.size()) != n) throw std::invalid_argument("series lengths differ");
    if (n <= cfg.min_length()) throw std::invalid_argument("series too short for embedding");
    if (sample_std(x) == 0.0 || sample_std(y) == 0.0)
        throw std::invalid_argument("zero-variance series has no signatures");

    const int E = cfg.embed_dim, tau = cfg.lag, k = cfg.neighbors, h = cfg.horizon;
    const int first = (E - 1) * tau;
    const int last = n - 1 - h; // embeddings at t + h must exist
    const int count = last - first + 1;
    if (count <= k) throw std::invalid_argument("series too short for embedding");

    std::vector<Vec> mx(count), my(count);
    for (int t = first; t <= last; ++t) {
        mx[t - first] = pc_detail::embed_point(x, t, E, tau);
        my[t - first] = pc_detail::embed_point(y, t, E, tau);
    }
    // embeddings at the prediction horizon
    std::vector<Vec> mxh(count), myh(count);
    for (int t = first; t <= last; ++t) {
        mxh[t - first] = pc_detail::embed_point(x, t + h, E, tau);
        myh[t - first] = pc_detail::embed_point(y, t + h, E, tau);
    }

    long long pos = 0, neg = 0, dark = 0;
    std::vector<std::pair<double, int>> dist(count);
    for (int i = 0; i < count; ++i) {
        for (int j = 0; j < count; ++j) {
            double d2 = 0.0;
            for (int e = 0; e < E; ++e) {
                const double diff = mx[i][e] - mx[j][e];
                d2 += diff * diff;
            }
            dist[j] = {std::sqrt(d2), j};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

        double dmax = 0.0;
        for (int j = 0; j < k; ++j) dmax = std::max(dmax, dist[j].first);
        Vec pred(E, 0.0);
        double wsum = 0.0;
        for (int j = 0; j < k; ++j) {
            const double w = dmax > 0.0 ? 1.0 / (dist[j].first + 1e-12 * dmax) : 1.0;
            const Vec& target = myh[dist[j].second];
            for (int e = 0; e < E; ++e) pred[e] += w * target[e];
            wsum += w;
        }
        for (int e = 0; e < E; ++e) pred[e] /= wsum;

        const std::vector<int> predicted = pc_detail::signature(pred);
        const std::vector<int> actual = pc_detail::signature(mxh[i]);
        if (predicted == actual)
            ++pos;
        else if (pc_detail::flipped(predicted, actual))
            ++neg;
        else
            ++dark;
    }
    const double total = static_cast<double>(pos + neg + dark);
    return {pos / total, neg / total, dark / total};
}

/// Pairwise directed strengths over first-differenced close prices.
inline CausalityMatrix causality_matrix(const PriceTable& prices, const PcConfig& cfg = {}) {
    const int d = prices.num_stocks();
    if (d < 2) throw std::invalid_argument("need at least 2 tickers");
    CausalityMatrix out;
    out.tickers = prices.tickers;
    out.positive = Mat(d, d);
    out.negative = Mat(d, d);
    out.dark = Mat(d, d);

    std::vector<Vec> diffs(d);
    for (int i = 0; i < d; ++i) {
        Vec close(prices.days());
        for (int t = 0; t < prices.days(); ++t) close[t] = prices.close(t, i);
        diffs[i] = price_diff_series(close);
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const PcStrengths s = pattern_causality(diffs[i], diffs[j], cfg);
            out.positive(i, j) = s.positive;
            out.negative(i, j) = s.negative;
            out.dark(i, j) = s.dark;
        }
    return out;
}

/// Edge (i, j) iff matrix[i][j] > theta, strictly; diagonal excluded.
inline std::vector<std::vector<bool>> threshold_graph(const Mat& matrix, double theta) {
    if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("theta outside [0, 1]");
    std::vector<std::vector<bool>> adj(matrix.rows, std::vector<bool>(matrix.cols, false));
    for (int i = 0; i < matrix.rows; ++i)
        for (int j = 0; j < matrix.cols; ++j)
            adj[i][j] = i != j && matrix(i, j) > theta;
    return adj;
}

} // namespace mbnf
