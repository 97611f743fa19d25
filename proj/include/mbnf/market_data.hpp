#pragma once

#include <map>
#include <set>
#include <string>

#include "mbnf/common.hpp"
#include "mbnf/csv.hpp"

namespace mbnf {

/// Aligned OHLCV panel: rows are trading days, columns are tickers.
/// Alignment is an inner join across tickers, so every ticker has a value
/// for every date.
struct PriceTable {
    std::vector<std::string> tickers;
    std::vector<std::string> dates; // ISO-8601, strictly increasing
    Mat open, high, low, close, volume;
    Vec shares_outstanding; // per ticker; empty when the source lacks it

    int days() const { return static_cast<int>(dates.size()); }
    int num_stocks() const { return static_cast<int>(tickers.size()); }
    bool has_shares_outstanding() const { return !shares_outstanding.empty(); }
};

/// Seven indicators per ticker per day, stored as a (days x 7*d) matrix in
/// the column order MACD, SMA30, SMA60, BOLL, RSI, CCI, ADX per ticker.
struct IndicatorTable {
    static constexpr int kPerStock = 7;
    Mat values;

    double at(int day, int stock, int which) const { return values(day, stock * kPerStock + which); }
    Vec row(int day) const { return values.row(day); }
};

inline const char* kIndicatorNames[IndicatorTable::kPerStock] = {
    "macd", "sma30", "sma60", "boll", "rsi", "cci", "adx"};

struct DatasetSplit {
    int train_begin = 0;
    int train_end = 0; // exclusive
    int val_end = 0;   // exclusive
    int test_end = 0;  // exclusive

    int train_size() const { return train_end - train_begin; }
    int val_size() const { return val_end - train_end; }
    int test_size() const { return test_end - val_end; }
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Loads `date,ticker,open,high,low,close,volume[,shares_outstanding]` rows,
/// restricted to the requested tickers and inclusive date range. Dates
/// missing for any requested ticker are dropped (inner join).
inline PriceTable load_ohlcv(const std::string& path, const std::vector<std::string>& tickers,
                             const std::pair<std::string, std::string>& date_range = {"", ""}) {
    const csv::Table raw = csv::read(path);
    const int c_date = raw.col("date"), c_ticker = raw.col("ticker");
    const int c_open = raw.col("open"), c_high = raw.col("high"), c_low = raw.col("low");
    const int c_close = raw.col("close"), c_volume = raw.col("volume");
    const int c_shares = raw.col("shares_outstanding");
    if (c_date < 0 || c_ticker < 0 || c_open < 0 || c_high < 0 || c_low < 0 || c_close < 0 ||
        c_volume < 0)
        throw std::runtime_error("bad OHLCV header in " + path);

    std::map<std::string, int> ticker_index;
    for (size_t i = 0; i < tickers.size(); ++i) ticker_index[tickers[i]] = static_cast<int>(i);

    struct Bar {
        double open, high, low, close, volume;
    };
    std::map<std::string, std::map<int, Bar>> bars; // date -> ticker idx -> bar
    Vec shares(tickers.size(), 0.0);
    std::vector<bool> shares_seen(tickers.size(), false);
    std::set<std::string> seen_tickers;

    for (const auto& row : raw.rows) {
        const std::string& tk = row[c_ticker];
        auto it = ticker_index.find(tk);
        if (it == ticker_index.end()) continue;
        const std::string& date = row[c_date];
        if (!date_range.first.empty() && date < date_range.first) continue;
        if (!date_range.second.empty() && date > date_range.second) continue;
        Bar b{csv::to_double(row[c_open]), csv::to_double(row[c_high]), csv::to_double(row[c_low]),
              csv::to_double(row[c_close]), csv::to_double(row[c_volume])};
        if (!(b.close > 0.0))
            throw std::runtime_error("non-positive close for " + tk + " on " + date);
        bars[date][it->second] = b;
        seen_tickers.insert(tk);
        if (c_shares >= 0 && static_cast<int>(row.size()) > c_shares && !row[c_shares].empty()) {
            shares[it->second] = csv::to_double(row[c_shares]);
            shares_seen[it->second] = true;
        }
    }

    for (const auto& tk : tickers)
        if (!seen_tickers.count(tk)) throw std::runtime_error("unknown ticker: " + tk);

    PriceTable out;
    out.tickers = tickers;
    const int d = static_cast<int>(tickers.size());
    for (const auto& [date, per_ticker] : bars) {
        if (static_cast<int>(per_ticker.size()) < d) continue; // inner join
        out.dates.push_back(date);
    }
    if (out.dates.empty())
        throw std::runtime_error("no common dates across requested tickers in " + path);

    const int n = static_cast<int>(out.dates.size());
    out.open = Mat(n, d);
    out.high = Mat(n, d);
    out.low = Mat(n, d);
    out.close = Mat(n, d);
    out.volume = Mat(n, d);
    for (int t = 0; t < n; ++t) {
        const auto& per_ticker = bars.at(out.dates[t]);
        for (int i = 0; i < d; ++i) {
            const Bar& b = per_ticker.at(i);
            out.open(t, i) = b.open;
            out.high(t, i) = b.high;
            out.low(t, i) = b.low;
            out.close(t, i) = b.close;
            out.volume(t, i) = b.volume;
        }
    }
    if (std::all_of(shares_seen.begin(), shares_seen.end(), [](bool b) { return b; }))
        out.shares_outstanding = shares;
    return out;
}

// ---------------------------------------------------------------------------
// Indicators
// ---------------------------------------------------------------------------

namespace detail {

inline Vec ema(const Vec& x, int period) {
    Vec out(x.size());
    const double k = 2.0 / (period + 1.0);
    out[0] = x[0];
    for (size_t t = 1; t < x.size(); ++t) out[t] = out[t - 1] + k * (x[t] - out[t - 1]);
    return out;
}

/// Rolling mean with an expanding window before `period` points exist.
inline Vec rolling_mean(const Vec& x, int period) {
    Vec out(x.size());
    double sum = 0.0;
    for (int t = 0; t < static_cast<int>(x.size()); ++t) {
        sum += x[t];
        if (t >= period) sum -= x[t - period];
        out[t] = sum / std::min(t + 1, period);
    }
    return out;
}

/// Backfill rows before the first fully defined index with that row's value.
/// When the window never fills, the expanding-window values stand.
inline void backfill(Vec& x, int first_defined) {
    if (first_defined <= 0 || first_defined >= static_cast<int>(x.size())) return;
    std::fill(x.begin(), x.begin() + first_defined, x[first_defined]);
}

inline Vec macd(const Vec& close) {
    const Vec fast = ema(close, 12), slow = ema(close, 26);
    Vec out(close.size());
    for (size_t t = 0; t < close.size(); ++t) out[t] = fast[t] - slow[t];
    return out;
}

/// Single normalized Bollinger value (close - SMA20) / (2 * std20); 0 when
/// the window variance vanishes.
inline Vec boll(const Vec& close, int period = 20) {
    const int n = static_cast<int>(close.size());
    Vec out(n);
    for (int t = 0; t < n; ++t) {
        const int lo = std::max(0, t - period + 1);
        Vec window(close.begin() + lo, close.begin() + t + 1);
        const double sd = sample_std(window);
        out[t] = sd > 0.0 ? (close[t] - mean_of(window)) / (2.0 * sd) : 0.0;
    }
    backfill(out, period - 1);
    return out;
}

/// Wilder 14-day RSI; 50 when both average gain and loss are zero.
inline Vec rsi(const Vec& close, int period = 14) {
    const int n = static_cast<int>(close.size());
    Vec out(n, 50.0);
    if (n < 2) return out;
    double up = 0.0, down = 0.0;
    int changes = 0;
    for (int t = 1; t < n; ++t) {
        const double gain = std::max(close[t] - close[t - 1], 0.0);
        const double loss = std::max(close[t - 1] - close[t], 0.0);
        if (changes < period) {
            // arithmetic mean of the first `period` changes, expanding before that
            up = (up * changes + gain) / (changes + 1);
            down = (down * changes + loss) / (changes + 1);
            ++changes;
        } else {
            up = (up * (period - 1) + gain) / period;
            down = (down * (period - 1) + loss) / period;
        }
        out[t] = (up + down > 0.0) ? 100.0 * up / (up + down) : 50.0;
    }
    backfill(out, period);
    return out;
}

inline Vec cci(const Vec& high, const Vec& low, const Vec& close, int period = 20) {
    const int n = static_cast<int>(close.size());
    Vec tp(n);
    for (int t = 0; t < n; ++t) tp[t] = (high[t] + low[t] + close[t]) / 3.0;
    Vec out(n);
    for (int t = 0; t < n; ++t) {
        const int lo = std::max(0, t - period + 1);
        const int w = t - lo + 1;
        double sma = 0.0;
        for (int i = lo; i <= t; ++i) sma += tp[i];
        sma /= w;
        double meandev = 0.0;
        for (int i = lo; i <= t; ++i) meandev += std::fabs(tp[i] - sma);
        meandev /= w;
        out[t] = meandev > 0.0 ? (tp[t] - sma) / (0.015 * meandev) : 0.0;
    }
    backfill(out, period - 1);
    return out;
}

/// Wilder ADX; 0 whenever the smoothed true range or DI sum vanishes.
inline Vec adx(const Vec& high, const Vec& low, const Vec& close, int period = 14) {
    const int n = static_cast<int>(close.size());
    Vec out(n, 0.0);
    if (n < 2) return out;

    Vec dx(n, 0.0);
    double atr = 0.0, dm_up = 0.0, dm_down = 0.0;
    for (int t = 1; t < n; ++t) {
        const double tr = std::max({high[t] - low[t], std::fabs(high[t] - close[t - 1]),
                                    std::fabs(low[t] - close[t - 1])});
        double up = high[t] - high[t - 1];
        double down = low[t - 1] - low[t];
        if (up < 0.0) up = 0.0;
        else if (up > down) down = 0.0;
        if (down < 0.0) down = 0.0;
        else if (down > up) up = 0.0;
        if (t < period) {
            atr += tr;
            dm_up += up;
            dm_down += down;
        } else {
            const double keep = (period - 1.0) / period;
            atr = atr * keep + tr;
            dm_up = dm_up * keep + up;
            dm_down = dm_down * keep + down;
        }
        if (atr > 0.0) {
            const double di_up = dm_up / atr, di_down = dm_down / atr;
            const double di_sum = di_up + di_down;
            dx[t] = di_sum > 0.0 ? 100.0 * std::fabs(di_up - di_down) / di_sum : 0.0;
        }
    }
    // Wilder-smooth the DX stream, expanding mean until `period` values exist
    double adx_val = 0.0;
    int seen = 0;
    for (int t = 1; t < n; ++t) {
        if (seen < period) {
            adx_val = (adx_val * seen + dx[t]) / (seen + 1);
            ++seen;
        } else {
            adx_val = (adx_val * (period - 1) + dx[t]) / period;
        }
        out[t] = adx_val;
    }
    backfill(out, 2 * (period - 1));
    return out;
}

} // namespace detail

/// Seven indicators per ticker. Warm-up rows are backfilled with the first
/// fully defined value, so the value at day t is causal only for
/// t >= the longest warm-up (59 rows, SMA60).
inline IndicatorTable compute_indicators(const PriceTable& prices) {
    const int n = prices.days(), d = prices.num_stocks();
    if (n < 1) throw std::invalid_argument("empty price table");
    IndicatorTable out;
    out.values = Mat(n, d * IndicatorTable::kPerStock);

    for (int i = 0; i < d; ++i) {
        Vec close(n), high(n), low(n);
        for (int t = 0; t < n; ++t) {
            close[t] = prices.close(t, i);
            high[t] = prices.high(t, i);
            low[t] = prices.low(t, i);
        }
        Vec sma30 = detail::rolling_mean(close, 30);
        detail::backfill(sma30, 29);
        Vec sma60 = detail::rolling_mean(close, 60);
        detail::backfill(sma60, 59);
        const Vec cols[IndicatorTable::kPerStock] = {
            detail::macd(close), sma30, sma60, detail::boll(close),
            detail::rsi(close),  detail::cci(high, low, close), detail::adx(high, low, close)};
        for (int k = 0; k < IndicatorTable::kPerStock; ++k)
            for (int t = 0; t < n; ++t) out.values(t, i * IndicatorTable::kPerStock + k) = cols[k][t];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stock selection and splits
// ---------------------------------------------------------------------------

struct TurnoverEntry {
    std::string ticker;
    double turnover;
};

/// Mean turnover over the trailing `window_days`, sorted ascending (the
/// selection criterion favors low turnover). Without shares outstanding the
/// volume is normalized by its window maximum instead.
inline std::vector<TurnoverEntry> rank_by_turnover(const PriceTable& prices, int window_days) {
    const int n = prices.days(), d = prices.num_stocks();
    if (window_days > n) throw std::invalid_argument("turnover window longer than history");
    std::vector<TurnoverEntry> out;
    for (int i = 0; i < d; ++i) {
        double denom;
        if (prices.has_shares_outstanding()) {
            denom = prices.shares_outstanding[i];
        } else {
            denom = 0.0;
            for (int t = n - window_days; t < n; ++t) denom = std::max(denom, prices.volume(t, i));
            if (denom == 0.0) denom = 1.0;
        }
        double acc = 0.0;
        for (int t = n - window_days; t < n; ++t) acc += prices.volume(t, i) / denom;
        out.push_back({prices.tickers[i], acc / window_days});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const TurnoverEntry& a, const TurnoverEntry& b) { return a.turnover < b.turnover; });
    return out;
}

/// Contiguous train/val/test ranges: train covers dates <= train_end, val
/// covers dates <= val_end, test the remainder.
inline DatasetSplit split_dataset(const PriceTable& prices, const std::string& train_end,
                                  const std::string& val_end) {
    if (!(train_end < val_end)) throw std::invalid_argument("train_end must precede val_end");
    DatasetSplit s;
    const int n = prices.days();
    s.train_begin = 0;
    s.train_end = 0;
    s.val_end = 0;
    s.test_end = n;
    for (int t = 0; t < n; ++t) {
        if (prices.dates[t] <= train_end) s.train_end = t + 1;
        if (prices.dates[t] <= val_end) s.val_end = t + 1;
    }
    if (s.train_end == 0 || s.val_end <= s.train_end || s.val_end >= n)
        throw std::invalid_argument("split boundaries outside data range");
    return s;
}

/// Indicator output CSV mirroring the input: one row per (date, ticker).
inline void write_indicator_csv(const std::string& path, const PriceTable& prices,
                                const IndicatorTable& ind) {
    csv::Writer w(path);
    std::vector<std::string> header = {"date", "ticker"};
    for (const char* name : kIndicatorNames) header.push_back(name);
    w.row(header);
    for (int t = 0; t < prices.days(); ++t)
        for (int i = 0; i < prices.num_stocks(); ++i) {
            std::vector<std::string> row = {prices.dates[t], prices.tickers[i]};
            for (int k = 0; k < IndicatorTable::kPerStock; ++k)
                row.push_back(csv::num(ind.at(t, i, k)));
            w.row(row);
        }
}

} // namespace mbnf
