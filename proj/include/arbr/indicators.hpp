#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbr/core.hpp"
#include "arbr/data.hpp"

namespace arbr::indicators {

using data::ColumnStats;
using data::GroupBar;

// ---------------------------------------------------------------------------
// ARBR sentiment pair
//
// AR compares intraday range to the open, BR to the previous close. Both are
// ratio statistics on a trailing period of N bars, scaled to percent.
// ---------------------------------------------------------------------------

struct IndicatorWindow {
    int n = 26;                      // period N; the most recent n bars are used
    std::span<const GroupBar> bars;  // >= n for ar; >= n+1 for br (previous closes)
};

// 100 * sum(high - open) / sum(open - low) over the last n bars
inline double ar(const IndicatorWindow& w) {
    if (w.n < 1) throw Error(ErrorKind::Config, "ar: period must be >= 1");
    if (w.bars.size() < static_cast<std::size_t>(w.n))
        throw Error(ErrorKind::InsufficientHistory, "ar: window shorter than period");
    double num = 0.0, den = 0.0;
    for (std::size_t i = w.bars.size() - static_cast<std::size_t>(w.n); i < w.bars.size(); ++i) {
        num += w.bars[i].high - w.bars[i].open;
        den += w.bars[i].open - w.bars[i].low;
    }
    if (den <= 0.0) throw Error(ErrorKind::Degenerate, "ar: zero denominator (all opens at lows)");
    return 100.0 * num / den;
}

// 100 * sum(high - prev_close) / sum(prev_close - low); summands may be
// negative and are kept as-is.
inline double br(const IndicatorWindow& w) {
    if (w.n < 1) throw Error(ErrorKind::Config, "br: period must be >= 1");
    if (w.bars.size() < static_cast<std::size_t>(w.n) + 1)
        throw Error(ErrorKind::InsufficientHistory, "br: no previous close for first element");
    double num = 0.0, den = 0.0;
    for (std::size_t i = w.bars.size() - static_cast<std::size_t>(w.n); i < w.bars.size(); ++i) {
        const double prev_close = w.bars[i - 1].close;
        num += w.bars[i].high - prev_close;
        den += prev_close - w.bars[i].low;
    }
    if (den <= 0.0) throw Error(ErrorKind::Degenerate, "br: zero denominator");
    return 100.0 * num / den;
}

// ---------------------------------------------------------------------------
// Rolling indicators. Lookback-bearing outputs omit undefined positions:
// the returned vector's element i corresponds to input index i + n - 1.
// ---------------------------------------------------------------------------

inline std::vector<double> sma(std::span<const double> prices, int n) {
    if (n < 1) throw Error(ErrorKind::Config, "sma: period must be >= 1");
    if (static_cast<std::size_t>(n) > prices.size())
        throw Error(ErrorKind::InsufficientHistory, "sma: period exceeds series length");
    std::vector<double> out;
    out.reserve(prices.size() - n + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        acc += prices[i];
        if (i + 1 >= static_cast<std::size_t>(n)) {
            out.push_back(acc / n);
            acc -= prices[i + 1 - n];
        }
    }
    return out;
}

// Recursive smoothing with multiplier 2/(n+1), seeded with the first price.
inline std::vector<double> ema(std::span<const double> prices, int n) {
    if (n < 1) throw Error(ErrorKind::Config, "ema: period must be >= 1");
    std::vector<double> out;
    if (prices.empty()) return out;
    out.reserve(prices.size());
    const double m = 2.0 / (n + 1.0);
    double e = prices[0];
    out.push_back(e);
    for (std::size_t i = 1; i < prices.size(); ++i) {
        e = m * prices[i] + (1.0 - m) * e;
        out.push_back(e);
    }
    return out;
}

struct MacdResult {
    std::vector<double> dif;   // ema(fast) - ema(slow)
    std::vector<double> dea;   // ema(signal) of dif
    std::vector<double> hist;  // 2 * (dif - dea)
};

inline MacdResult macd(std::span<const double> prices, int fast = 12, int slow = 26, int signal = 9) {
    MacdResult r;
    if (prices.empty()) return r;
    const auto ef = ema(prices, fast);
    const auto es = ema(prices, slow);
    r.dif.resize(prices.size());
    for (std::size_t i = 0; i < prices.size(); ++i) r.dif[i] = ef[i] - es[i];
    r.dea = ema(r.dif, signal);
    r.hist.resize(prices.size());
    for (std::size_t i = 0; i < prices.size(); ++i) r.hist[i] = 2.0 * (r.dif[i] - r.dea[i]);
    return r;
}

struct BollingerResult {
    std::vector<double> mid, upper, lower;  // element i <-> input index i + n - 1
};

inline BollingerResult bollinger(std::span<const double> prices, int n = 20, double k = 2.0) {
    if (n < 2) throw Error(ErrorKind::Config, "bollinger: period must be >= 2");
    if (static_cast<std::size_t>(n) > prices.size())
        throw Error(ErrorKind::InsufficientHistory, "bollinger: period exceeds series length");
    BollingerResult r;
    r.mid = sma(prices, n);
    r.upper.reserve(r.mid.size());
    r.lower.reserve(r.mid.size());
    for (std::size_t t = 0; t < r.mid.size(); ++t) {
        double s2 = 0.0;
        for (std::size_t j = t; j < t + static_cast<std::size_t>(n); ++j) {
            const double d = prices[j] - r.mid[t];
            s2 += d * d;
        }
        const double sd = std::sqrt(s2 / n);
        r.upper.push_back(r.mid[t] + k * sd);
        r.lower.push_back(r.mid[t] - k * sd);
    }
    return r;
}

// 100 * (price - sma_n) / sma_n
inline std::vector<double> bias(std::span<const double> prices, int n) {
    const auto m = sma(prices, n);
    std::vector<double> out;
    out.reserve(m.size());
    for (std::size_t t = 0; t < m.size(); ++t) {
        if (m[t] == 0.0) throw Error(ErrorKind::Domain, "bias: zero moving average");
        out.push_back(100.0 * (prices[t + n - 1] - m[t]) / m[t]);
    }
    return out;
}

inline std::vector<double> volume_ma(std::span<const double> volumes, int n) {
    return sma(volumes, n);
}

// ---------------------------------------------------------------------------
// Feature matrix (row per time, newest-first; column per indicator)
// ---------------------------------------------------------------------------

struct FeatureMatrix {
    std::vector<std::string> columns;
    std::vector<data::Minute> dates;  // end_ts per row, newest-first
    Matrix values;                    // row 0 = newest
    std::size_t first_group_index = 0;
    std::vector<ColumnStats> normalization;  // non-empty once z-scored

    std::size_t rows() const { return values.rows; }
    std::size_t cols() const { return values.cols; }

    // row index for group g (rows are newest-first)
    std::size_t row_of_group(std::size_t g) const {
        return values.rows - 1 - (g - first_group_index);
    }
    std::size_t group_of_row(std::size_t i) const {
        return first_group_index + (values.rows - 1 - i);
    }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t j = 0; j < columns.size(); ++j)
            if (columns[j] == name) return j;
        throw Error(ErrorKind::Config, "unknown column '" + name + "'");
    }
};

inline const std::vector<std::string>& default_columns() {
    static const std::vector<std::string> cols = {
        "open", "close", "high", "low", "volume", "money",
        "ma5", "ma10", "ma20", "ema12", "ema26",
        "macd_dif", "macd_dea", "macd_hist",
        "boll_mid", "boll_upper", "boll_lower",
        "bias6", "bias12", "bias24", "vol10", "vol20", "ar", "br"};
    return cols;
}

struct FeatureConfig {
    std::vector<std::string> columns = default_columns();
    int macd_fast = 12, macd_slow = 26, macd_signal = 9;
    int boll_n = 20;
    double boll_k = 2.0;
    int arbr_period = 26;
    bool arbr_daily = false;  // compute ARBR on daily aggregates, broadcast by previous completed day
    bool normalize = true;    // z-score every column over the emitted rows
};

namespace detail {

struct Column {
    std::size_t start = 0;  // first group index at which the value exists
    std::vector<double> v;  // v[i] <-> group index start + i
};

// ARBR per group. In daily mode each group carries the value of the most
// recent fully completed day, so no group sees its own day's future bars.
inline std::pair<Column, Column> arbr_columns(std::span<const GroupBar> groups, const FeatureConfig& cfg) {
    Column car, cbr;
    const int n = cfg.arbr_period;
    if (!cfg.arbr_daily) {
        car.start = static_cast<std::size_t>(n);  // aligned with br, which needs one extra bar
        cbr.start = static_cast<std::size_t>(n);
        for (std::size_t t = car.start; t < groups.size(); ++t) {
            IndicatorWindow w{n, groups.subspan(0, t + 1)};
            car.v.push_back(ar(w));
            cbr.v.push_back(br(w));
        }
        return {car, cbr};
    }
    const auto days = data::aggregate_daily(groups);
    // ar/br value of the day window ending at day index d
    std::vector<double> day_ar(days.size()), day_br(days.size());
    std::vector<bool> day_ok(days.size(), false);
    for (std::size_t d = static_cast<std::size_t>(n); d < days.size(); ++d) {
        IndicatorWindow w{n, std::span<const GroupBar>(days.data(), d + 1)};
        day_ar[d] = ar(w);
        day_br[d] = br(w);
        day_ok[d] = true;
    }
    // map each group to its day index, then broadcast day - 1
    std::size_t d = 0;
    bool started = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        while (d + 1 < days.size() && data::day_of(groups[g].start_ts) > data::day_of(days[d].start_ts)) ++d;
        if (d == 0 || !day_ok[d - 1]) continue;
        if (!started) {
            car.start = cbr.start = g;
            started = true;
        }
        car.v.push_back(day_ar[d - 1]);
        cbr.v.push_back(day_br[d - 1]);
    }
    if (!started)
        throw Error(ErrorKind::InsufficientHistory, "ar/br: not enough completed days for period");
    return {car, cbr};
}

inline int parse_suffix_period(const std::string& name, const std::string& prefix) {
    const std::string digits = name.substr(prefix.size());
    if (digits.empty()) throw Error(ErrorKind::Config, "column '" + name + "': missing period");
    int n = 0;
    for (char c : digits) {
        if (c < '0' || c > '9') throw Error(ErrorKind::Config, "column '" + name + "': bad period");
        n = n * 10 + (c - '0');
    }
    if (n < 1) throw Error(ErrorKind::Config, "column '" + name + "': period must be >= 1");
    return n;
}

}  // namespace detail

inline FeatureMatrix build_feature_matrix(std::span<const GroupBar> groups, const FeatureConfig& cfg) {
    if (groups.empty()) throw Error(ErrorKind::InsufficientData, "build_feature_matrix: no groups");
    std::vector<double> close(groups.size()), open(groups.size()), high(groups.size()),
        low(groups.size()), volume(groups.size()), money(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        open[i] = groups[i].open;
        close[i] = groups[i].close;
        high[i] = groups[i].high;
        low[i] = groups[i].low;
        volume[i] = groups[i].volume;
        money[i] = groups[i].money;
    }

    std::optional<MacdResult> macd_cache;
    std::optional<BollingerResult> boll_cache;
    std::optional<std::pair<detail::Column, detail::Column>> arbr_cache;
    auto macd_r = [&]() -> const MacdResult& {
        if (!macd_cache) macd_cache = macd(close, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
        return *macd_cache;
    };
    auto boll_r = [&]() -> const BollingerResult& {
        if (!boll_cache) boll_cache = bollinger(close, cfg.boll_n, cfg.boll_k);
        return *boll_cache;
    };
    auto arbr_r = [&]() -> const std::pair<detail::Column, detail::Column>& {
        if (!arbr_cache) arbr_cache = detail::arbr_columns(groups, cfg);
        return *arbr_cache;
    };

    auto starts_with = [](const std::string& s, const char* p) {
        return s.rfind(p, 0) == 0;
    };

    std::vector<detail::Column> cols;
    cols.reserve(cfg.columns.size());
    for (const auto& name : cfg.columns) {
        detail::Column c;
        try {
            if (name == "open") c = {0, open};
            else if (name == "close") c = {0, close};
            else if (name == "high") c = {0, high};
            else if (name == "low") c = {0, low};
            else if (name == "volume") c = {0, volume};
            else if (name == "money") c = {0, money};
            else if (name == "macd_dif") c = {0, macd_r().dif};
            else if (name == "macd_dea") c = {0, macd_r().dea};
            else if (name == "macd_hist") c = {0, macd_r().hist};
            else if (name == "boll_mid") c = {static_cast<std::size_t>(cfg.boll_n - 1), boll_r().mid};
            else if (name == "boll_upper") c = {static_cast<std::size_t>(cfg.boll_n - 1), boll_r().upper};
            else if (name == "boll_lower") c = {static_cast<std::size_t>(cfg.boll_n - 1), boll_r().lower};
            else if (name == "ar") c = arbr_r().first;
            else if (name == "br") c = arbr_r().second;
            else if (starts_with(name, "ema")) {
                const int n = detail::parse_suffix_period(name, "ema");
                c = {0, ema(close, n)};
            } else if (starts_with(name, "bias")) {
                const int n = detail::parse_suffix_period(name, "bias");
                c = {static_cast<std::size_t>(n - 1), bias(close, n)};
            } else if (starts_with(name, "vol")) {
                const int n = detail::parse_suffix_period(name, "vol");
                c = {static_cast<std::size_t>(n - 1), volume_ma(volume, n)};
            } else if (starts_with(name, "ma")) {
                const int n = detail::parse_suffix_period(name, "ma");
                c = {static_cast<std::size_t>(n - 1), sma(close, n)};
            } else {
                throw Error(ErrorKind::Config, "unknown column '" + name + "'");
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::InsufficientHistory)
                throw Error(ErrorKind::InsufficientHistory, "column '" + name + "': " + e.what());
            throw;
        }
        cols.push_back(std::move(c));
    }

    std::size_t warmup = 0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j].start > warmup) warmup = cols[j].start;
        if (cols[j].start >= groups.size() || cols[j].v.empty())
            throw Error(ErrorKind::InsufficientHistory, "column '" + cfg.columns[j] + "': no defined rows");
    }
    if (warmup >= groups.size())
        throw Error(ErrorKind::InsufficientHistory, "not enough groups for configured indicators");

    FeatureMatrix fm;
    fm.columns = cfg.columns;
    fm.first_group_index = warmup;
    const std::size_t n_rows = groups.size() - warmup;
    fm.values = Matrix(n_rows, cols.size());
    fm.dates.reserve(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        const std::size_t g = warmup + (n_rows - 1 - i);  // newest-first
        fm.dates.push_back(groups[g].end_ts);
        for (std::size_t j = 0; j < cols.size(); ++j)
            fm.values(i, j) = cols[j].v[g - cols[j].start];
    }

    if (cfg.normalize) {
        fm.normalization.reserve(cols.size());
        std::vector<double> col(n_rows);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            for (std::size_t i = 0; i < n_rows; ++i) col[i] = fm.values(i, j);
            const ColumnStats st = data::fit_stats(col);
            if (st.std == 0.0)
                throw Error(ErrorKind::Degenerate, "column '" + fm.columns[j] + "' is constant");
            for (std::size_t i = 0; i < n_rows; ++i) fm.values(i, j) = data::apply_zscore(st, fm.values(i, j));
            fm.normalization.push_back(st);
        }
    }
    return fm;
}

// Pearson coefficients; symmetric with unit diagonal.
inline Matrix correlation_matrix(const FeatureMatrix& fm) {
    const std::size_t n = fm.rows(), d = fm.cols();
    if (n < 2) throw Error(ErrorKind::InsufficientData, "correlation_matrix: need >= 2 rows");
    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) mu[j] += fm.values(i, j);
        mu[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = fm.values(i, j) - mu[j];
            sd[j] += t * t;
        }
        sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
        if (sd[j] == 0.0)
            throw Error(ErrorKind::Degenerate, "column '" + fm.columns[j] + "' is constant");
    }
    Matrix r(d, d);
    for (std::size_t a = 0; a < d; ++a) {
        r(a, a) = 1.0;
        for (std::size_t b = a + 1; b < d; ++b) {
            double cov = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                cov += (fm.values(i, a) - mu[a]) * (fm.values(i, b) - mu[b]);
            cov /= static_cast<double>(n);
            double rho = cov / (sd[a] * sd[b]);
            if (rho > 1.0) rho = 1.0;
            if (rho < -1.0) rho = -1.0;
            r(a, b) = rho;
            r(b, a) = rho;
        }
    }
    return r;
}

}  // namespace arbr::indicators
