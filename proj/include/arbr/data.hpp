#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbr/core.hpp"
#include "arbr/io.hpp"

namespace arbr::data {

// ---------------------------------------------------------------------------
// Timestamps: minutes since the Unix epoch, parsed from "YYYY-MM-DD HH:MM"
// local exchange time. No timezone arithmetic anywhere.
// ---------------------------------------------------------------------------

using Minute = std::int64_t;

// Howard Hinnant's civil-date algorithms.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month, day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

inline Minute parse_datetime(const std::string& s) {
    int y, mo, d, h, mi;
    char c1, c2, c3;
    std::istringstream is(s);
    is >> y >> c1 >> mo >> c2 >> d >> h >> c3 >> mi;
    if (is.fail() || c1 != '-' || c2 != '-' || c3 != ':' ||
        mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59) {
        throw Error(ErrorKind::Validation, "invalid datetime '" + s + "' (expected YYYY-MM-DD HH:MM)");
    }
    return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 1440 + h * 60 + mi;
}

inline std::string format_datetime(Minute ts) {
    std::int64_t days = ts >= 0 ? ts / 1440 : (ts - 1439) / 1440;
    const int minute_of_day = static_cast<int>(ts - days * 1440);
    const CivilDate cd = civil_from_days(days);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d",
                  cd.year, cd.month, cd.day, minute_of_day / 60, minute_of_day % 60);
    return buf;
}

inline std::int64_t day_of(Minute ts) { return ts >= 0 ? ts / 1440 : (ts - 1439) / 1440; }

// ---------------------------------------------------------------------------
// Bars
// ---------------------------------------------------------------------------

struct MinuteBar {
    Minute ts;
    double open, high, low, close;
    double volume, money;
};

struct GroupBar {
    Minute start_ts, end_ts;
    double open, high, low, close;  // open/close from the first/last member exactly
    double volume, money;           // sums over members
    int n_members;
};

struct ReturnWindow {
    std::vector<double> values;  // values[j] = ln(close_{t-w+1+j} / close_{t-w+j})
};

// Logical field -> CSV header name (matched case-insensitively).
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string open = "open";
    std::string high = "high";
    std::string low = "low";
    std::string close = "close";
    std::string volume = "volume";
    std::string money = "money";
};

// ---------------------------------------------------------------------------
// CSV parsing
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_number(const std::string& s, int line_no, const char* what) {
    const std::string t = trim(s);
    if (t.empty()) throw Error(ErrorKind::Validation, "line " + std::to_string(line_no) + ": empty " + std::string(what));
    char* end = nullptr;
    const double x = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(x)) {
        throw Error(ErrorKind::Validation,
                    "line " + std::to_string(line_no) + ": malformed " + std::string(what) + " '" + t + "'");
    }
    return x;
}

}  // namespace detail

inline void validate_bar(const MinuteBar& b, int line_no) {
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (b.open < 0 || b.high < 0 || b.low < 0 || b.close < 0)
        throw Error(ErrorKind::Validation, where + "negative price");
    if (b.volume < 0) throw Error(ErrorKind::Validation, where + "negative volume");
    if (b.money < 0) throw Error(ErrorKind::Validation, where + "negative money");
    if (b.high < b.low) throw Error(ErrorKind::Validation, where + "high < low");
    if (b.open < b.low || b.open > b.high)
        throw Error(ErrorKind::Validation, where + "open outside [low, high]");
    if (b.close < b.low || b.close > b.high)
        throw Error(ErrorKind::Validation, where + "close outside [low, high]");
}

inline std::vector<MinuteBar> parse_minute_csv(std::istream& in, const CsvSchema& schema = {}) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Schema, "empty input: missing header row");

    const auto headers = split_csv_line(line);
    auto find_col = [&](const std::string& name) -> std::size_t {
        const std::string want = lowercase(trim(name));
        for (std::size_t i = 0; i < headers.size(); ++i) {
            if (lowercase(trim(headers[i])) == want) return i;
        }
        throw Error(ErrorKind::Schema, "missing column '" + name + "'");
    };

    const std::size_t c_ts = find_col(schema.timestamp);
    const std::size_t c_open = find_col(schema.open);
    const std::size_t c_high = find_col(schema.high);
    const std::size_t c_low = find_col(schema.low);
    const std::size_t c_close = find_col(schema.close);
    const std::size_t c_vol = find_col(schema.volume);
    const std::size_t c_money = find_col(schema.money);
    const std::size_t need = 1 + std::max({c_ts, c_open, c_high, c_low, c_close, c_vol, c_money});

    std::vector<MinuteBar> bars;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() < need) {
            throw Error(ErrorKind::Validation,
                        "line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(need) + " fields, got " + std::to_string(f.size()));
        }
        MinuteBar b{};
        try {
            b.ts = parse_datetime(trim(f[c_ts]));
        } catch (const Error& e) {
            throw Error(ErrorKind::Validation, "line " + std::to_string(line_no) + ": " + e.what());
        }
        b.open = detail::parse_number(f[c_open], line_no, "open");
        b.high = detail::parse_number(f[c_high], line_no, "high");
        b.low = detail::parse_number(f[c_low], line_no, "low");
        b.close = detail::parse_number(f[c_close], line_no, "close");
        b.volume = detail::parse_number(f[c_vol], line_no, "volume");
        b.money = detail::parse_number(f[c_money], line_no, "money");
        validate_bar(b, line_no);
        if (!bars.empty() && b.ts <= bars.back().ts) {
            throw Error(ErrorKind::Ordering,
                        "line " + std::to_string(line_no) + ": timestamp not strictly increasing");
        }
        bars.push_back(b);
    }
    return bars;
}

inline std::string write_minute_csv(std::span<const MinuteBar> bars) {
    std::string out = "timestamp,open,high,low,close,volume,money\n";
    for (const auto& b : bars) {
        out += format_datetime(b.ts);
        out += ',';
        out += fmt_g17(b.open); out += ',';
        out += fmt_g17(b.high); out += ',';
        out += fmt_g17(b.low); out += ',';
        out += fmt_g17(b.close); out += ',';
        out += fmt_g17(b.volume); out += ',';
        out += fmt_g17(b.money); out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grouping
// ---------------------------------------------------------------------------

// Aggregates consecutive bars into groups of group_len. A trailing partial
// group is kept, flagged by n_members < group_len. When reset_at_day_boundary
// is set a new group also starts whenever the calendar date changes.
inline std::vector<GroupBar> group_bars(std::span<const MinuteBar> bars, int group_len,
                                        bool reset_at_day_boundary = false) {
    if (group_len < 1) throw Error(ErrorKind::Config, "group_len must be >= 1");
    std::vector<GroupBar> out;
    GroupBar cur{};
    int count = 0;
    for (const auto& b : bars) {
        const bool day_break = reset_at_day_boundary && count > 0 && day_of(b.ts) != day_of(cur.end_ts);
        if (count == group_len || day_break) {
            out.push_back(cur);
            count = 0;
        }
        if (count == 0) {
            cur = GroupBar{b.ts, b.ts, b.open, b.high, b.low, b.close, b.volume, b.money, 1};
        } else {
            cur.end_ts = b.ts;
            cur.high = std::max(cur.high, b.high);
            cur.low = std::min(cur.low, b.low);
            cur.close = b.close;
            cur.volume += b.volume;
            cur.money += b.money;
            cur.n_members += 1;
        }
        count = cur.n_members;
    }
    if (count > 0) out.push_back(cur);
    return out;
}

inline std::string write_group_csv(std::span<const GroupBar> groups) {
    std::string out = "start_ts,end_ts,open,high,low,close,volume,money,n_members\n";
    for (const auto& g : groups) {
        out += format_datetime(g.start_ts); out += ',';
        out += format_datetime(g.end_ts); out += ',';
        out += fmt_g17(g.open); out += ',';
        out += fmt_g17(g.high); out += ',';
        out += fmt_g17(g.low); out += ',';
        out += fmt_g17(g.close); out += ',';
        out += fmt_g17(g.volume); out += ',';
        out += fmt_g17(g.money); out += ',';
        out += std::to_string(g.n_members); out += '\n';
    }
    return out;
}

inline std::vector<GroupBar> parse_group_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Schema, "empty input: missing header row");
    if (lowercase(trim(line)) != "start_ts,end_ts,open,high,low,close,volume,money,n_members")
        throw Error(ErrorKind::Schema, "unexpected group CSV header");
    std::vector<GroupBar> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() < 9)
            throw Error(ErrorKind::Validation, "line " + std::to_string(line_no) + ": too few fields");
        GroupBar g{};
        g.start_ts = parse_datetime(trim(f[0]));
        g.end_ts = parse_datetime(trim(f[1]));
        g.open = detail::parse_number(f[2], line_no, "open");
        g.high = detail::parse_number(f[3], line_no, "high");
        g.low = detail::parse_number(f[4], line_no, "low");
        g.close = detail::parse_number(f[5], line_no, "close");
        g.volume = detail::parse_number(f[6], line_no, "volume");
        g.money = detail::parse_number(f[7], line_no, "money");
        g.n_members = static_cast<int>(detail::parse_number(f[8], line_no, "n_members"));
        out.push_back(g);
    }
    return out;
}

// Merge groups into one bar per calendar date (date of start_ts).
inline std::vector<GroupBar> aggregate_daily(std::span<const GroupBar> groups) {
    std::vector<GroupBar> out;
    for (const auto& g : groups) {
        if (!out.empty() && day_of(out.back().start_ts) == day_of(g.start_ts)) {
            GroupBar& d = out.back();
            d.end_ts = g.end_ts;
            d.high = std::max(d.high, g.high);
            d.low = std::min(d.low, g.low);
            d.close = g.close;
            d.volume += g.volume;
            d.money += g.money;
            d.n_members += g.n_members;
        } else {
            out.push_back(g);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Returns and normalization
// ---------------------------------------------------------------------------

inline ReturnWindow log_return_window(std::span<const GroupBar> groups, std::size_t t,
                                      std::size_t window = 8) {
    if (window < 1) throw Error(ErrorKind::Config, "window must be >= 1");
    if (t >= groups.size()) throw Error(ErrorKind::Contract, "index out of range");
    if (t < window)
        throw Error(ErrorKind::InsufficientHistory,
                    "log_return_window: need t >= window (" + std::to_string(window) + ")");
    ReturnWindow w;
    w.values.reserve(window);
    for (std::size_t j = 0; j < window; ++j) {
        const double prev = groups[t - window + j].close;
        const double cur = groups[t - window + 1 + j].close;
        if (!(prev > 0.0) || !(cur > 0.0))
            throw Error(ErrorKind::Domain, "log_return_window: non-positive close");
        w.values.push_back(std::log(cur / prev));
    }
    return w;
}

struct ColumnStats {
    double mean = 0.0;
    double std = 0.0;  // population
};

inline ColumnStats fit_stats(std::span<const double> xs) {
    if (xs.size() < 2) throw Error(ErrorKind::InsufficientData, "zscore: need at least 2 values");
    double mu = 0.0;
    for (double x : xs) mu += x;
    mu /= static_cast<double>(xs.size());
    double s2 = 0.0;
    for (double x : xs) s2 += (x - mu) * (x - mu);
    const double sigma = std::sqrt(s2 / static_cast<double>(xs.size()));
    return {mu, sigma};
}

inline double apply_zscore(const ColumnStats& st, double x) { return (x - st.mean) / st.std; }

// (x - mean) / population std
inline std::vector<double> zscore(std::span<const double> xs) {
    const ColumnStats st = fit_stats(xs);
    if (st.std == 0.0) throw Error(ErrorKind::Degenerate, "zscore: constant series (zero std)");
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(apply_zscore(st, x));
    return out;
}

}  // namespace arbr::data
