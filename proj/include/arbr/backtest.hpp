#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbr/core.hpp"
#include "arbr/data.hpp"
#include "arbr/io.hpp"

namespace arbr::backtest {

using data::GroupBar;
using data::Minute;

// ---------------------------------------------------------------------------
// Portfolio and fills. Execution is ideal: fills at the group close, fees a
// flat fraction of notional, long-only, no slippage.
// ---------------------------------------------------------------------------

struct Portfolio {
    double cash = 100000.0;
    long long shares = 0;
    double fee_rate = 0.001;
    double trade_fraction = 1.0;  // fraction of cash committed per buy
};

enum class Side { Buy, Sell };

struct Fill {
    Minute ts = 0;
    Side side = Side::Buy;
    double price = 0.0;
    long long quantity = 0;
    double fee = 0.0;  // price * quantity * fee_rate exactly
    std::optional<bool> correct;
    std::size_t bar_index = 0;
};

// Applies one action at the bar close. Buys commit trade_fraction of cash
// (integer shares, fee included in the budget); sells liquidate everything.
// Unfillable actions degrade to hold.
inline std::optional<Fill> step(Portfolio& pf, int action, const GroupBar& bar,
                                std::size_t bar_index = 0) {
    if (action < -1 || action > 1)
        throw Error(ErrorKind::Domain, "step: action outside {-1,0,1}");
    const double price = bar.close;
    if (action == 1) {
        if (!(price > 0.0)) return std::nullopt;
        const double budget = pf.trade_fraction * pf.cash;
        long long qty = static_cast<long long>(std::floor(budget / (price * (1.0 + pf.fee_rate))));
        while (qty > 0 && price * static_cast<double>(qty) * (1.0 + pf.fee_rate) > pf.cash) --qty;
        if (qty < 1) return std::nullopt;
        const double fee = price * static_cast<double>(qty) * pf.fee_rate;
        pf.cash -= price * static_cast<double>(qty) + fee;
        pf.shares += qty;
        return Fill{bar.end_ts, Side::Buy, price, qty, fee, std::nullopt, bar_index};
    }
    if (action == -1) {
        if (pf.shares <= 0) return std::nullopt;
        const long long qty = pf.shares;
        const double fee = price * static_cast<double>(qty) * pf.fee_rate;
        pf.cash += price * static_cast<double>(qty) - fee;
        pf.shares = 0;
        return Fill{bar.end_ts, Side::Sell, price, qty, fee, std::nullopt, bar_index};
    }
    return std::nullopt;
}

// Price-difference reward and its running total.
inline double reward(double p_t, double p_prev) {
    if (!std::isfinite(p_t) || !std::isfinite(p_prev))
        throw Error(ErrorKind::Domain, "reward: non-finite price");
    return p_t - p_prev;
}

inline double cumulative_reward(std::span<const double> rewards) {
    double s = 0.0;
    for (double r : rewards) s += r;
    return s;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Compound annualization of the equity curve, in percent.
inline double annualized_return(std::span<const double> curve, double periods_per_year) {
    if (curve.size() < 2) throw Error(ErrorKind::InsufficientData, "annualized_return: need >= 2 points");
    if (!(curve.front() > 0.0)) throw Error(ErrorKind::Domain, "annualized_return: non-positive initial equity");
    for (double e : curve)
        if (!(e > 0.0)) throw Error(ErrorKind::Domain, "annualized_return: non-positive equity");
    const double total = curve.back() / curve.front();
    const double periods = static_cast<double>(curve.size() - 1);
    return (std::pow(total, periods_per_year / periods) - 1.0) * 100.0;
}

// Linear scaling of the total return instead of compounding.
inline double annualized_return_simple(std::span<const double> curve, double periods_per_year) {
    if (curve.size() < 2) throw Error(ErrorKind::InsufficientData, "annualized_return: need >= 2 points");
    if (!(curve.front() > 0.0)) throw Error(ErrorKind::Domain, "annualized_return: non-positive initial equity");
    const double periods = static_cast<double>(curve.size() - 1);
    return (curve.back() / curve.front() - 1.0) * (periods_per_year / periods) * 100.0;
}

// sqrt(periods_per_year) * (mean - rf) / population std of per-period returns.
inline double sharpe_ratio(std::span<const double> period_returns, double risk_free_per_period,
                           double periods_per_year) {
    if (period_returns.size() < 2)
        throw Error(ErrorKind::InsufficientData, "sharpe_ratio: need >= 2 returns");
    double mu = 0.0;
    for (double r : period_returns) mu += r;
    mu /= static_cast<double>(period_returns.size());
    double s2 = 0.0;
    for (double r : period_returns) s2 += (r - mu) * (r - mu);
    const double sd = std::sqrt(s2 / static_cast<double>(period_returns.size()));
    if (sd == 0.0) throw Error(ErrorKind::Degenerate, "sharpe_ratio: zero return variance");
    return std::sqrt(periods_per_year) * (mu - risk_free_per_period) / sd;
}

struct AccuracyCounts {
    long long buy_placed = 0, buy_correct = 0;
    long long sell_placed = 0, sell_correct = 0;
    long long unscored = 0;
};

// A buy is correct when the close `horizon` bars later is above the fill
// price, a sell when it is below; ties count as incorrect. Fills without a
// successor inside the horizon stay unscored.
inline AccuracyCounts order_accuracy(std::vector<Fill>& fills, std::span<const GroupBar> groups,
                                     int horizon = 1) {
    if (horizon < 1) throw Error(ErrorKind::Config, "order_accuracy: horizon must be >= 1");
    AccuracyCounts acc;
    for (auto& f : fills) {
        if (f.side == Side::Buy) ++acc.buy_placed; else ++acc.sell_placed;
        const std::size_t target = f.bar_index + static_cast<std::size_t>(horizon);
        if (target >= groups.size()) {
            ++acc.unscored;
            f.correct.reset();
            continue;
        }
        const double later = groups[target].close;
        const bool ok = f.side == Side::Buy ? later > f.price : later < f.price;
        f.correct = ok;
        if (ok) (f.side == Side::Buy ? acc.buy_correct : acc.sell_correct) += 1;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Kupiec proportion-of-failures test
// ---------------------------------------------------------------------------

struct KupiecResult {
    long long T = 0;  // orders
    long long F = 0;  // failures
    double alpha = 0.0;
    double lr = 0.0;
    double p_value = 1.0;
    bool reject = false;
};

// LR = -2 ln[(1-a)^(T-F) a^F] + 2 ln[(1-F/T)^(T-F) (F/T)^F], 0*ln0 = 0.
// LR is asymptotically chi-square with one degree of freedom.
inline KupiecResult kupiec_lr(long long T, long long F, double alpha, double significance = 0.05) {
    if (T <= 0) throw Error(ErrorKind::Domain, "kupiec: T must be positive");
    if (F < 0 || F > T) throw Error(ErrorKind::Domain, "kupiec: need 0 <= F <= T");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::Domain, "kupiec: alpha must be in (0,1)");
    const double t = static_cast<double>(T), f = static_cast<double>(F);
    const double ll_bench = (t - f) * std::log(1.0 - alpha) + (F > 0 ? f * std::log(alpha) : 0.0);
    double ll_obs = 0.0;
    const double rate = f / t;
    if (F > 0 && F < T) {
        ll_obs = (t - f) * std::log(1.0 - rate) + f * std::log(rate);
    }  // F == 0 or F == T: both terms vanish under the 0*ln0 convention
    double lr = -2.0 * ll_bench + 2.0 * ll_obs;
    if (lr < 0.0) lr = 0.0;  // clamp rounding dust at the F/T == alpha point
    KupiecResult r;
    r.T = T;
    r.F = F;
    r.alpha = alpha;
    r.lr = lr;
    r.p_value = std::erfc(std::sqrt(lr / 2.0));  // chi-square(1) survival
    r.reject = r.p_value < significance;
    return r;
}

// ---------------------------------------------------------------------------
// Event-driven run
// ---------------------------------------------------------------------------

struct BacktestReport {
    std::vector<Minute> curve_ts;
    std::vector<double> equity;  // cash + shares * close, marked every bar
    double annual_return = 0.0;  // percent; 0 when fewer than 2 points
    std::optional<double> sharpe;  // empty when undefined (zero variance)
    AccuracyCounts accuracy;
    double cumulative_reward = 0.0;  // price differences accrued while holding
    double total_fees = 0.0;
    std::vector<Fill> fills;
    double final_cash = 0.0;
    long long final_shares = 0;
};

struct BtConfig {
    double periods_per_year = 2016.0;  // 252 days * 8 groups per session
    double risk_free_per_period = 0.0;
    int accuracy_horizon = 1;
    bool simple_annualization = false;
};

using PolicyFn = std::function<int(std::size_t)>;

// Iterates bars in order; the policy sees only its step index (any context it
// captures must be causal — checked by the truncation property tests).
inline BacktestReport run_backtest(const PolicyFn& policy, std::span<const GroupBar> groups,
                                   Portfolio pf, const BtConfig& cfg = {}) {
    if (groups.empty()) throw Error(ErrorKind::InsufficientData, "run_backtest: no bars");
    BacktestReport rep;
    rep.curve_ts.reserve(groups.size());
    rep.equity.reserve(groups.size());
    for (std::size_t t = 0; t < groups.size(); ++t) {
        if (t > 0 && pf.shares > 0)
            rep.cumulative_reward += reward(groups[t].close, groups[t - 1].close);
        const int action = policy(t);
        auto fill = step(pf, action, groups[t], t);
        if (fill) {
            rep.total_fees += fill->fee;
            rep.fills.push_back(*fill);
        }
        rep.curve_ts.push_back(groups[t].end_ts);
        rep.equity.push_back(pf.cash + static_cast<double>(pf.shares) * groups[t].close);
    }
    rep.final_cash = pf.cash;
    rep.final_shares = pf.shares;
    rep.accuracy = order_accuracy(rep.fills, groups, cfg.accuracy_horizon);

    if (rep.equity.size() >= 2) {
        rep.annual_return = cfg.simple_annualization
                                ? annualized_return_simple(rep.equity, cfg.periods_per_year)
                                : annualized_return(rep.equity, cfg.periods_per_year);
        std::vector<double> rets;
        rets.reserve(rep.equity.size() - 1);
        for (std::size_t i = 0; i + 1 < rep.equity.size(); ++i)
            rets.push_back(rep.equity[i + 1] / rep.equity[i] - 1.0);
        try {
            rep.sharpe = sharpe_ratio(rets, cfg.risk_free_per_period, cfg.periods_per_year);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Degenerate && e.kind() != ErrorKind::InsufficientData) throw;
            rep.sharpe.reset();  // reported as NA
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Report serialization (versioned formats)
// ---------------------------------------------------------------------------

inline std::string side_name(Side s) { return s == Side::Buy ? "buy" : "sell"; }

inline std::string write_curve_csv(const BacktestReport& rep) {
    std::string out = "timestamp,equity\n";
    for (std::size_t i = 0; i < rep.equity.size(); ++i) {
        out += data::format_datetime(rep.curve_ts[i]);
        out += ',';
        out += fmt_g17(rep.equity[i]);
        out += '\n';
    }
    return out;
}

inline std::string write_fills_csv(const BacktestReport& rep) {
    std::string out = "timestamp,side,price,qty,fee,correct\n";
    for (const auto& f : rep.fills) {
        out += data::format_datetime(f.ts);
        out += ',';
        out += side_name(f.side);
        out += ',';
        out += fmt_g17(f.price);
        out += ',';
        out += std::to_string(f.quantity);
        out += ',';
        out += fmt_g17(f.fee);
        out += ',';
        out += f.correct.has_value() ? (*f.correct ? "1" : "0") : "NA";
        out += '\n';
    }
    return out;
}

inline JVal report_to_json(const BacktestReport& rep) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("annual_return_pct", JVal::num(rep.annual_return));
    o.set("sharpe", rep.sharpe ? JVal::num(*rep.sharpe) : JVal::null());
    o.set("cumulative_reward", JVal::num(rep.cumulative_reward));
    o.set("total_fees", JVal::num(rep.total_fees));
    o.set("final_equity", JVal::num(rep.equity.empty() ? 0.0 : rep.equity.back()));
    o.set("final_cash", JVal::num(rep.final_cash));
    o.set("final_shares", JVal::integer(rep.final_shares));
    JVal orders = JVal::obj();
    orders.set("buy_placed", JVal::integer(rep.accuracy.buy_placed));
    orders.set("buy_correct", JVal::integer(rep.accuracy.buy_correct));
    orders.set("sell_placed", JVal::integer(rep.accuracy.sell_placed));
    orders.set("sell_correct", JVal::integer(rep.accuracy.sell_correct));
    orders.set("unscored", JVal::integer(rep.accuracy.unscored));
    o.set("orders", std::move(orders));
    o.set("steps", JVal::uinteger(rep.equity.size()));
    return o;
}

}  // namespace arbr::backtest
