#pragma once

#include <cmath>
#include <span>
#include <string>

#include "arbr/core.hpp"
#include "arbr/drqn.hpp"

namespace arbr::strategy {

enum class SignalSource { Arbr, Drqn, Fused, Baseline };

struct Signal {
    int value = 0;  // -1 sell, 0 hold, +1 buy
    SignalSource source = SignalSource::Baseline;
};

// Rule thresholds are chartist conventions, config-exposed; the rule itself
// is one defensible reading of "dynamic comparison" and is swept in the
// experiment harness rather than treated as ground truth.
struct ArbrRuleConfig {
    double ar_oversold = 80.0;
    double ar_overbought = 180.0;
    double br_oversold = 70.0;
    double br_overbought = 300.0;
    double divergence_margin = 1.0;  // sell when br > ar * (1 + margin) while overheated

    void validate() const {
        if (!(ar_oversold < ar_overbought))
            throw Error(ErrorKind::Config, "ar_oversold must be below ar_overbought");
        if (!(br_oversold < br_overbought))
            throw Error(ErrorKind::Config, "br_oversold must be below br_overbought");
    }
};

// Buy when both indicators sit below their oversold levels (pessimism
// exhausted); sell when both are overheated, or when willingness diverges far
// above popularity while overheated; hold otherwise.
inline Signal arbr_signal(double ar, double br, const ArbrRuleConfig& cfg) {
    if (!std::isfinite(ar) || !std::isfinite(br))
        throw Error(ErrorKind::Domain, "arbr_signal: non-finite input");
    if (ar < cfg.ar_oversold && br < cfg.br_oversold) return {1, SignalSource::Arbr};
    if (ar > cfg.ar_overbought && br > cfg.br_overbought) return {-1, SignalSource::Arbr};
    if (br > ar * (1.0 + cfg.divergence_margin) && br > cfg.br_overbought)
        return {-1, SignalSource::Arbr};
    return {0, SignalSource::Arbr};
}

// Greedy network action (epsilon = 0).
inline Signal drqn_signal(const drqn::QNetwork& net, std::span<const drqn::StateVector> states) {
    const auto q = drqn::forward(net, states).q;
    return {drqn::greedy_action(q), SignalSource::Drqn};
}

// Execute only on agreement; disagreement holds.
inline Signal fuse(const Signal& s1, const Signal& s2) {
    return {s1.value == s2.value ? s1.value : 0, SignalSource::Fused};
}

// +1 when the short MA crosses above the long MA at t, -1 on the opposite
// cross, 0 otherwise.
inline Signal double_ma_signal(std::span<const double> prices, int short_n, int long_n,
                               std::size_t t) {
    if (short_n < 1 || long_n < 1 || short_n >= long_n)
        throw Error(ErrorKind::Config, "double_ma: need 1 <= short_n < long_n");
    if (t >= prices.size()) throw Error(ErrorKind::Contract, "double_ma: index out of range");
    if (t < static_cast<std::size_t>(long_n))
        throw Error(ErrorKind::InsufficientHistory, "double_ma: not enough history at t");
    auto ma_at = [&](std::size_t idx, int n) {
        double s = 0.0;
        for (std::size_t j = idx + 1 - static_cast<std::size_t>(n); j <= idx; ++j) s += prices[j];
        return s / n;
    };
    const double s_now = ma_at(t, short_n), l_now = ma_at(t, long_n);
    const double s_prev = ma_at(t - 1, short_n), l_prev = ma_at(t - 1, long_n);
    if (s_prev <= l_prev && s_now > l_now) return {1, SignalSource::Baseline};
    if (s_prev >= l_prev && s_now < l_now) return {-1, SignalSource::Baseline};
    return {0, SignalSource::Baseline};
}

// Buy once at the first step, then hold forever.
inline Signal buy_and_hold_signal(std::size_t t) {
    return {t == 0 ? 1 : 0, SignalSource::Baseline};
}

}  // namespace arbr::strategy
