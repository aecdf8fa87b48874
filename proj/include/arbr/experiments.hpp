#pragma once

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "arbr/backtest.hpp"
#include "arbr/config.hpp"
#include "arbr/data.hpp"
#include "arbr/drqn.hpp"
#include "arbr/indicators.hpp"
#include "arbr/io.hpp"
#include "arbr/pca.hpp"
#include "arbr/serialize.hpp"
#include "arbr/strategy.hpp"

namespace arbr::experiments {

using config::RunConfig;
using data::ColumnStats;
using data::GroupBar;
using data::Minute;

// ---------------------------------------------------------------------------
// Synthetic data. The minute generator is a seeded geometric random walk with
// regime-switching drift; the sawtooth generator emits group bars directly
// for controlled learning checks.
// ---------------------------------------------------------------------------

struct WalkConfig {
    int n_minutes = 12000;
    double start_price = 100.0;
    double minute_vol = 0.0008;
    double drift_bull = 8e-5;
    double drift_bear = -8e-5;
    double drift_chop = 0.0;
    double switch_prob = 0.0015;       // per-minute regime jump probability
    int session_minutes = 240;         // one 4-hour session per calendar day
    Minute start_ts = data::parse_datetime("2020-01-06 09:30");
    int force_bull_after = -1;         // pin the regime to a low-noise bull tail
    double forced_vol = 2e-5;
};

inline std::vector<data::MinuteBar> generate_walk_minutes(const WalkConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<data::MinuteBar> bars;
    bars.reserve(static_cast<std::size_t>(cfg.n_minutes));
    int regime = 0;  // 0 bull, 1 bear, 2 chop
    double close = cfg.start_price;
    for (int i = 0; i < cfg.n_minutes; ++i) {
        double drift, vol;
        if (cfg.force_bull_after >= 0 && i >= cfg.force_bull_after) {
            drift = cfg.drift_bull;
            vol = cfg.forced_vol;
        } else {
            if (rng.uniform() < cfg.switch_prob) regime = static_cast<int>(rng.uniform_int(3));
            drift = regime == 0 ? cfg.drift_bull : regime == 1 ? cfg.drift_bear : cfg.drift_chop;
            vol = cfg.minute_vol;
        }
        const double open = close;
        close = close * std::exp(drift + vol * rng.normal());
        const double high = std::max(open, close) * (1.0 + 0.4 * vol * std::abs(rng.normal()) + 1e-9);
        const double low = std::min(open, close) * (1.0 - 0.4 * vol * std::abs(rng.normal()) - 1e-9);
        const double volume = std::floor(800.0 * std::exp(0.25 * rng.normal()));
        const double money = std::floor(volume * (open + close) / 2.0);
        const int day = i / cfg.session_minutes;
        const int within = i % cfg.session_minutes;
        bars.push_back({cfg.start_ts + day * 1440 + within, open, high, low, close, volume, money});
    }
    return bars;
}

struct SawtoothConfig {
    int n_groups = 1200;
    int period = 20;          // groups per full cycle, half up / half down
    double amplitude = 0.05;  // peak height over the base price
    double base_price = 100.0;
    double wiggle_frac = 0.1;  // high/low overshoot relative to the mean step
    double noise = 0.002;      // multiplicative close jitter
    Minute start_ts = data::parse_datetime("2021-01-04 09:30");
};

inline std::vector<GroupBar> generate_sawtooth_groups(const SawtoothConfig& cfg, std::uint64_t seed) {
    if (cfg.period < 4 || cfg.period % 2 != 0)
        throw Error(ErrorKind::Config, "sawtooth: period must be an even number >= 4");
    Rng rng(seed);
    const int half = cfg.period / 2;
    const double step = cfg.base_price * cfg.amplitude / half;
    const double kappa = cfg.wiggle_frac * step;
    std::vector<GroupBar> out;
    out.reserve(static_cast<std::size_t>(cfg.n_groups));
    double prev_close = cfg.base_price;
    for (int t = 0; t < cfg.n_groups; ++t) {
        const int p = t % cfg.period;
        const double frac = p <= half ? static_cast<double>(p) / half
                                      : static_cast<double>(cfg.period - p) / half;
        double close = cfg.base_price * (1.0 + cfg.amplitude * frac);
        close *= 1.0 + cfg.noise * (2.0 * rng.uniform() - 1.0);
        const double open = prev_close;
        const double high = std::max(open, close) + kappa;
        const double low = std::min(open, close) - kappa;
        const double volume = std::floor(1000.0 * (1.0 + 0.1 * (2.0 * rng.uniform() - 1.0)));
        const Minute ts = cfg.start_ts + 30 * t;
        out.push_back({ts, ts + 29, open, high, low, close, volume, std::floor(volume * close), 30});
        prev_close = close;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline: groups -> features -> train-split normalization -> PCA -> states.
// Normalization statistics and the PCA basis come from the training slice
// only; evaluation rows are projected with the frozen model.
// ---------------------------------------------------------------------------

struct PreparedData {
    RunConfig cfg;
    std::vector<GroupBar> groups;
    std::vector<double> closes;
    std::size_t split = 0;  // first evaluation index

    indicators::FeatureMatrix raw;       // unnormalized, newest-first
    std::vector<ColumnStats> col_stats;  // fitted on training rows
    Matrix norm_chrono;                  // normalized features, chronological
    std::size_t warmup = 0;              // first group index with features
    pca::PcaModel pca_model;

    std::vector<double> ar_raw, br_raw;  // chronological, defined from arbr_start
    std::size_t arbr_start = 0;
    ColumnStats ar_stats, br_stats, ret_stats;

    std::size_t first_state = 0;
    std::uint64_t train_fingerprint = 0;

    std::size_t seq_len() const { return static_cast<std::size_t>(cfg.train.seq_len); }
    std::size_t first_actionable() const { return first_state + seq_len() - 1; }

    double ar_at(std::size_t t) const { return ar_raw[t - arbr_start]; }
    double br_at(std::size_t t) const { return br_raw[t - arbr_start]; }

    drqn::StateVector state_at(std::size_t t) const {
        if (t < first_state || t >= groups.size())
            throw Error(ErrorKind::Contract, "state_at: index outside the prepared range");
        drqn::StateVector s;
        const auto w = data::log_return_window(groups, t, static_cast<std::size_t>(cfg.data.return_window));
        s.returns.reserve(w.values.size());
        for (double r : w.values) s.returns.push_back(data::apply_zscore(ret_stats, r));
        s.pca.resize(pca_model.k);
        pca::transform_row(pca_model,
                           std::span<const double>(norm_chrono.row_ptr(t - warmup), norm_chrono.cols),
                           s.pca);
        s.ar = data::apply_zscore(ar_stats, ar_at(t));
        s.br = data::apply_zscore(br_stats, br_at(t));
        return s;
    }

    std::vector<drqn::StateVector> sequence_ending_at(std::size_t t) const {
        std::vector<drqn::StateVector> seq;
        seq.reserve(seq_len());
        for (std::size_t k = t + 1 - seq_len(); k <= t; ++k) seq.push_back(state_at(k));
        return seq;
    }

    std::size_t state_width() const {
        return static_cast<std::size_t>(cfg.data.return_window) + pca_model.k + 2;
    }
};

namespace detail {

inline ColumnStats stats_or_throw(std::span<const double> xs, const std::string& what) {
    const ColumnStats st = data::fit_stats(xs);
    if (st.std == 0.0) throw Error(ErrorKind::Degenerate, what + " is constant over the training slice");
    return st;
}

}  // namespace detail

inline PreparedData prepare_data(std::vector<GroupBar> groups, const RunConfig& cfg) {
    cfg.validate();
    PreparedData prep;
    prep.cfg = cfg;
    prep.groups = std::move(groups);
    if (cfg.data.drop_partial_groups) {
        while (!prep.groups.empty() && prep.groups.back().n_members < cfg.data.group_len)
            prep.groups.pop_back();
    }
    const std::size_t n = prep.groups.size();
    if (n < 4) throw Error(ErrorKind::InsufficientData, "prepare: too few groups");
    prep.closes.reserve(n);
    for (const auto& g : prep.groups) prep.closes.push_back(g.close);

    prep.split = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.data.train_split));
    if (prep.split == 0 || prep.split >= n)
        throw Error(ErrorKind::Config, "train_split leaves an empty train or evaluation slice");

    // raw features over the full span; statistics from training rows only
    indicators::FeatureConfig fcfg = cfg.features;
    fcfg.normalize = false;
    prep.raw = indicators::build_feature_matrix(prep.groups, fcfg);
    prep.warmup = prep.raw.first_group_index;
    if (prep.split <= prep.warmup + 1)
        throw Error(ErrorKind::InsufficientData, "prepare: split boundary leaves no training features");

    const std::size_t d = prep.raw.cols();
    const std::size_t n_train_rows = prep.split - prep.warmup;
    Matrix train_rows(n_train_rows, d);
    std::vector<double> col(n_train_rows);
    prep.col_stats.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t g = prep.warmup; g < prep.split; ++g)
            col[g - prep.warmup] = prep.raw.values(prep.raw.row_of_group(g), j);
        prep.col_stats.push_back(detail::stats_or_throw(col, "column '" + prep.raw.columns[j] + "'"));
    }
    prep.norm_chrono = Matrix(prep.raw.rows(), d);
    for (std::size_t g = prep.warmup; g < n; ++g) {
        const std::size_t src = prep.raw.row_of_group(g);
        for (std::size_t j = 0; j < d; ++j)
            prep.norm_chrono(g - prep.warmup, j) = data::apply_zscore(prep.col_stats[j], prep.raw.values(src, j));
    }
    for (std::size_t i = 0; i < n_train_rows; ++i)
        for (std::size_t j = 0; j < d; ++j) train_rows(i, j) = prep.norm_chrono(i, j);

    prep.pca_model = pca::fit_rows(train_rows, cfg.pca_k);

    // ARBR series for the rule signal and the observation tail
    const int period = cfg.features.arbr_period;
    prep.arbr_start = static_cast<std::size_t>(period);
    if (prep.arbr_start + 1 >= prep.split)
        throw Error(ErrorKind::InsufficientData, "prepare: ARBR period exceeds the training slice");
    for (std::size_t t = prep.arbr_start; t < n; ++t) {
        indicators::IndicatorWindow w{period, std::span<const GroupBar>(prep.groups.data(), t + 1)};
        prep.ar_raw.push_back(indicators::ar(w));
        prep.br_raw.push_back(indicators::br(w));
    }
    prep.ar_stats = detail::stats_or_throw(
        std::span<const double>(prep.ar_raw.data(), prep.split - prep.arbr_start), "ar");
    prep.br_stats = detail::stats_or_throw(
        std::span<const double>(prep.br_raw.data(), prep.split - prep.arbr_start), "br");

    // pooled one-step log returns over the training slice
    std::vector<double> rets;
    rets.reserve(prep.split - 1);
    for (std::size_t i = 1; i < prep.split; ++i) {
        if (!(prep.closes[i] > 0.0) || !(prep.closes[i - 1] > 0.0))
            throw Error(ErrorKind::Domain, "prepare: non-positive close");
        rets.push_back(std::log(prep.closes[i] / prep.closes[i - 1]));
    }
    prep.ret_stats = detail::stats_or_throw(rets, "log returns");

    prep.first_state = std::max({prep.warmup,
                                 static_cast<std::size_t>(cfg.data.return_window),
                                 prep.arbr_start});
    if (prep.first_actionable() + 2 > prep.split)
        throw Error(ErrorKind::InsufficientData, "prepare: training slice shorter than one sequence");

    prep.train_fingerprint = fnv1a64(prep.closes.data(), prep.split * sizeof(double));
    return prep;
}

inline PreparedData prepare_csv(const std::string& path, const RunConfig& cfg) {
    std::istringstream in(read_file(path));
    const auto bars = data::parse_minute_csv(in);
    auto groups = data::group_bars(bars, cfg.data.group_len, cfg.data.day_boundary_reset);
    return prepare_data(std::move(groups), cfg);
}

// ---------------------------------------------------------------------------
// Training loop. One episode is one pass over the training slice; the
// directional reward a * (close[t+1] - close[t]) scores the action against
// the next move, which keeps the reward a function of state and action only.
// ---------------------------------------------------------------------------

struct LossLogRow {
    std::size_t step;
    double loss;
    double epsilon;
};

struct TrainState {
    drqn::QNetwork net;
    drqn::QNetwork target;
    drqn::ReplayBuffer replay;
    Rng rng;
    std::size_t step = 0;
    std::size_t total_steps = 0;
    std::vector<LossLogRow> loss_log;
    std::uint64_t train_fingerprint = 0;

    TrainState(drqn::QNetwork n, std::size_t replay_capacity, Rng r)
        : net(n), target(std::move(n)), replay(replay_capacity), rng(r) {}
};

inline std::size_t episode_length(const PreparedData& prep) {
    const std::size_t t0 = prep.first_actionable();
    if (prep.split < t0 + 2)
        throw Error(ErrorKind::InsufficientData, "train: no usable training steps");
    return prep.split - 1 - t0;  // last usable t is split - 2
}

// Advances training to state.total_steps, or to stop_after steps when that
// comes first (an interrupted run; checkpoint and resume later). The epsilon
// schedule always spans total_steps, so interruption does not bend it.
inline void run_training(const PreparedData& prep, TrainState& state, std::size_t stop_after = 0) {
    const drqn::TrainingConfig& tc = prep.cfg.train;
    const std::size_t t0 = prep.first_actionable();
    const std::size_t ep_len = episode_length(prep);
    const std::size_t until =
        stop_after > 0 ? std::min(state.total_steps, stop_after) : state.total_steps;
    while (state.step < until) {
        const std::size_t t = t0 + state.step % ep_len;
        const auto seq = prep.sequence_ending_at(t);
        const double eps = drqn::epsilon_at(tc.epsilon, state.step, state.total_steps);
        const auto q = drqn::forward(state.net, seq).q;
        const int action = drqn::select_action(q, eps, state.rng);

        drqn::Transition tr;
        tr.state = seq;
        tr.action = action;
        tr.reward = static_cast<double>(action) * (prep.closes[t + 1] - prep.closes[t]);
        tr.next_state = prep.sequence_ending_at(t + 1);
        tr.terminal = t + 1 >= prep.split - 1;  // episode ends at the split boundary
        state.replay.push(std::move(tr));

        if (state.replay.size() >= static_cast<std::size_t>(tc.batch_size)) {
            const auto batch = state.replay.sample(static_cast<std::size_t>(tc.batch_size), state.rng);
            const double loss = drqn::train_step(state.net, state.target, batch, tc);
            state.loss_log.push_back({state.step, loss, eps});
        }
        ++state.step;
        if (state.step % static_cast<std::size_t>(tc.sync_interval) == 0)
            drqn::sync_target(state.net, state.target);
    }
}

inline TrainState train_agent(const PreparedData& prep, std::size_t stop_after = 0) {
    const drqn::TrainingConfig& tc = prep.cfg.train;
    TrainState state(drqn::init_network(tc, static_cast<int>(prep.state_width())),
                     tc.replay_capacity, Rng(tc.seed));
    state.total_steps = static_cast<std::size_t>(tc.episodes) * episode_length(prep);
    state.train_fingerprint = prep.train_fingerprint;
    run_training(prep, state, stop_after);
    return state;
}

inline std::string loss_log_csv(const std::vector<LossLogRow>& rows) {
    std::string out = "step,loss,epsilon\n";
    for (const auto& r : rows) {
        out += std::to_string(r.step);
        out += ',';
        out += fmt_g17(r.loss);
        out += ',';
        out += fmt_g17(r.epsilon);
        out += '\n';
    }
    return out;
}

inline serialize::Checkpoint make_checkpoint(const PreparedData& prep, const TrainState& state) {
    serialize::Checkpoint ck;
    ck.cfg = prep.cfg;
    ck.input_width = static_cast<int>(prep.state_width());
    ck.step = state.step;
    ck.total_steps = state.total_steps;
    ck.train_fingerprint = state.train_fingerprint;
    ck.rng_state = state.rng.serialize();
    ck.net = state.net;
    ck.target = state.target;
    ck.replay = state.replay.snapshot();
    return ck;
}

inline TrainState state_from_checkpoint(const serialize::Checkpoint& ck) {
    if (!ck.resumable)
        throw Error(ErrorKind::Config, "checkpoint carries no replay state and cannot resume training");
    TrainState state(ck.net, ck.cfg.train.replay_capacity, Rng::deserialize(ck.rng_state));
    state.target = ck.target;
    state.replay.restore(ck.replay);
    state.step = ck.step;
    state.total_steps = ck.total_steps;
    state.train_fingerprint = ck.train_fingerprint;
    return state;
}

// ---------------------------------------------------------------------------
// Strategy evaluation over the held-out slice
// ---------------------------------------------------------------------------

enum class StrategyKind { Fused, DrqnOnly, ArbrOnly, DoubleMa, BuyHold };

inline const char* strategy_token(StrategyKind k) {
    switch (k) {
        case StrategyKind::Fused: return "fused";
        case StrategyKind::DrqnOnly: return "drqn-only";
        case StrategyKind::ArbrOnly: return "arbr-only";
        case StrategyKind::DoubleMa: return "double_ma";
        case StrategyKind::BuyHold: return "buy_hold";
    }
    return "?";
}

inline StrategyKind parse_strategy(const std::string& name) {
    if (name == "fused") return StrategyKind::Fused;
    if (name == "drqn-only") return StrategyKind::DrqnOnly;
    if (name == "arbr-only") return StrategyKind::ArbrOnly;
    if (name == "double_ma") return StrategyKind::DoubleMa;
    if (name == "buy_hold") return StrategyKind::BuyHold;
    throw Error(ErrorKind::Config, "unknown strategy '" + name + "'");
}

struct SignalTraceRow {
    Minute ts;
    std::optional<int> s1, s2;
    int executed = 0;
};

struct EvalResult {
    backtest::BacktestReport report;
    std::vector<SignalTraceRow> trace;
};

inline EvalResult eval_strategy(const PreparedData& prep, const drqn::QNetwork* net,
                                StrategyKind kind, double capital) {
    const RunConfig& cfg = prep.cfg;
    if ((kind == StrategyKind::Fused || kind == StrategyKind::DrqnOnly) && net == nullptr)
        throw Error(ErrorKind::Contract, "evaluation of a network strategy without a network");
    if (kind == StrategyKind::Fused || kind == StrategyKind::DrqnOnly) {
        if (prep.split < prep.first_actionable())
            throw Error(ErrorKind::InsufficientData, "evaluation slice starts before the first full state");
    }

    const std::span<const GroupBar> eval(prep.groups.data() + prep.split,
                                         prep.groups.size() - prep.split);
    EvalResult result;
    auto policy = [&](std::size_t i) -> int {
        const std::size_t t = prep.split + i;
        SignalTraceRow row{prep.groups[t].end_ts, std::nullopt, std::nullopt, 0};
        int action = 0;
        switch (kind) {
            case StrategyKind::Fused: {
                const auto s1 = strategy::arbr_signal(prep.ar_at(t), prep.br_at(t), cfg.strat.rule);
                const auto s2 = strategy::drqn_signal(*net, prep.sequence_ending_at(t));
                row.s1 = s1.value;
                row.s2 = s2.value;
                action = strategy::fuse(s1, s2).value;
                break;
            }
            case StrategyKind::DrqnOnly: {
                const auto s2 = strategy::drqn_signal(*net, prep.sequence_ending_at(t));
                row.s2 = s2.value;
                action = s2.value;
                break;
            }
            case StrategyKind::ArbrOnly: {
                const auto s1 = strategy::arbr_signal(prep.ar_at(t), prep.br_at(t), cfg.strat.rule);
                row.s1 = s1.value;
                action = s1.value;
                break;
            }
            case StrategyKind::DoubleMa: {
                if (t >= static_cast<std::size_t>(cfg.strat.double_ma_long))
                    action = strategy::double_ma_signal(
                                 std::span<const double>(prep.closes.data(), t + 1),
                                 cfg.strat.double_ma_short, cfg.strat.double_ma_long, t)
                                 .value;
                break;
            }
            case StrategyKind::BuyHold:
                action = strategy::buy_and_hold_signal(i).value;
                break;
        }
        row.executed = action;
        result.trace.push_back(row);
        return action;
    };

    backtest::Portfolio pf;
    pf.cash = capital;
    pf.fee_rate = cfg.bt.fee_rate;
    pf.trade_fraction = cfg.bt.trade_fraction;
    backtest::BtConfig bt;
    bt.periods_per_year = cfg.bt.periods_per_year;
    bt.risk_free_per_period = cfg.bt.risk_free;
    bt.accuracy_horizon = cfg.bt.accuracy_horizon;
    bt.simple_annualization = cfg.bt.simple_annualization;
    result.report = backtest::run_backtest(policy, eval, pf, bt);
    return result;
}

inline std::string write_signals_csv(const std::vector<SignalTraceRow>& trace) {
    std::string out = "timestamp,s1,s2,fused\n";
    for (const auto& r : trace) {
        out += data::format_datetime(r.ts);
        out += ',';
        if (r.s1) out += std::to_string(*r.s1);
        out += ',';
        if (r.s2) out += std::to_string(*r.s2);
        out += ',';
        out += std::to_string(r.executed);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment specification
// ---------------------------------------------------------------------------

struct DatasetRef {
    std::string name;
    std::string csv;
};

struct ExperimentSpec {
    std::vector<DatasetRef> datasets;
    std::vector<std::string> strategies = {"fused", "drqn-only", "arbr-only", "double_ma", "buy_hold"};
    std::vector<double> capitals = {100000, 200000, 300000};
    std::vector<int> kupiec_periods = {5, 10, 19, 20, 21, 37, 60, 73, 78, 80, 120, 240};
    std::vector<std::uint64_t> seeds = {1};
    int workers = 2;
    RunConfig base;

    void validate() const {
        if (datasets.empty()) throw Error(ErrorKind::Config, "spec.datasets: need at least one dataset");
        std::set<std::string> names;
        for (const auto& d : datasets) {
            if (d.name.empty() || d.csv.empty())
                throw Error(ErrorKind::Config, "spec.datasets: name and csv are required");
            if (!names.insert(d.name).second)
                throw Error(ErrorKind::Config, "spec.datasets: duplicate name '" + d.name + "'");
        }
        if (strategies.empty()) throw Error(ErrorKind::Config, "spec.strategies: need at least one strategy");
        for (const auto& s : strategies) parse_strategy(s);
        if (capitals.empty()) throw Error(ErrorKind::Config, "spec.capitals: need at least one level");
        for (double c : capitals)
            if (!(c > 0.0)) throw Error(ErrorKind::Config, "spec.capitals: levels must be positive");
        for (int p : kupiec_periods)
            if (p < 1) throw Error(ErrorKind::Config, "spec.kupiec_periods: periods must be >= 1");
        if (seeds.empty()) throw Error(ErrorKind::Config, "spec.seeds: need at least one seed");
        if (workers < 1) throw Error(ErrorKind::Config, "spec.workers: must be >= 1");
        base.validate();
    }
};

inline ExperimentSpec parse_experiment_spec(const nlohmann::json& j) {
    ExperimentSpec spec;
    config::detail::check_keys(j, "spec", {"version", "datasets", "strategies", "capitals",
                                           "kupiec_periods", "seeds", "workers", "config"});
    if (j.contains("version") && j.at("version") != 1)
        throw Error(ErrorKind::Config, "spec.version: unsupported version");
    if (!j.contains("datasets")) throw Error(ErrorKind::Config, "spec.datasets: required field");
    spec.datasets.clear();
    std::size_t i = 0;
    for (const auto& d : j.at("datasets")) {
        const std::string path = "spec.datasets[" + std::to_string(i++) + "]";
        config::detail::check_keys(d, path, {"name", "csv"});
        DatasetRef ref;
        config::detail::read(d, path, "name", ref.name);
        config::detail::read(d, path, "csv", ref.csv);
        spec.datasets.push_back(std::move(ref));
    }
    config::detail::read(j, "spec", "strategies", spec.strategies);
    config::detail::read(j, "spec", "capitals", spec.capitals);
    config::detail::read(j, "spec", "kupiec_periods", spec.kupiec_periods);
    config::detail::read(j, "spec", "seeds", spec.seeds);
    config::detail::read(j, "spec", "workers", spec.workers);
    if (j.contains("config")) config::apply_json(j.at("config"), spec.base, "spec.config");
    spec.validate();
    return spec;
}

inline ExperimentSpec load_experiment_spec(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "spec " + path + ": " + e.what());
    }
    return parse_experiment_spec(j);
}

inline JVal spec_to_jval(const ExperimentSpec& spec) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    JVal ds = JVal::arr();
    for (const auto& d : spec.datasets) {
        JVal e = JVal::obj();
        e.set("name", JVal::str(d.name));
        e.set("csv", JVal::str(d.csv));
        ds.push(std::move(e));
    }
    o.set("datasets", std::move(ds));
    JVal st = JVal::arr();
    for (const auto& s : spec.strategies) st.push(JVal::str(s));
    o.set("strategies", std::move(st));
    o.set("capitals", JVal::num_array(spec.capitals));
    JVal kp = JVal::arr();
    for (int p : spec.kupiec_periods) kp.push(JVal::integer(p));
    o.set("kupiec_periods", std::move(kp));
    JVal sd = JVal::arr();
    for (auto s : spec.seeds) sd.push(JVal::uinteger(s));
    o.set("seeds", std::move(sd));
    o.set("workers", JVal::integer(spec.workers));
    o.set("config", config::to_jval(spec.base));
    return o;
}

inline std::uint64_t spec_hash(const ExperimentSpec& spec) { return fnv1a64(spec_to_jval(spec).dump(0)); }

// ---------------------------------------------------------------------------
// Workspace: one trained agent per dataset plus cached evaluations.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    const int w = std::max(1, std::min(workers, static_cast<int>(n)));
    if (w == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (int t = 0; t < w; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct DatasetArtifacts {
    std::string name;
    PreparedData prep;
    TrainState trained;
    std::map<StrategyKind, EvalResult> evals;  // at the base capital

    DatasetArtifacts(std::string n, PreparedData p, TrainState t)
        : name(std::move(n)), prep(std::move(p)), trained(std::move(t)) {}
};

struct Workspace {
    std::uint64_t seed = 0;
    std::vector<DatasetArtifacts> items;

    const DatasetArtifacts& by_name(const std::string& name) const {
        for (const auto& it : items)
            if (it.name == name) return it;
        throw Error(ErrorKind::Contract, "unknown dataset '" + name + "'");
    }
};

inline Workspace build_workspace(const ExperimentSpec& spec, std::uint64_t seed) {
    spec.validate();
    Workspace ws;
    ws.seed = seed;
    std::vector<std::optional<DatasetArtifacts>> slots(spec.datasets.size());
    parallel_for(spec.datasets.size(), spec.workers, [&](std::size_t i) {
        RunConfig cfg = spec.base;
        cfg.seed = seed;
        cfg.train.seed = seed;
        cfg.data.csv = spec.datasets[i].csv;
        PreparedData prep = prepare_csv(spec.datasets[i].csv, cfg);
        TrainState trained = train_agent(prep);
        if (trained.train_fingerprint != prep.train_fingerprint)
            throw Error(ErrorKind::Contract, "training fingerprint mismatch");
        DatasetArtifacts art(spec.datasets[i].name, std::move(prep), std::move(trained));
        for (const auto& s : spec.strategies) {
            const StrategyKind kind = parse_strategy(s);
            art.evals.emplace(kind, eval_strategy(art.prep, &art.trained.net, kind,
                                                  art.prep.cfg.bt.capital));
        }
        slots[i].emplace(std::move(art));
    });
    for (auto& s : slots) ws.items.push_back(std::move(*s));
    return ws;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

struct MetricCell {
    double annual_return = 0.0;
    std::optional<double> sharpe;
};

struct ComparisonTable {
    std::vector<std::string> strategies;  // column groups, canonical tokens
    std::vector<std::string> indices;     // row keys; may end with "Average"
    std::vector<std::vector<MetricCell>> cells;  // [index][strategy]
    bool has_average = false;
};

namespace detail {

inline std::vector<std::string> filter_strategies(const ExperimentSpec& spec,
                                                  const std::vector<std::string>& wanted) {
    std::vector<std::string> out;
    for (const auto& w : wanted)
        for (const auto& s : spec.strategies)
            if (s == w) out.push_back(w);
    return out;
}

inline MetricCell cell_of(const EvalResult& ev) {
    return {ev.report.annual_return, ev.report.sharpe};
}

inline void append_average_row(ComparisonTable& t) {
    if (t.indices.empty()) return;
    std::vector<MetricCell> avg(t.strategies.size());
    for (std::size_t s = 0; s < t.strategies.size(); ++s) {
        double ar_sum = 0.0, sh_sum = 0.0;
        std::size_t sh_n = 0;
        for (const auto& row : t.cells) {
            ar_sum += row[s].annual_return;
            if (row[s].sharpe) {
                sh_sum += *row[s].sharpe;
                ++sh_n;
            }
        }
        avg[s].annual_return = ar_sum / static_cast<double>(t.cells.size());
        if (sh_n > 0) avg[s].sharpe = sh_sum / static_cast<double>(sh_n);
    }
    t.indices.push_back("Average");
    t.cells.push_back(std::move(avg));
    t.has_average = true;
}

}  // namespace detail

// Fused against the network alone, one row per dataset plus an averages row.
inline ComparisonTable run_ablation(const ExperimentSpec& spec, const Workspace& ws) {
    ComparisonTable t;
    t.strategies = detail::filter_strategies(spec, {"fused", "drqn-only"});
    for (const auto& art : ws.items) {
        t.indices.push_back(art.name);
        std::vector<MetricCell> row;
        for (const auto& s : t.strategies) row.push_back(detail::cell_of(art.evals.at(parse_strategy(s))));
        t.cells.push_back(std::move(row));
    }
    detail::append_average_row(t);
    return t;
}

struct CapitalTable {
    std::vector<double> capitals;
    std::vector<std::string> indices;
    std::vector<std::vector<MetricCell>> cells;  // [index][capital]
};

inline CapitalTable run_capital_sweep(const ExperimentSpec& spec, const Workspace& ws) {
    CapitalTable t;
    t.capitals = spec.capitals;
    for (const auto& art : ws.items) {
        t.indices.push_back(art.name);
        std::vector<MetricCell> row;
        for (double cap : spec.capitals) {
            const auto ev = eval_strategy(art.prep, &art.trained.net, StrategyKind::Fused, cap);
            row.push_back(detail::cell_of(ev));
        }
        t.cells.push_back(std::move(row));
    }
    return t;
}

// Baselines against the fused strategy in display order.
inline ComparisonTable run_strategy_comparison(const ExperimentSpec& spec, const Workspace& ws) {
    ComparisonTable t;
    t.strategies = detail::filter_strategies(spec, {"buy_hold", "double_ma", "fused"});
    for (const auto& art : ws.items) {
        t.indices.push_back(art.name);
        std::vector<MetricCell> row;
        for (const auto& s : t.strategies) row.push_back(detail::cell_of(art.evals.at(parse_strategy(s))));
        t.cells.push_back(std::move(row));
    }
    return t;
}

struct AccuracyRow {
    std::string index;
    long long buy_placed = 0, buy_correct = 0;
    long long sell_placed = 0, sell_correct = 0;
    long long unscored = 0;
};

struct AccuracyTable {
    std::vector<AccuracyRow> rows;          // one per dataset, fused strategy
    std::vector<std::string> warnings;      // datasets without any fill
};

inline AccuracyTable run_accuracy_table(const ExperimentSpec& spec, const Workspace& ws) {
    if (detail::filter_strategies(spec, {"fused"}).empty())
        throw Error(ErrorKind::Config, "accuracy table requires the fused strategy");
    AccuracyTable t;
    for (const auto& art : ws.items) {
        const auto& acc = art.evals.at(StrategyKind::Fused).report.accuracy;
        AccuracyRow row;
        row.index = art.name;
        row.buy_placed = acc.buy_placed;
        row.buy_correct = acc.buy_correct;
        row.sell_placed = acc.sell_placed;
        row.sell_correct = acc.sell_correct;
        row.unscored = acc.unscored;
        if (acc.buy_placed + acc.sell_placed == 0)
            t.warnings.push_back("dataset '" + art.name + "': no orders placed");
        t.rows.push_back(std::move(row));
    }
    return t;
}

struct KupiecTable {
    std::vector<int> periods;  // in trading days
    std::vector<std::string> indices;
    std::vector<std::vector<std::optional<double>>> lr;  // [index][period]; empty cell when T = 0
    double alpha = 0.5;
};

// Counts scored fused fills over the trailing window of each period length.
inline KupiecTable run_kupiec_sweep(const ExperimentSpec& spec, const Workspace& ws) {
    if (detail::filter_strategies(spec, {"fused"}).empty())
        throw Error(ErrorKind::Config, "the failure-frequency sweep requires the fused strategy");
    KupiecTable t;
    t.periods = spec.kupiec_periods;
    t.alpha = spec.base.bt.kupiec_alpha;
    for (const auto& art : ws.items) {
        t.indices.push_back(art.name);
        const auto& rep = art.evals.at(StrategyKind::Fused).report;
        const std::size_t eval_len = rep.equity.size();
        std::vector<std::optional<double>> row;
        for (int p : t.periods) {
            const std::size_t window =
                std::min<std::size_t>(eval_len, static_cast<std::size_t>(p) *
                                                    static_cast<std::size_t>(spec.base.bt.groups_per_day));
            const std::size_t from = eval_len - window;
            long long T = 0, F = 0;
            for (const auto& f : rep.fills) {
                if (!f.correct.has_value()) continue;  // unscored
                if (f.bar_index < from) continue;
                ++T;
                if (!*f.correct) ++F;
            }
            if (T == 0) {
                row.push_back(std::nullopt);
            } else {
                row.push_back(backtest::kupiec_lr(T, F, t.alpha, spec.base.bt.kupiec_significance).lr);
            }
        }
        t.lr.push_back(std::move(row));
    }
    return t;
}

// Spec-only entry points (each builds a workspace for the first seed).
inline ComparisonTable run_ablation(const ExperimentSpec& spec) {
    return run_ablation(spec, build_workspace(spec, spec.seeds.at(0)));
}
inline CapitalTable run_capital_sweep(const ExperimentSpec& spec) {
    return run_capital_sweep(spec, build_workspace(spec, spec.seeds.at(0)));
}
inline ComparisonTable run_strategy_comparison(const ExperimentSpec& spec) {
    return run_strategy_comparison(spec, build_workspace(spec, spec.seeds.at(0)));
}
inline AccuracyTable run_accuracy_table(const ExperimentSpec& spec) {
    return run_accuracy_table(spec, build_workspace(spec, spec.seeds.at(0)));
}
inline KupiecTable run_kupiec_sweep(const ExperimentSpec& spec) {
    return run_kupiec_sweep(spec, build_workspace(spec, spec.seeds.at(0)));
}

// ---------------------------------------------------------------------------
// Table emission. CSVs carry 2-4 digits for reading; the JSON twins carry
// full precision.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string cell_ar(const MetricCell& c) { return fmt_fixed(c.annual_return, 2); }
inline std::string cell_sharpe(const MetricCell& c) { return c.sharpe ? fmt_fixed(*c.sharpe, 2) : "NA"; }

}  // namespace detail

inline std::string comparison_csv_wide(const ComparisonTable& t) {
    std::string out = "index";
    for (const auto& s : t.strategies) out += "," + s + "_annual_return," + s + "_sharpe";
    out += '\n';
    for (std::size_t i = 0; i < t.indices.size(); ++i) {
        out += t.indices[i];
        for (const auto& c : t.cells[i]) {
            out += ',' + detail::cell_ar(c) + ',' + detail::cell_sharpe(c);
        }
        out += '\n';
    }
    return out;
}

inline std::string comparison_csv_long(const ComparisonTable& t) {
    std::string out = "index,metric";
    for (const auto& s : t.strategies) out += "," + s;
    out += '\n';
    for (std::size_t i = 0; i < t.indices.size(); ++i) {
        out += t.indices[i] + ",annual_return";
        for (const auto& c : t.cells[i]) out += ',' + detail::cell_ar(c);
        out += '\n';
        out += t.indices[i] + ",sharpe";
        for (const auto& c : t.cells[i]) out += ',' + detail::cell_sharpe(c);
        out += '\n';
    }
    return out;
}

inline JVal comparison_json(const ComparisonTable& t, const std::string& kind) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("table", JVal::str(kind));
    JVal strat = JVal::arr();
    for (const auto& s : t.strategies) strat.push(JVal::str(s));
    o.set("strategies", std::move(strat));
    JVal rows = JVal::arr();
    for (std::size_t i = 0; i < t.indices.size(); ++i) {
        for (std::size_t s = 0; s < t.strategies.size(); ++s) {
            JVal r = JVal::obj();
            r.set("index", JVal::str(t.indices[i]));
            r.set("strategy", JVal::str(t.strategies[s]));
            r.set("annual_return", JVal::num(t.cells[i][s].annual_return));
            r.set("sharpe", t.cells[i][s].sharpe ? JVal::num(*t.cells[i][s].sharpe) : JVal::null());
            rows.push(std::move(r));
        }
    }
    o.set("rows", std::move(rows));
    return o;
}

inline std::string capital_csv(const CapitalTable& t) {
    std::string out = "index";
    for (double c : t.capitals) {
        const std::string cap = fmt_fixed(c, 0);
        out += "," + cap + "_annual_return," + cap + "_sharpe";
    }
    out += '\n';
    for (std::size_t i = 0; i < t.indices.size(); ++i) {
        out += t.indices[i];
        for (const auto& c : t.cells[i]) out += ',' + detail::cell_ar(c) + ',' + detail::cell_sharpe(c);
        out += '\n';
    }
    return out;
}

inline JVal capital_json(const CapitalTable& t) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("table", JVal::str("capital_sweep"));
    o.set("capitals", JVal::num_array(t.capitals));
    JVal rows = JVal::arr();
    for (std::size_t i = 0; i < t.indices.size(); ++i) {
        for (std::size_t c = 0; c < t.capitals.size(); ++c) {
            JVal r = JVal::obj();
            r.set("index", JVal::str(t.indices[i]));
            r.set("capital", JVal::num(t.capitals[c]));
            r.set("annual_return", JVal::num(t.cells[i][c].annual_return));
            r.set("sharpe", t.cells[i][c].sharpe ? JVal::num(*t.cells[i][c].sharpe) : JVal::null());
            rows.push(std::move(r));
        }
    }
    o.set("rows", std::move(rows));
    return o;
}

inline std::string accuracy_csv(const AccuracyTable& t) {
    std::string out = "index,order,placed,placed_pct,correct,correct_pct\n";
    for (const auto& r : t.rows) {
        const long long total = r.buy_placed + r.sell_placed;
        auto pct = [](long long num, long long den) {
            return den > 0 ? fmt_fixed(100.0 * static_cast<double>(num) / static_cast<double>(den), 2)
                           : std::string("NA");
        };
        out += r.index + ",buy," + std::to_string(r.buy_placed) + ',' + pct(r.buy_placed, total) +
               ',' + std::to_string(r.buy_correct) + ',' + pct(r.buy_correct, r.buy_placed) + '\n';
        out += r.index + ",sell," + std::to_string(r.sell_placed) + ',' + pct(r.sell_placed, total) +
               ',' + std::to_string(r.sell_correct) + ',' + pct(r.sell_correct, r.sell_placed) + '\n';
    }
    return out;
}

inline JVal accuracy_json(const AccuracyTable& t) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("table", JVal::str("order_accuracy"));
    JVal rows = JVal::arr();
    for (const auto& r : t.rows) {
        JVal e = JVal::obj();
        e.set("index", JVal::str(r.index));
        e.set("buy_placed", JVal::integer(r.buy_placed));
        e.set("buy_correct", JVal::integer(r.buy_correct));
        e.set("sell_placed", JVal::integer(r.sell_placed));
        e.set("sell_correct", JVal::integer(r.sell_correct));
        e.set("unscored", JVal::integer(r.unscored));
        rows.push(std::move(e));
    }
    o.set("rows", std::move(rows));
    JVal warn = JVal::arr();
    for (const auto& w : t.warnings) warn.push(JVal::str(w));
    o.set("warnings", std::move(warn));
    return o;
}

inline std::string kupiec_csv(const KupiecTable& t) {
    std::string out = "index";
    for (int p : t.periods) out += ',' + std::to_string(p);
    out += '\n';
    for (std::size_t i = 0; i < t.indices.size(); ++i) {
        out += t.indices[i];
        for (const auto& cell : t.lr[i]) out += ',' + (cell ? fmt_fixed(*cell, 4) : std::string("NA"));
        out += '\n';
    }
    return out;
}

inline JVal kupiec_json(const KupiecTable& t) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("table", JVal::str("kupiec_lr"));
    o.set("alpha", JVal::num(t.alpha));
    JVal periods = JVal::arr();
    for (int p : t.periods) periods.push(JVal::integer(p));
    o.set("periods", std::move(periods));
    JVal rows = JVal::arr();
    for (std::size_t i = 0; i < t.indices.size(); ++i) {
        JVal e = JVal::obj();
        e.set("index", JVal::str(t.indices[i]));
        JVal cells = JVal::arr();
        for (const auto& cell : t.lr[i]) cells.push(cell ? JVal::num(*cell) : JVal::null());
        e.set("lr", std::move(cells));
        rows.push(std::move(e));
    }
    o.set("rows", std::move(rows));
    return o;
}

// Paired equity curves for the model-versus-baseline figure.
inline std::string paired_curve_csv(const backtest::BacktestReport& model,
                                    const backtest::BacktestReport& baseline) {
    if (model.equity.size() != baseline.equity.size())
        throw Error(ErrorKind::Contract, "paired curves of different length");
    std::string out = "timestamp,fused,buy_hold\n";
    for (std::size_t i = 0; i < model.equity.size(); ++i) {
        out += data::format_datetime(model.curve_ts[i]);
        out += ',';
        out += fmt_g17(model.equity[i]);
        out += ',';
        out += fmt_g17(baseline.equity[i]);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration: one run directory per invocation with tables, curves,
// per-strategy reports, checkpoints, loss logs and a manifest.
// ---------------------------------------------------------------------------

struct RunOutcome {
    bool executed = false;  // false: identical manifest already present
    std::filesystem::path out_dir;
    std::vector<std::string> files;
    std::vector<std::string> warnings;
};

namespace detail {

inline void emit(RunOutcome& rc, const std::filesystem::path& dir, const std::string& rel,
                 const std::string& content) {
    write_file(dir / rel, content);
    rc.files.push_back(rel);
}

inline void run_one_seed(const ExperimentSpec& spec, std::uint64_t seed,
                         const std::filesystem::path& dir, const std::string& prefix,
                         RunOutcome& rc) {
    Workspace ws = build_workspace(spec, seed);

    const auto ablation = run_ablation(spec, ws);
    if (!ablation.strategies.empty()) {
        emit(rc, dir, prefix + "tables/ablation.csv", comparison_csv_wide(ablation));
        emit(rc, dir, prefix + "tables/ablation.json", comparison_json(ablation, "ablation").dump());
    }
    const auto capital = run_capital_sweep(spec, ws);
    emit(rc, dir, prefix + "tables/capital.csv", capital_csv(capital));
    emit(rc, dir, prefix + "tables/capital.json", capital_json(capital).dump());

    const auto comparison = run_strategy_comparison(spec, ws);
    if (!comparison.strategies.empty()) {
        emit(rc, dir, prefix + "tables/comparison.csv", comparison_csv_long(comparison));
        emit(rc, dir, prefix + "tables/comparison.json", comparison_json(comparison, "strategy_comparison").dump());
    }

    bool has_fused = !detail::filter_strategies(spec, {"fused"}).empty();
    if (has_fused) {
        const auto accuracy = run_accuracy_table(spec, ws);
        emit(rc, dir, prefix + "tables/accuracy.csv", accuracy_csv(accuracy));
        emit(rc, dir, prefix + "tables/accuracy.json", accuracy_json(accuracy).dump());
        for (const auto& w : accuracy.warnings) rc.warnings.push_back(w);

        const auto kupiec = run_kupiec_sweep(spec, ws);
        emit(rc, dir, prefix + "tables/kupiec.csv", kupiec_csv(kupiec));
        emit(rc, dir, prefix + "tables/kupiec.json", kupiec_json(kupiec).dump());
    }

    const bool has_buy_hold = !detail::filter_strategies(spec, {"buy_hold"}).empty();
    for (const auto& art : ws.items) {
        if (has_fused && has_buy_hold) {
            emit(rc, dir, prefix + "curves/" + art.name + "_model_vs_baseline.csv",
                 paired_curve_csv(art.evals.at(StrategyKind::Fused).report,
                                  art.evals.at(StrategyKind::BuyHold).report));
        }
        for (const auto& s : spec.strategies) {
            const StrategyKind kind = parse_strategy(s);
            const auto& ev = art.evals.at(kind);
            const std::string stem = prefix + "reports/" + art.name + "_" + s;
            JVal rep = JVal::obj();
            rep.set("version", JVal::integer(1));
            rep.set("index", JVal::str(art.name));
            rep.set("strategy", JVal::str(s));
            rep.set("seed", JVal::uinteger(seed));
            rep.set("report", backtest::report_to_json(ev.report));
            emit(rc, dir, stem + ".json", rep.dump());
            emit(rc, dir, stem + "_curve.csv", backtest::write_curve_csv(ev.report));
            emit(rc, dir, stem + "_fills.csv", backtest::write_fills_csv(ev.report));
            emit(rc, dir, stem + "_signals.csv", write_signals_csv(ev.trace));
        }
        emit(rc, dir, prefix + "checkpoints/" + art.name + ".json",
             serialize::checkpoint_to_json(make_checkpoint(art.prep, art.trained),
                                           /*include_replay=*/false));
        emit(rc, dir, prefix + "logs/" + art.name + "_loss.csv", loss_log_csv(art.trained.loss_log));
    }
}

}  // namespace detail

inline RunOutcome run_all(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                          bool force = false) {
    spec.validate();
    RunOutcome rc;
    rc.out_dir = out_dir;
    const std::uint64_t hash = spec_hash(spec);
    const auto manifest_path = out_dir / "manifest.json";
    if (!force && std::filesystem::exists(manifest_path)) {
        try {
            const auto j = nlohmann::json::parse(read_file(manifest_path));
            if (j.value("spec_hash", std::string()) == std::to_string(hash)) {
                rc.executed = false;
                return rc;
            }
        } catch (...) {
            // unreadable manifest: fall through and rerun
        }
    }

    for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
        const std::string prefix =
            spec.seeds.size() == 1 ? "" : "seed_" + std::to_string(spec.seeds[i]) + "/";
        detail::run_one_seed(spec, spec.seeds[i], out_dir, prefix, rc);
    }

    JVal manifest = JVal::obj();
    manifest.set("version", JVal::integer(1));
    manifest.set("kind", JVal::str("experiment-run"));
    manifest.set("spec_hash", JVal::str(std::to_string(hash)));
    manifest.set("spec", spec_to_jval(spec));
    JVal files = JVal::arr();
    for (const auto& f : rc.files) files.push(JVal::str(f));
    manifest.set("files", std::move(files));
    JVal warns = JVal::arr();
    for (const auto& w : rc.warnings) warns.push(JVal::str(w));
    manifest.set("warnings", std::move(warns));
    write_file(manifest_path, manifest.dump());
    rc.files.push_back("manifest.json");
    rc.executed = true;
    return rc;
}

}  // namespace arbr::experiments
