#pragma once

#include <json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "arbr/backtest.hpp"
#include "arbr/drqn.hpp"
#include "arbr/indicators.hpp"
#include "arbr/io.hpp"
#include "arbr/strategy.hpp"

namespace arbr::config {

struct DataConfig {
    std::string csv;
    int group_len = 30;
    bool day_boundary_reset = false;
    bool drop_partial_groups = false;
    int return_window = 8;
    double train_split = 0.7;  // fraction of groups used for training
};

struct BacktestConfig {
    double capital = 100000.0;
    double fee_rate = 0.001;
    double trade_fraction = 1.0;
    double periods_per_year = 2016.0;
    double risk_free = 0.0;
    int accuracy_horizon = 1;
    int groups_per_day = 8;
    double kupiec_alpha = 0.5;  // coin-flip benchmark for order failures
    double kupiec_significance = 0.05;
    bool simple_annualization = false;
};

struct StrategyConfig {
    strategy::ArbrRuleConfig rule;
    int double_ma_short = 5;
    int double_ma_long = 20;
};

struct RunConfig {
    std::uint64_t seed = 1;
    DataConfig data;
    indicators::FeatureConfig features;
    std::size_t pca_k = 20;
    drqn::TrainingConfig train;
    StrategyConfig strat;
    BacktestConfig bt;

    void validate() const {
        if (data.group_len < 1) throw Error(ErrorKind::Config, "data.group_len must be >= 1");
        if (data.return_window < 1) throw Error(ErrorKind::Config, "data.return_window must be >= 1");
        if (!(data.train_split > 0.0 && data.train_split < 1.0))
            throw Error(ErrorKind::Config, "data.train_split must lie strictly inside (0,1)");
        if (pca_k < 1) throw Error(ErrorKind::Config, "pca.k must be >= 1");
        if (pca_k > features.columns.size())
            throw Error(ErrorKind::Config, "pca.k exceeds the configured column count");
        train.validate();
        strat.rule.validate();
        if (strat.double_ma_short < 1 || strat.double_ma_short >= strat.double_ma_long)
            throw Error(ErrorKind::Config, "strategy: need 1 <= double_ma_short < double_ma_long");
        if (!(bt.capital > 0.0)) throw Error(ErrorKind::Config, "backtest.capital must be positive");
        if (bt.fee_rate < 0.0) throw Error(ErrorKind::Config, "backtest.fee_rate must be >= 0");
        if (!(bt.trade_fraction > 0.0 && bt.trade_fraction <= 1.0))
            throw Error(ErrorKind::Config, "backtest.trade_fraction must be in (0,1]");
        if (!(bt.periods_per_year > 0.0))
            throw Error(ErrorKind::Config, "backtest.periods_per_year must be positive");
        if (bt.accuracy_horizon < 1) throw Error(ErrorKind::Config, "backtest.accuracy_horizon must be >= 1");
        if (bt.groups_per_day < 1) throw Error(ErrorKind::Config, "backtest.groups_per_day must be >= 1");
        if (!(bt.kupiec_alpha > 0.0 && bt.kupiec_alpha < 1.0))
            throw Error(ErrorKind::Config, "backtest.kupiec_alpha must be in (0,1)");
    }
};

// ---------------------------------------------------------------------------
// Strict JSON loading: unknown keys are reported with their field path.
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw Error(ErrorKind::Config, path + ": expected an object");
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            throw Error(ErrorKind::Config, path + "." + item.key() + ": unknown field");
    }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::Config, path + "." + key + ": wrong type");
    }
}

inline void apply_data(const json& j, const std::string& path, DataConfig& c) {
    check_keys(j, path, {"csv", "group_len", "day_boundary_reset", "drop_partial_groups",
                         "return_window", "train_split"});
    read(j, path, "csv", c.csv);
    read(j, path, "group_len", c.group_len);
    read(j, path, "day_boundary_reset", c.day_boundary_reset);
    read(j, path, "drop_partial_groups", c.drop_partial_groups);
    read(j, path, "return_window", c.return_window);
    read(j, path, "train_split", c.train_split);
}

inline void apply_features(const json& j, const std::string& path, indicators::FeatureConfig& c) {
    check_keys(j, path, {"columns", "macd_fast", "macd_slow", "macd_signal", "boll_n", "boll_k",
                         "arbr_period", "arbr_daily"});
    read(j, path, "columns", c.columns);
    read(j, path, "macd_fast", c.macd_fast);
    read(j, path, "macd_slow", c.macd_slow);
    read(j, path, "macd_signal", c.macd_signal);
    read(j, path, "boll_n", c.boll_n);
    read(j, path, "boll_k", c.boll_k);
    read(j, path, "arbr_period", c.arbr_period);
    read(j, path, "arbr_daily", c.arbr_daily);
}

inline void apply_train(const json& j, const std::string& path, drqn::TrainingConfig& c) {
    check_keys(j, path, {"alpha", "gamma", "epsilon_start", "epsilon_end", "epsilon_anneal_frac",
                         "batch_size", "seq_len", "hidden", "sync_interval", "replay_capacity",
                         "episodes"});
    read(j, path, "alpha", c.alpha);
    read(j, path, "gamma", c.gamma);
    read(j, path, "epsilon_start", c.epsilon.start);
    read(j, path, "epsilon_end", c.epsilon.end);
    read(j, path, "epsilon_anneal_frac", c.epsilon.anneal_frac);
    read(j, path, "batch_size", c.batch_size);
    read(j, path, "seq_len", c.seq_len);
    read(j, path, "hidden", c.hidden);
    read(j, path, "sync_interval", c.sync_interval);
    read(j, path, "replay_capacity", c.replay_capacity);
    read(j, path, "episodes", c.episodes);
}

inline void apply_strategy(const json& j, const std::string& path, StrategyConfig& c) {
    check_keys(j, path, {"ar_oversold", "ar_overbought", "br_oversold", "br_overbought",
                         "divergence_margin", "double_ma_short", "double_ma_long"});
    read(j, path, "ar_oversold", c.rule.ar_oversold);
    read(j, path, "ar_overbought", c.rule.ar_overbought);
    read(j, path, "br_oversold", c.rule.br_oversold);
    read(j, path, "br_overbought", c.rule.br_overbought);
    read(j, path, "divergence_margin", c.rule.divergence_margin);
    read(j, path, "double_ma_short", c.double_ma_short);
    read(j, path, "double_ma_long", c.double_ma_long);
}

inline void apply_backtest(const json& j, const std::string& path, BacktestConfig& c) {
    check_keys(j, path, {"capital", "fee_rate", "trade_fraction", "periods_per_year", "risk_free",
                         "accuracy_horizon", "groups_per_day", "kupiec_alpha", "kupiec_significance",
                         "simple_annualization"});
    read(j, path, "capital", c.capital);
    read(j, path, "fee_rate", c.fee_rate);
    read(j, path, "trade_fraction", c.trade_fraction);
    read(j, path, "periods_per_year", c.periods_per_year);
    read(j, path, "risk_free", c.risk_free);
    read(j, path, "accuracy_horizon", c.accuracy_horizon);
    read(j, path, "groups_per_day", c.groups_per_day);
    read(j, path, "kupiec_alpha", c.kupiec_alpha);
    read(j, path, "kupiec_significance", c.kupiec_significance);
    read(j, path, "simple_annualization", c.simple_annualization);
}

}  // namespace detail

// Overlays the JSON document onto cfg (partial documents override defaults).
inline void apply_json(const nlohmann::json& j, RunConfig& cfg, const std::string& root = "config") {
    detail::check_keys(j, root, {"version", "seed", "data", "features", "pca", "train",
                                 "strategy", "backtest"});
    if (j.contains("version") && j.at("version") != 1)
        throw Error(ErrorKind::Config, root + ".version: unsupported version");
    detail::read(j, root, "seed", cfg.seed);
    if (j.contains("data")) detail::apply_data(j.at("data"), root + ".data", cfg.data);
    if (j.contains("features")) detail::apply_features(j.at("features"), root + ".features", cfg.features);
    if (j.contains("pca")) {
        detail::check_keys(j.at("pca"), root + ".pca", {"k"});
        detail::read(j.at("pca"), root + ".pca", "k", cfg.pca_k);
    }
    if (j.contains("train")) detail::apply_train(j.at("train"), root + ".train", cfg.train);
    if (j.contains("strategy")) detail::apply_strategy(j.at("strategy"), root + ".strategy", cfg.strat);
    if (j.contains("backtest")) detail::apply_backtest(j.at("backtest"), root + ".backtest", cfg.bt);
    cfg.train.seed = cfg.seed;
}

inline RunConfig load_config_file(const std::string& path) {
    RunConfig cfg;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "config " + path + ": " + e.what());
    }
    apply_json(j, cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Canonical echo (fixed key order) and hashes
// ---------------------------------------------------------------------------

inline JVal to_jval(const DataConfig& c) {
    JVal o = JVal::obj();
    o.set("csv", JVal::str(c.csv));
    o.set("group_len", JVal::integer(c.group_len));
    o.set("day_boundary_reset", JVal::boolean(c.day_boundary_reset));
    o.set("drop_partial_groups", JVal::boolean(c.drop_partial_groups));
    o.set("return_window", JVal::integer(c.return_window));
    o.set("train_split", JVal::num(c.train_split));
    return o;
}

inline JVal to_jval(const indicators::FeatureConfig& c) {
    JVal o = JVal::obj();
    JVal cols = JVal::arr();
    for (const auto& name : c.columns) cols.push(JVal::str(name));
    o.set("columns", std::move(cols));
    o.set("macd_fast", JVal::integer(c.macd_fast));
    o.set("macd_slow", JVal::integer(c.macd_slow));
    o.set("macd_signal", JVal::integer(c.macd_signal));
    o.set("boll_n", JVal::integer(c.boll_n));
    o.set("boll_k", JVal::num(c.boll_k));
    o.set("arbr_period", JVal::integer(c.arbr_period));
    o.set("arbr_daily", JVal::boolean(c.arbr_daily));
    return o;
}

inline JVal to_jval(const drqn::TrainingConfig& c) {
    JVal o = JVal::obj();
    o.set("alpha", JVal::num(c.alpha));
    o.set("gamma", JVal::num(c.gamma));
    o.set("epsilon_start", JVal::num(c.epsilon.start));
    o.set("epsilon_end", JVal::num(c.epsilon.end));
    o.set("epsilon_anneal_frac", JVal::num(c.epsilon.anneal_frac));
    o.set("batch_size", JVal::integer(c.batch_size));
    o.set("seq_len", JVal::integer(c.seq_len));
    o.set("hidden", JVal::integer(c.hidden));
    o.set("sync_interval", JVal::integer(c.sync_interval));
    o.set("replay_capacity", JVal::uinteger(c.replay_capacity));
    o.set("episodes", JVal::integer(c.episodes));
    return o;
}

inline JVal to_jval(const StrategyConfig& c) {
    JVal o = JVal::obj();
    o.set("ar_oversold", JVal::num(c.rule.ar_oversold));
    o.set("ar_overbought", JVal::num(c.rule.ar_overbought));
    o.set("br_oversold", JVal::num(c.rule.br_oversold));
    o.set("br_overbought", JVal::num(c.rule.br_overbought));
    o.set("divergence_margin", JVal::num(c.rule.divergence_margin));
    o.set("double_ma_short", JVal::integer(c.double_ma_short));
    o.set("double_ma_long", JVal::integer(c.double_ma_long));
    return o;
}

inline JVal to_jval(const BacktestConfig& c) {
    JVal o = JVal::obj();
    o.set("capital", JVal::num(c.capital));
    o.set("fee_rate", JVal::num(c.fee_rate));
    o.set("trade_fraction", JVal::num(c.trade_fraction));
    o.set("periods_per_year", JVal::num(c.periods_per_year));
    o.set("risk_free", JVal::num(c.risk_free));
    o.set("accuracy_horizon", JVal::integer(c.accuracy_horizon));
    o.set("groups_per_day", JVal::integer(c.groups_per_day));
    o.set("kupiec_alpha", JVal::num(c.kupiec_alpha));
    o.set("kupiec_significance", JVal::num(c.kupiec_significance));
    o.set("simple_annualization", JVal::boolean(c.simple_annualization));
    return o;
}

inline JVal to_jval(const RunConfig& cfg) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("seed", JVal::uinteger(cfg.seed));
    o.set("data", to_jval(cfg.data));
    o.set("features", to_jval(cfg.features));
    JVal p = JVal::obj();
    p.set("k", JVal::uinteger(cfg.pca_k));
    o.set("pca", std::move(p));
    o.set("train", to_jval(cfg.train));
    o.set("strategy", to_jval(cfg.strat));
    o.set("backtest", to_jval(cfg.bt));
    return o;
}

inline std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(to_jval(cfg).dump(0)); }

// Hash over the training-relevant sections only; checkpoints are reusable
// across runs that differ in strategy thresholds or portfolio settings.
inline std::uint64_t train_hash(const RunConfig& cfg) {
    JVal o = JVal::obj();
    o.set("seed", JVal::uinteger(cfg.seed));
    o.set("data", to_jval(cfg.data));
    o.set("features", to_jval(cfg.features));
    o.set("pca_k", JVal::uinteger(cfg.pca_k));
    o.set("train", to_jval(cfg.train));
    return fnv1a64(o.dump(0));
}

}  // namespace arbr::config
