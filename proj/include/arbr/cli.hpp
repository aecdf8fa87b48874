#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "arbr/config.hpp"
#include "arbr/experiments.hpp"
#include "arbr/serialize.hpp"

namespace arbr::cli {

using config::RunConfig;

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool force = false;
    bool quiet = false;
};

inline void say(const GlobalOpts& g, const std::string& msg) {
    if (!g.quiet) std::fprintf(stdout, "%s\n", msg.c_str());
}

// defaults -> config file -> command-line overrides
inline RunConfig resolve_config(const GlobalOpts& g) {
    RunConfig cfg;
    if (!g.config_path.empty()) cfg = config::load_config_file(g.config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.train.seed = *g.seed;
    }
    cfg.validate();
    return cfg;
}

inline void cmd_ingest(const GlobalOpts& g, const std::string& input, const std::string& output) {
    const RunConfig cfg = resolve_config(g);
    std::istringstream in(read_file(input));
    const auto bars = data::parse_minute_csv(in);
    const auto groups = data::group_bars(bars, cfg.data.group_len, cfg.data.day_boundary_reset);
    write_file(output, data::write_group_csv(groups));
    say(g, "wrote " + output + " (" + std::to_string(groups.size()) + " groups from " +
               std::to_string(bars.size()) + " bars)");
}

inline void cmd_train(const GlobalOpts& g, const std::string& resume_path = "",
                      std::size_t stop_after = 0) {
    const RunConfig cfg = resolve_config(g);
    if (cfg.data.csv.empty()) throw Error(ErrorKind::Config, "config.data.csv is required for train");
    const auto prep = experiments::prepare_csv(cfg.data.csv, cfg);

    experiments::TrainState state = [&] {
        if (resume_path.empty()) return experiments::train_agent(prep, stop_after);
        const auto ck = serialize::checkpoint_from_json(read_file(resume_path));
        if (config::train_hash(ck.cfg) != config::train_hash(cfg))
            throw Error(ErrorKind::Config, "checkpoint is not compatible with the resolved config");
        if (ck.train_fingerprint != prep.train_fingerprint)
            throw Error(ErrorKind::Validation, "checkpoint was trained on a different data slice");
        auto st = experiments::state_from_checkpoint(ck);
        experiments::run_training(prep, st, stop_after);
        return st;
    }();

    const std::filesystem::path out(g.out);
    write_file(out / "checkpoint.json",
               serialize::checkpoint_to_json(experiments::make_checkpoint(prep, state)));
    write_file(out / "loss_log.csv", experiments::loss_log_csv(state.loss_log));
    say(g, "trained " + std::to_string(state.step) + " steps; checkpoint and loss log in " + g.out);
}

inline void cmd_backtest(const GlobalOpts& g, const std::string& checkpoint_path,
                         const std::string& strategy_name) {
    const RunConfig cfg = resolve_config(g);
    if (cfg.data.csv.empty()) throw Error(ErrorKind::Config, "config.data.csv is required for backtest");
    const experiments::StrategyKind kind = experiments::parse_strategy(strategy_name);
    const auto prep = experiments::prepare_csv(cfg.data.csv, cfg);

    std::optional<serialize::Checkpoint> ck;
    const drqn::QNetwork* net = nullptr;
    if (kind == experiments::StrategyKind::Fused || kind == experiments::StrategyKind::DrqnOnly) {
        if (checkpoint_path.empty())
            throw Error(ErrorKind::Usage, "strategy '" + strategy_name + "' needs --checkpoint");
        ck = serialize::checkpoint_from_json(read_file(checkpoint_path));
        if (config::train_hash(ck->cfg) != config::train_hash(cfg))
            throw Error(ErrorKind::Config, "checkpoint is not compatible with the resolved config");
        if (ck->train_fingerprint != prep.train_fingerprint)
            throw Error(ErrorKind::Validation, "checkpoint was trained on a different data slice");
        if (ck->input_width != static_cast<int>(prep.state_width()))
            throw Error(ErrorKind::Dimension, "checkpoint input width does not match the data");
        net = &ck->net;
    }

    const auto ev = experiments::eval_strategy(prep, net, kind, cfg.bt.capital);
    const std::filesystem::path out(g.out);
    JVal rep = JVal::obj();
    rep.set("version", JVal::integer(1));
    rep.set("strategy", JVal::str(strategy_name));
    rep.set("seed", JVal::uinteger(cfg.seed));
    rep.set("config", config::to_jval(cfg));
    rep.set("report", backtest::report_to_json(ev.report));
    write_file(out / "report.json", rep.dump());
    write_file(out / "curve.csv", backtest::write_curve_csv(ev.report));
    write_file(out / "fills.csv", backtest::write_fills_csv(ev.report));
    write_file(out / "signals.csv", experiments::write_signals_csv(ev.trace));
    say(g, "backtest done: annual return " + fmt_fixed(ev.report.annual_return, 2) + "%, " +
               std::to_string(ev.report.fills.size()) + " fills; outputs in " + g.out);
}

inline void cmd_experiment(const GlobalOpts& g, const std::string& spec_path) {
    auto spec = experiments::load_experiment_spec(spec_path);
    if (g.seed) spec.seeds = {*g.seed};
    const auto rc = experiments::run_all(spec, g.out, g.force);
    if (!rc.executed) {
        say(g, "unchanged spec already ran into " + g.out + " (use --force to rerun)");
        return;
    }
    for (const auto& w : rc.warnings) say(g, "warning: " + w);
    say(g, "experiment complete: " + std::to_string(rc.files.size()) + " files in " + g.out);
}

inline backtest::KupiecResult cmd_kupiec(long long orders, long long failures, double alpha,
                                         double significance) {
    return backtest::kupiec_lr(orders, failures, alpha, significance);
}

}  // namespace arbr::cli
