// Command-line front end: ingest, train, backtest, experiment, kupiec.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "arbr/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ARBR sentiment + recurrent deep-Q trading research engine"};
    app.require_subcommand(1);

    arbr::cli::GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", g.seed, "override the run seed");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_flag("--force", g.force, "rerun even if outputs are up to date");
    app.add_flag("--quiet", g.quiet, "suppress progress output");

    std::string input, output, resume, checkpoint, strategy = "fused", spec_path;
    std::size_t stop_after = 0;
    long long orders = 0, failures = 0;
    double alpha = 0.5, significance = 0.05;

    auto* ingest = app.add_subcommand("ingest", "aggregate a minute CSV into group bars");
    ingest->fallthrough();
    ingest->add_option("--input", input, "minute OHLCV CSV")->required();
    ingest->add_option("--output", output, "grouped-bar CSV to write")->required();

    auto* train = app.add_subcommand("train", "train the recurrent Q-network");
    train->fallthrough();
    train->add_option("--resume", resume, "continue from a checkpoint");
    train->add_option("--stop-after", stop_after, "pause after this many total steps");

    auto* bt = app.add_subcommand("backtest", "run one strategy over the evaluation slice");
    bt->fallthrough();
    bt->add_option("--checkpoint", checkpoint, "network checkpoint (fused / drqn-only)");
    bt->add_option("--strategy", strategy,
                   "fused | drqn-only | arbr-only | double_ma | buy_hold")
        ->capture_default_str();

    auto* exp = app.add_subcommand("experiment", "run an experiment spec end to end");
    exp->fallthrough();
    exp->add_option("--spec", spec_path, "experiment spec JSON")->required();

    auto* kup = app.add_subcommand("kupiec", "standalone failure-frequency test");
    kup->fallthrough();
    kup->add_option("--orders", orders, "total orders T")->required();
    kup->add_option("--failures", failures, "failures F")->required();
    kup->add_option("--alpha", alpha, "benchmark failure rate")->capture_default_str();
    kup->add_option("--significance", significance, "rejection level")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            arbr::cli::cmd_ingest(g, input, output);
        } else if (*train) {
            arbr::cli::cmd_train(g, resume, stop_after);
        } else if (*bt) {
            arbr::cli::cmd_backtest(g, checkpoint, strategy);
        } else if (*exp) {
            arbr::cli::cmd_experiment(g, spec_path);
        } else if (*kup) {
            const auto r = arbr::cli::cmd_kupiec(orders, failures, alpha, significance);
            std::printf("T=%lld F=%lld alpha=%s\n", r.T, r.F, arbr::fmt_g17(r.alpha).c_str());
            std::printf("LR=%s p=%s reject=%s\n", arbr::fmt_g17(r.lr).c_str(),
                        arbr::fmt_g17(r.p_value).c_str(), r.reject ? "yes" : "no");
        }
    } catch (const arbr::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
    return 0;
}
