#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "arbr/cli.hpp"
#include "arbr/experiments.hpp"

using namespace arbr;
namespace fs = std::filesystem;

namespace {

const fs::path kTestDir = ARBR_TEST_DIR;

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("arbr_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Golden files: compare by default; ARBR_REGEN=1 rewrites them.
void compare_or_regen(const fs::path& golden, const std::string& content) {
    if (std::getenv("ARBR_REGEN")) {
        write_file(golden, content);
        SUCCEED("regenerated " + golden.string());
        return;
    }
    REQUIRE(fs::exists(golden));
    CHECK(read_file(golden) == content);
}

// Deterministic 60-bar minute fixture shared by the ingest tests.
std::string minute_60_csv() {
    experiments::WalkConfig cfg;
    cfg.n_minutes = 60;
    return data::write_minute_csv(experiments::generate_walk_minutes(cfg, 77));
}

// Small training fixture + config (absolute csv path injected).
std::string train_tiny_csv() {
    experiments::WalkConfig cfg;
    cfg.n_minutes = 4200;
    return data::write_minute_csv(experiments::generate_walk_minutes(cfg, 31));
}

std::string train_tiny_config(const std::string& csv_path) {
    return std::string(R"({
  "version": 1,
  "seed": 5,
  "data": { "csv": ")") + csv_path + R"(", "group_len": 30, "train_split": 0.7 },
  "pca": { "k": 4 },
  "train": { "hidden": 8, "episodes": 2, "batch_size": 16, "seq_len": 4, "sync_interval": 50 }
})";
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(ARBR_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config resolution: defaults, file overlay, seed override", "[cli]") {
    cli::GlobalOpts g;
    const auto defaults = cli::resolve_config(g);
    CHECK(defaults.data.group_len == 30);
    CHECK(defaults.train.hidden == 32);
    CHECK(defaults.bt.fee_rate == 0.001);
    CHECK(defaults.pca_k == 20);
    CHECK(defaults.features.columns.size() == 24);

    const auto dir = temp_dir("config");
    write_file(dir / "cfg.json", R"({"seed": 9, "train": {"hidden": 12}, "backtest": {"fee_rate": 0.002}})");
    g.config_path = (dir / "cfg.json").string();
    auto cfg = cli::resolve_config(g);
    CHECK(cfg.seed == 9);
    CHECK(cfg.train.seed == 9);
    CHECK(cfg.train.hidden == 12);
    CHECK(cfg.bt.fee_rate == 0.002);
    CHECK(cfg.data.group_len == 30);  // untouched default

    g.seed = 42;
    cfg = cli::resolve_config(g);
    CHECK(cfg.seed == 42);
    CHECK(cfg.train.seed == 42);

    write_file(dir / "bad.json", R"({"train": {"hidden": 12, "widht": 3}})");
    cli::GlobalOpts gb;
    gb.config_path = (dir / "bad.json").string();
    try {
        cli::resolve_config(gb);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("config.train.widht") != std::string::npos);
    }

    write_file(dir / "type.json", R"({"train": {"hidden": "many"}})");
    cli::GlobalOpts gt;
    gt.config_path = (dir / "type.json").string();
    CHECK_THROWS_AS(cli::resolve_config(gt), Error);
}

TEST_CASE("ingest mirrors grouping and is byte-stable", "[cli]") {
    const auto dir = temp_dir("ingest");
    write_file(dir / "minute.csv", minute_60_csv());

    cli::GlobalOpts g;
    g.quiet = true;
    cli::cmd_ingest(g, (dir / "minute.csv").string(), (dir / "groups.csv").string());
    const std::string out1 = read_file(dir / "groups.csv");

    // 60 bars at group_len 30 -> header + 2 rows
    CHECK(std::count(out1.begin(), out1.end(), '\n') == 3);

    // idempotent rerun overwrites identically
    cli::cmd_ingest(g, (dir / "minute.csv").string(), (dir / "groups.csv").string());
    CHECK(read_file(dir / "groups.csv") == out1);

    compare_or_regen(kTestDir / "golden" / "ingest_60.csv", out1);
}

TEST_CASE("train writes a checkpoint and reproduces the golden loss log", "[cli]") {
    const auto dir = temp_dir("train");
    write_file(dir / "train.csv", train_tiny_csv());
    write_file(dir / "cfg.json", train_tiny_config((dir / "train.csv").string()));

    cli::GlobalOpts g;
    g.quiet = true;
    g.config_path = (dir / "cfg.json").string();
    g.out = (dir / "out1").string();
    cli::cmd_train(g);
    REQUIRE(fs::exists(dir / "out1" / "checkpoint.json"));
    REQUIRE(fs::exists(dir / "out1" / "loss_log.csv"));
    const std::string log1 = read_file(dir / "out1" / "loss_log.csv");
    compare_or_regen(kTestDir / "golden" / "loss_log.csv", log1);

    // a second identical run is byte-identical, checkpoint included
    g.out = (dir / "out2").string();
    cli::cmd_train(g);
    CHECK(read_file(dir / "out2" / "loss_log.csv") == log1);
    CHECK(read_file(dir / "out2" / "checkpoint.json") ==
          read_file(dir / "out1" / "checkpoint.json"));
}

TEST_CASE("interrupted training resumes into the identical checkpoint", "[cli]") {
    const auto dir = temp_dir("resume");
    write_file(dir / "train.csv", train_tiny_csv());
    write_file(dir / "cfg.json", train_tiny_config((dir / "train.csv").string()));

    cli::GlobalOpts g;
    g.quiet = true;
    g.config_path = (dir / "cfg.json").string();

    g.out = (dir / "full").string();
    cli::cmd_train(g);

    g.out = (dir / "half").string();
    cli::cmd_train(g, "", /*stop_after=*/60);

    g.out = (dir / "resumed").string();
    cli::cmd_train(g, (dir / "half" / "checkpoint.json").string());

    CHECK(read_file(dir / "resumed" / "checkpoint.json") ==
          read_file(dir / "full" / "checkpoint.json"));

    // a foreign checkpoint is rejected
    cli::GlobalOpts g2 = g;
    g2.seed = 999;
    g2.out = (dir / "bad").string();
    CHECK_THROWS_AS(cli::cmd_train(g2, (dir / "half" / "checkpoint.json").string()), Error);
}

TEST_CASE("backtest emits reports; never-trading rules give a flat curve", "[cli]") {
    const auto dir = temp_dir("backtest");
    write_file(dir / "train.csv", train_tiny_csv());
    write_file(dir / "cfg.json", train_tiny_config((dir / "train.csv").string()));

    cli::GlobalOpts g;
    g.quiet = true;
    g.config_path = (dir / "cfg.json").string();
    g.out = (dir / "ckpt").string();
    cli::cmd_train(g);
    const std::string ckpt = (dir / "ckpt" / "checkpoint.json").string();

    SECTION("fused strategy, byte-identical reruns") {
        g.out = (dir / "bt1").string();
        cli::cmd_backtest(g, ckpt, "fused");
        for (const char* f : {"report.json", "curve.csv", "fills.csv", "signals.csv"})
            REQUIRE(fs::exists(dir / "bt1" / f));
        g.out = (dir / "bt2").string();
        cli::cmd_backtest(g, ckpt, "fused");
        CHECK(read_file(dir / "bt2" / "report.json") == read_file(dir / "bt1" / "report.json"));
        CHECK(read_file(dir / "bt2" / "curve.csv") == read_file(dir / "bt1" / "curve.csv"));
    }

    SECTION("rule thresholds that never fire hold a flat equity curve") {
        // buy needs ar < -2 (impossible): the rule always holds
        nlohmann::json j = nlohmann::json::parse(read_file(dir / "cfg.json"));
        j["strategy"] = {{"ar_oversold", -2.0}, {"ar_overbought", 1e12},
                         {"br_oversold", -2.0}, {"br_overbought", 1e12},
                         {"divergence_margin", 1e9}};
        write_file(dir / "hold.json", j.dump());
        cli::GlobalOpts gh = g;
        gh.config_path = (dir / "hold.json").string();
        gh.out = (dir / "hold_out").string();
        cli::cmd_backtest(gh, "", "arbr-only");
        const std::string curve = read_file(dir / "hold_out" / "curve.csv");
        std::istringstream is(curve);
        std::string line;
        std::getline(is, line);  // header
        std::set<std::string> equities;
        while (std::getline(is, line))
            equities.insert(line.substr(line.find(',') + 1));
        CHECK(equities.size() == 1);  // constant equity
        CHECK(read_file(dir / "hold_out" / "fills.csv") == "timestamp,side,price,qty,fee,correct\n");
    }

    SECTION("baselines run without a checkpoint; network strategies demand one") {
        g.out = (dir / "bh").string();
        cli::cmd_backtest(g, "", "buy_hold");
        REQUIRE(fs::exists(dir / "bh" / "report.json"));
        CHECK_THROWS_AS(cli::cmd_backtest(g, "", "fused"), Error);
        CHECK_THROWS_AS(cli::cmd_backtest(g, ckpt, "frobnicate"), Error);
    }
}

TEST_CASE("experiment command produces a run directory and honors --force", "[cli]") {
    const auto dir = temp_dir("expcmd");
    experiments::WalkConfig wa;
    wa.n_minutes = 4200;
    write_file(dir / "a.csv", data::write_minute_csv(experiments::generate_walk_minutes(wa, 11)));
    const std::string spec = std::string(R"({
  "datasets": [ { "name": "alpha", "csv": ")") + (dir / "a.csv").string() + R"(" } ],
  "strategies": ["fused", "buy_hold"],
  "seeds": [3],
  "config": {
    "pca": { "k": 4 },
    "train": { "hidden": 8, "episodes": 2, "batch_size": 16, "seq_len": 4 }
  }
})";
    write_file(dir / "spec.json", spec);

    cli::GlobalOpts g;
    g.quiet = true;
    g.out = (dir / "run").string();
    cli::cmd_experiment(g, (dir / "spec.json").string());
    REQUIRE(fs::exists(dir / "run" / "manifest.json"));
    const auto stamp = read_file(dir / "run" / "manifest.json");

    // same spec: no-op; --force reruns and reproduces the same bytes
    cli::cmd_experiment(g, (dir / "spec.json").string());
    CHECK(read_file(dir / "run" / "manifest.json") == stamp);
    g.force = true;
    cli::cmd_experiment(g, (dir / "spec.json").string());
    CHECK(read_file(dir / "run" / "manifest.json") == stamp);
}

TEST_CASE("kupiec command computes the standalone statistic", "[cli]") {
    const auto r = cli::cmd_kupiec(250, 5, 0.05, 0.05);
    CHECK(r.T == 250);
    CHECK(r.lr > 0.0);
    CHECK_THROWS_AS(cli::cmd_kupiec(0, 0, 0.05, 0.05), Error);
}

TEST_CASE("binary exit codes follow the usage/data/numeric contract", "[cli]") {
    CHECK(run_binary("kupiec --orders 250 --failures 5 --alpha 0.05") == 0);
    CHECK(run_binary("--help") == 0);
    CHECK(run_binary("definitely-not-a-command") == 1);
    CHECK(run_binary("kupiec --orders 250") == 1);  // missing required option
    const auto dir = temp_dir("exit");
    write_file(dir / "empty.csv", "timestamp,open,high,low,close,volume\n");  // money missing
    CHECK(run_binary("ingest --input " + (dir / "empty.csv").string() + " --output " +
                     (dir / "out.csv").string()) == 2);
    CHECK(run_binary("ingest --input " + (dir / "nope.csv").string() + " --output " +
                     (dir / "out.csv").string()) == 2);
    // numeric exit path: kupiec with nonsensical alpha is a data/domain error
    CHECK(run_binary("kupiec --orders 10 --failures 2 --alpha 1.5") == 2);
}
