#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pcc/runconfig.hpp"

using pcc::ConfigError;
using pcc::RunConfig;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

// Runs the installed binary through the shell; output is captured to a
// file because the exit status is the part under test.
CliResult run_cli(const std::string& args, const fs::path& dir,
                  const std::string& env_prefix = "") {
  const fs::path capture = dir / "cli_output.txt";
  const std::string cmd = env_prefix + std::string(PCC_CLI_PATH) + " " + args +
                          " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = read_file(capture);
  return result;
}

// Small-geometry dataset keys keeping CLI round trips fast.
const char* kSmallScene =
    "n_timesteps = 6\n"
    "n_identities = 8\n"
    "obs_dim = 12\n"
    "latent_dim = 6\n"
    "n_scenes = 1\n";

}  // namespace

TEST_CASE("run config parsing") {
  const fs::path dir = fresh_dir("pcc_runconfig_test");

  SECTION("comments, blank lines and whitespace are tolerated") {
    write_file(dir / "a.cfg",
               "# full line comment\n"
               "\n"
               "  epochs =  12   # trailing comment\n"
               "name = run one\n");
    RunConfig cfg = RunConfig::from_file((dir / "a.cfg").string());
    REQUIRE(cfg.get_int("epochs", 1) == 12);
    REQUIRE(cfg.get_string("name", "") == "run one");
  }

  SECTION("malformed lines are rejected") {
    write_file(dir / "b.cfg", "no equals sign here\n");
    REQUIRE_THROWS_AS(RunConfig::from_file((dir / "b.cfg").string()),
                      ConfigError);
    write_file(dir / "c.cfg", "= value without key\n");
    REQUIRE_THROWS_AS(RunConfig::from_file((dir / "c.cfg").string()),
                      ConfigError);
    write_file(dir / "d.cfg", "seed = 1\nseed = 2\n");
    REQUIRE_THROWS_AS(RunConfig::from_file((dir / "d.cfg").string()),
                      ConfigError);
    REQUIRE_THROWS_AS(RunConfig::from_file((dir / "missing.cfg").string()),
                      ConfigError);
  }

  SECTION("flag overrides win over the file") {
    write_file(dir / "e.cfg", "epochs = 3\n");
    RunConfig cfg = RunConfig::from_file((dir / "e.cfg").string());
    cfg.set("epochs", "9");
    REQUIRE(cfg.get_int("epochs", 1) == 9);
  }

  SECTION("typed getters validate their values") {
    RunConfig cfg;
    cfg.set("count", "3x");
    cfg.set("rate", "fast");
    cfg.set("flag", "maybe");
    REQUIRE_THROWS_AS(cfg.get_int("count", 0), ConfigError);
    REQUIRE_THROWS_AS(cfg.get_double("rate", 0.0), ConfigError);
    REQUIRE_THROWS_AS(cfg.get_bool("flag", false), ConfigError);

    RunConfig ok;
    ok.set("count", "42");
    ok.set("rate", "0.125");
    ok.set("flag", "on");
    REQUIRE(ok.get_int("count", 0) == 42);
    REQUIRE(ok.get_double("rate", 0.0) == 0.125);
    REQUIRE(ok.get_bool("flag", false));
    REQUIRE(ok.get_u64("big", 18446744073709551615ull) ==
            18446744073709551615ull);
  }

  SECTION("missing required keys are named") {
    RunConfig cfg;
    REQUIRE_THROWS_WITH(cfg.require_string("data"),
                        Catch::Matchers::ContainsSubstring("data"));
  }

  SECTION("unconsumed keys are rejected") {
    RunConfig cfg;
    cfg.set("epochs", "3");
    cfg.set("typo_key", "1");
    cfg.get_int("epochs", 1);
    REQUIRE_THROWS_WITH(cfg.reject_unknown(),
                        Catch::Matchers::ContainsSubstring("typo_key"));
  }

  SECTION("resolved text records effective values, defaults included") {
    RunConfig cfg;
    cfg.set("epochs", "7");
    cfg.get_int("epochs", 1);
    cfg.get_double("learning_rate", 1e-3);
    cfg.get_bool("masking", true);
    const std::string text = cfg.resolved_text();
    REQUIRE(text ==
            "epochs = 7\n"
            "learning_rate = 0.001\n"
            "masking = on\n");
    REQUIRE(cfg.resolved_hash() != 0);

    RunConfig again;
    again.set("epochs", "7");
    again.get_bool("masking", true);
    again.get_int("epochs", 1);
    again.get_double("learning_rate", 1e-3);
    REQUIRE(again.resolved_hash() == cfg.resolved_hash());
  }

  SECTION("defaults stick across repeated reads") {
    RunConfig cfg;
    REQUIRE(cfg.get_int("epochs", 5) == 5);
    REQUIRE(cfg.get_int("epochs", 9) == 5);
    REQUIRE_FALSE(cfg.has("epochs"));
  }
}

TEST_CASE("command line round trip") {
  const fs::path dir = fresh_dir("pcc_cli_test");
  write_file(dir / "scene.cfg", kSmallScene);
  const std::string scene_cfg = " --config " + (dir / "scene.cfg").string();

  // Shared fixture: one train set, one validation set, one test set.
  REQUIRE(run_cli("generate" + scene_cfg + " --seed 11 --out " +
                      (dir / "train-data").string(),
                  dir)
              .exit_code == 0);
  REQUIRE(run_cli("generate" + scene_cfg + " --seed 12 --out " +
                      (dir / "val-data").string(),
                  dir)
              .exit_code == 0);
  REQUIRE(run_cli("generate" + scene_cfg + " --seed 13 --out " +
                      (dir / "test-data").string(),
                  dir)
              .exit_code == 0);

  SECTION("generate writes dataset, stats and resolved config") {
    REQUIRE(fs::exists(dir / "train-data" / "dataset.jsonl"));
    REQUIRE(fs::exists(dir / "train-data" / "stats.txt"));
    const std::string config = read_file(dir / "train-data" / "config.txt");
    REQUIRE(config.find("seed = 11\n") != std::string::npos);
    REQUIRE(config.find("n_timesteps = 6\n") != std::string::npos);
    REQUIRE(config.find("fov_width = 0.6\n") != std::string::npos);
    const std::string stats = read_file(dir / "train-data" / "stats.txt");
    REQUIRE(stats.find("two_view_jaccard ") != std::string::npos);
  }

  SECTION("same seed regenerates byte-identical files") {
    REQUIRE(run_cli("generate" + scene_cfg + " --seed 11 --out " +
                        (dir / "again").string(),
                    dir)
                .exit_code == 0);
    REQUIRE(read_file(dir / "again" / "dataset.jsonl") ==
            read_file(dir / "train-data" / "dataset.jsonl"));
  }

  SECTION("train and eval produce their artifacts") {
    const CliResult trained =
        run_cli("train --data " + (dir / "train-data/dataset.jsonl").string() +
                    " --epochs 1 --seed 5 --out " + (dir / "run").string(),
                dir);
    INFO(trained.output);
    REQUIRE(trained.exit_code == 0);
    REQUIRE(fs::exists(dir / "run" / "checkpoint.txt"));
    const std::string loss_log = read_file(dir / "run" / "loss_log.csv");
    REQUIRE(loss_log.rfind("epoch,mean_loss\n1,", 0) == 0);
    const std::string config = read_file(dir / "run" / "config.txt");
    REQUIRE(config.find("masking = on\n") != std::string::npos);
    REQUIRE(config.find("cycles = v0,v1,v2,v3\n") != std::string::npos);

    const CliResult scored = run_cli(
        "eval --checkpoint " + (dir / "run/checkpoint.txt").string() +
            " --validation " + (dir / "val-data/dataset.jsonl").string() +
            " --test " + (dir / "test-data/dataset.jsonl").string() +
            " --out " + (dir / "scores").string(),
        dir);
    INFO(scored.output);
    REQUIRE(scored.exit_code == 0);
    REQUIRE(scored.output.find("macro_f1 ") != std::string::npos);
    REQUIRE(read_file(dir / "scores" / "instances.csv")
                .rfind("scene,timestep,tp,fp,fn,precision,recall,f1\n", 0) == 0);
    const std::string summary = read_file(dir / "scores" / "summary.csv");
    REQUIRE(summary.find("\nmacro,") != std::string::npos);
    REQUIRE(summary.find("\nmicro,") != std::string::npos);
    REQUIRE(fs::exists(dir / "scores" / "theta.txt"));

    // A fixed theta skips tuning and needs no validation split.
    const CliResult fixed = run_cli(
        "eval --checkpoint " + (dir / "run/checkpoint.txt").string() +
            " --test " + (dir / "test-data/dataset.jsonl").string() +
            " --theta 0.5 --out " + (dir / "scores-fixed").string(),
        dir);
    REQUIRE(fixed.exit_code == 0);
    REQUIRE(read_file(dir / "scores-fixed" / "theta.txt") == "0.5\n");
  }

  SECTION("config errors exit 2") {
    REQUIRE(run_cli("train --data " +
                        (dir / "train-data/dataset.jsonl").string() +
                        " --cycles v7 --out " + (dir / "bad").string(),
                    dir)
                .exit_code == 2);
    write_file(dir / "typo.cfg", "epochz = 3\n");
    const CliResult unknown =
        run_cli("generate --config " + (dir / "typo.cfg").string() +
                    " --out " + (dir / "bad2").string(),
                dir);
    REQUIRE(unknown.exit_code == 2);
    REQUIRE(unknown.output.find("epochz") != std::string::npos);
    REQUIRE(run_cli("train --out " + (dir / "bad3").string(), dir).exit_code ==
            2);
  }

  SECTION("data errors exit 3") {
    REQUIRE(run_cli("train --data " + (dir / "absent.jsonl").string() +
                        " --out " + (dir / "bad4").string(),
                    dir)
                .exit_code == 3);
    write_file(dir / "garbage.jsonl", "not json\n");
    REQUIRE(run_cli("train --data " + (dir / "garbage.jsonl").string() +
                        " --out " + (dir / "bad5").string(),
                    dir)
                .exit_code == 3);
  }

  SECTION("verification commands exit 4 on violations") {
    const CliResult fault =
        run_cli("verify-theory --inject-fault --out " + (dir / "vt").string(),
                dir);
    REQUIRE(fault.exit_code == 4);
    REQUIRE(fault.output.find("direct matching lacks that pair") !=
            std::string::npos);

    const CliResult ok = run_cli(
        "verify-theory --instances 50 --out " + (dir / "vt-ok").string(), dir);
    REQUIRE(ok.exit_code == 0);
    REQUIRE(fs::exists(dir / "vt-ok" / "report.txt"));
  }

  SECTION("experiment grid is resumable") {
    const std::string args =
        "experiment" + scene_cfg + " --seeds 1 --keeps 1.0 --cycle-sets v1 "
        "--epochs 1 --out " +
        (dir / "grid").string();
    const CliResult first = run_cli(args, dir);
    INFO(first.output);
    REQUIRE(first.exit_code == 0);
    REQUIRE(first.output.find("cached") == std::string::npos);
    const std::string results = read_file(dir / "grid" / "results.csv");
    REQUIRE(results.rfind("cycles,masking,keep100_mean,keep100_std\n", 0) == 0);
    REQUIRE(results.find("v1,off,") != std::string::npos);
    REQUIRE(results.find("v1,on,") != std::string::npos);

    const CliResult second = run_cli(args, dir);
    REQUIRE(second.exit_code == 0);
    REQUIRE(second.output.find("cached") != std::string::npos);
    REQUIRE(read_file(dir / "grid" / "results.csv") == results);
  }

  SECTION("relative outputs land under the output root") {
    const CliResult rooted =
        run_cli("generate" + scene_cfg + " --seed 11 --out rooted-run", dir,
                "PCC_OUTPUT_ROOT=" + dir.string() + " ");
    REQUIRE(rooted.exit_code == 0);
    REQUIRE(fs::exists(dir / "rooted-run" / "dataset.jsonl"));
  }
}
