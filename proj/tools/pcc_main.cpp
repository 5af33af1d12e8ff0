#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "pcc/commands.hpp"
#include "pcc/errors.hpp"
#include "pcc/runconfig.hpp"

// Subcommand dispatcher. Each subcommand reads an optional `key = value`
// config file, then applies flag overrides in the order given (flags win
// over the file). The command implementations live in the library; this
// file only maps flags to config keys and exceptions to exit codes.

namespace {

using CommandFn = void (*)(pcc::RunConfig&, std::ostream&);

struct PendingRun {
  CommandFn fn = nullptr;
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Self-supervised multi-view correspondence toolkit: synthetic "
      "multi-camera scenes, cycle-consistency embedding training, and "
      "Hungarian matching evaluation."};
  app.require_subcommand(1);

  PendingRun run;
  auto add = [&run](CLI::App* sub, const char* flag, const char* key,
                    const char* help) {
    sub->add_option_function<std::string>(
        flag,
        [&run, key = std::string(key)](const std::string& value) {
          run.overrides.emplace_back(key, value);
        },
        help);
  };
  auto common = [&run, &add](CLI::App* sub, CommandFn fn) {
    sub->add_option_function<std::string>(
        "--config",
        [&run](const std::string& value) { run.config_path = value; },
        "key = value configuration file");
    add(sub, "--out", "out", "output directory");
    sub->callback([&run, fn] { run.fn = fn; });
    return sub;
  };

  CLI::App* generate = common(
      app.add_subcommand("generate", "write a synthetic multi-camera dataset"),
      &pcc::cmd_generate);
  add(generate, "--seed", "seed", "master dataset seed");
  add(generate, "--scenes", "n_scenes", "number of scenes");
  add(generate, "--fov", "fov_width", "camera field-of-view width in (0,1]");
  add(generate, "--keep", "keep_fraction",
      "shrink every camera window to this fraction after generation");
  add(generate, "--labels", "labels", "write identity labels: on|off");

  CLI::App* train = common(
      app.add_subcommand("train", "train an embedding encoder on a dataset"),
      &pcc::cmd_train);
  add(train, "--data", "data", "training dataset (JSONL)");
  add(train, "--masking", "masking", "pseudo-mask the cycle loss: on|off");
  add(train, "--cycles", "cycles",
      "triple cycle variants, a comma-separated subset of v0,v1,v2,v3");
  add(train, "--sampler", "sampler", "standard|time-divergent");
  add(train, "--seed", "seed", "training seed");
  add(train, "--epochs", "epochs", "training epochs");
  add(train, "--mask-mode", "mask_mode", "literal|row_select");
  add(train, "--lr", "learning_rate", "Adam learning rate");

  CLI::App* eval = common(
      app.add_subcommand("eval",
                         "tune theta on validation data and score a test set"),
      &pcc::cmd_eval);
  add(eval, "--checkpoint", "checkpoint", "trained encoder checkpoint");
  add(eval, "--validation", "validation", "labeled validation dataset (JSONL)");
  add(eval, "--test", "test", "labeled test dataset (JSONL)");
  add(eval, "--theta", "theta", "skip tuning and use this threshold");

  CLI::App* experiment = common(
      app.add_subcommand("experiment",
                         "run the masking x cycles x overlap ablation grid"),
      &pcc::cmd_experiment);
  add(experiment, "--seeds", "seeds", "seeds per cell");
  add(experiment, "--keeps", "keeps",
      "comma-separated overlap keep fractions, e.g. 1.0,0.8,0.6");
  add(experiment, "--cycle-sets", "cycle_sets",
      "semicolon-separated cycle subsets, e.g. v1;v0,v1,v2,v3");
  add(experiment, "--epochs", "epochs", "training epochs per cell");
  add(experiment, "--sampler", "sampler", "standard|time-divergent");
  add(experiment, "--mask-mode", "mask_mode", "literal|row_select");

  CLI::App* verify = common(
      app.add_subcommand("verify-theory",
                         "check the cycle identities on random consistent "
                         "matchings"),
      &pcc::cmd_verify_theory);
  add(verify, "--instances", "instances", "number of random instances");
  add(verify, "--seed", "seed", "instance generator seed");
  verify->add_flag_callback(
      "--inject-fault",
      [&run] { run.overrides.emplace_back("inject_fault", "on"); },
      "corrupt one matching to demonstrate violation detection");

  CLI::App* grad = common(
      app.add_subcommand("grad-check",
                         "compare analytic loss gradients with finite "
                         "differences"),
      &pcc::cmd_grad_check);
  add(grad, "--batches", "batches", "number of random batches");
  add(grad, "--samples", "samples", "probed coordinates per parameter");
  add(grad, "--step", "step", "finite difference step");
  add(grad, "--seed", "seed", "probe seed");
  add(grad, "--tol", "tol", "maximum relative error accepted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? pcc::kExitOk : pcc::kExitConfig;
  }

  try {
    pcc::RunConfig cfg = run.config_path.empty()
                             ? pcc::RunConfig{}
                             : pcc::RunConfig::from_file(run.config_path);
    for (const auto& [key, value] : run.overrides) cfg.set(key, value);
    run.fn(cfg, std::cout);
    return pcc::kExitOk;
  } catch (const pcc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pcc::kExitConfig;
  } catch (const pcc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return pcc::kExitData;
  } catch (const pcc::VerifyError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return pcc::kExitVerify;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
