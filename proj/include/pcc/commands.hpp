#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "pcc/dataset_io.hpp"
#include "pcc/errors.hpp"
#include "pcc/experiment.hpp"
#include "pcc/gradcheck.hpp"
#include "pcc/inference.hpp"
#include "pcc/runconfig.hpp"
#include "pcc/scenes.hpp"
#include "pcc/theory.hpp"
#include "pcc/train.hpp"

// The command implementations behind the CLI, kept in the library so tests
// can drive them in-process. Each command reads its keys from a RunConfig,
// rejects anything it does not understand, performs its work inside an
// output directory, and writes the resolved configuration next to its
// outputs. Relative output directories land under $PCC_OUTPUT_ROOT when
// that is set.

namespace pcc {

namespace detail {

inline std::filesystem::path resolve_out_dir(RunConfig& cfg,
                                             const std::string& fallback) {
  std::filesystem::path dir = cfg.get_string("out", fallback);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("PCC_OUTPUT_ROOT"))
      dir = std::filesystem::path(root) / dir;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw DataError("cannot create output directory " + dir.string() + ": " +
                    ec.message());
  return dir;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw DataError("failed writing: " + path.string());
}

// Consumes the scene-geometry keys, defaults mirroring SceneConfig.
inline SceneConfig scene_config_from(RunConfig& cfg) {
  const SceneConfig defaults;
  SceneConfig scene;
  scene.n_cameras = cfg.get_int("n_cameras", defaults.n_cameras);
  scene.n_timesteps = cfg.get_int("n_timesteps", defaults.n_timesteps);
  scene.n_identities = cfg.get_int("n_identities", defaults.n_identities);
  scene.latent_dim = cfg.get_int("latent_dim", defaults.latent_dim);
  scene.obs_dim = cfg.get_int("obs_dim", defaults.obs_dim);
  scene.fov_width = cfg.get_double("fov_width", defaults.fov_width);
  scene.noise_sigma = cfg.get_double("noise_sigma", defaults.noise_sigma);
  scene.camera_distortion =
      cfg.get_double("camera_distortion", defaults.camera_distortion);
  scene.walk_step = cfg.get_double("walk_step", defaults.walk_step);
  return scene;
}

inline MaskMode mask_mode_from(RunConfig& cfg) {
  const std::string mode = cfg.get_string("mask_mode", "literal");
  if (mode == "literal") return MaskMode::kLiteral;
  if (mode == "row_select") return MaskMode::kRowSelect;
  throw ConfigError("config key 'mask_mode': expected literal|row_select, got " +
                    mode);
}

inline SamplerKind sampler_from(RunConfig& cfg) {
  const std::string name = cfg.get_string("sampler", "time-divergent");
  if (name == "time-divergent") return SamplerKind::kTimeDivergent;
  if (name == "standard") return SamplerKind::kStandard;
  throw ConfigError(
      "config key 'sampler': expected standard|time-divergent, got " + name);
}

// Consumes the training keys shared by cmd_train and cmd_experiment.
// The cycle-set string is parsed eagerly so typos fail before training.
inline TrainConfig train_config_from(RunConfig& cfg) {
  TrainConfig tc;
  tc.encoder.hidden_dim = cfg.get_int("hidden_dim", tc.encoder.hidden_dim);
  tc.encoder.embed_dim = cfg.get_int("embed_dim", tc.encoder.embed_dim);
  tc.margins.m_plus = cfg.get_double("m_plus", tc.margins.m_plus);
  tc.margins.m_empty = cfg.get_double("m_empty", tc.margins.m_empty);
  tc.margins.m_unmasked = cfg.get_double("m_unmasked", tc.margins.m_unmasked);
  tc.margins.mask_mode = mask_mode_from(cfg);
  tc.temperature.tau0 = cfg.get_double("tau0", tc.temperature.tau0);
  tc.adam.learning_rate = cfg.get_double("learning_rate", tc.adam.learning_rate);
  tc.cycles = parse_cycle_set(cfg.get_string("cycles", "v0,v1,v2,v3"));
  tc.sampler = sampler_from(cfg);
  tc.masking = cfg.get_bool("masking", true);
  tc.epochs = cfg.get_int("epochs", tc.epochs);
  tc.seed = cfg.get_u64("seed", tc.seed);
  return tc;
}

inline std::string format_stats(const Dataset& ds) {
  double two = 0.0, three = 0.0, people = 0.0;
  long frames = 0;
  for (const auto& scene : ds.scenes) {
    const OverlapStats stats = overlap_stats(scene);
    two += stats.two_view_jaccard;
    three += stats.three_view_jaccard;
    people += stats.mean_people_per_frame;
    frames += stats.frames;
  }
  const double n = static_cast<double>(ds.scenes.size());
  std::string text;
  text += "scenes " + std::to_string(ds.scenes.size()) + "\n";
  text += "frames " + std::to_string(frames) + "\n";
  text += "two_view_jaccard " + format_double(two / n) + "\n";
  text += "three_view_jaccard " + format_double(three / n) + "\n";
  text += "mean_people_per_frame " + format_double(people / n) + "\n";
  return text;
}

}  // namespace detail

inline void cmd_generate(RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir = detail::resolve_out_dir(cfg, "pcc-generate");
  DatasetConfig dc;
  dc.scene = detail::scene_config_from(cfg);
  dc.scene.seed = cfg.get_u64("seed", dc.scene.seed);
  dc.n_scenes = cfg.get_int("n_scenes", dc.n_scenes);
  const double keep = cfg.get_double("keep_fraction", 1.0);
  const bool labels = cfg.get_bool("labels", true);
  cfg.reject_unknown();
  detail::write_text(dir / "config.txt", cfg.resolved_text());

  Dataset ds = generate_dataset(dc);
  if (keep < 1.0) ds = reduce_fov(ds, keep);

  write_dataset_jsonl(ds, (dir / "dataset.jsonl").string(), labels);
  const std::string stats = detail::format_stats(ds);
  detail::write_text(dir / "stats.txt", stats);
  out << stats;
  out << "wrote " << (dir / "dataset.jsonl").string() << "\n";
}

inline void cmd_train(RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir = detail::resolve_out_dir(cfg, "pcc-train");
  const std::string data_path = cfg.require_string("data");
  TrainConfig tc = detail::train_config_from(cfg);
  cfg.reject_unknown();
  detail::write_text(dir / "config.txt", cfg.resolved_text());

  const Dataset ds = read_dataset_jsonl(data_path);
  const TrainResult result = train(ds, tc, &out);

  save_checkpoint(result.encoder, tc.seed, cfg.resolved_hash(),
                  (dir / "checkpoint.txt").string());
  std::string loss_log = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e)
    loss_log += std::to_string(e + 1) + "," +
                detail::format_double(result.epoch_mean_loss[e]) + "\n";
  detail::write_text(dir / "loss_log.csv", loss_log);

  out << "trained " << result.batches << " batches (" << result.skipped
      << " skipped), final mean loss "
      << detail::format_double(result.epoch_mean_loss.back()) << "\n";
  out << "wrote " << (dir / "checkpoint.txt").string() << "\n";
}

inline void cmd_eval(RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir = detail::resolve_out_dir(cfg, "pcc-eval");
  const std::string checkpoint_path = cfg.require_string("checkpoint");
  const std::string validation_path = cfg.get_string("validation", "");
  const std::string test_path = cfg.require_string("test");
  const bool theta_fixed = cfg.has("theta");
  const double theta_override = cfg.get_double("theta", 0.5);
  cfg.reject_unknown();
  if (!theta_fixed && validation_path.empty())
    throw ConfigError("eval needs either a fixed theta or a validation set");
  detail::write_text(dir / "config.txt", cfg.resolved_text());

  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const Dataset test = read_dataset_jsonl(test_path);
  if (dataset_obs_dim(test) != ck.encoder.obs_dim())
    throw DataError("checkpoint expects observation dimension " +
                    std::to_string(ck.encoder.obs_dim()) + " but " + test_path +
                    " has " + std::to_string(dataset_obs_dim(test)));

  double theta = theta_override;
  if (!theta_fixed) {
    const Dataset validation = read_dataset_jsonl(validation_path);
    theta = tune_theta(ck.encoder, validation, {});
  }

  const MatchReport report = evaluate(ck.encoder, test, theta);
  write_instances_csv(report, (dir / "instances.csv").string());
  write_summary_csv(report, (dir / "summary.csv").string());
  detail::write_text(dir / "theta.txt", detail::format_double(theta) + "\n");

  out << "theta " << detail::format_double(theta) << "\n";
  out << "macro_f1 " << detail::format_double(report.f1) << "\n";
  out << "micro_f1 " << detail::format_double(report.micro_f1) << "\n";
  out << "wrote " << (dir / "summary.csv").string() << "\n";
}

inline void cmd_experiment(RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir =
      detail::resolve_out_dir(cfg, "pcc-experiment");

  ExperimentGrid grid;
  grid.base = detail::train_config_from(cfg);
  grid.dataset.scene = detail::scene_config_from(cfg);
  grid.dataset.n_scenes = cfg.get_int("n_scenes", grid.dataset.n_scenes);
  grid.seeds = cfg.get_int("seeds", grid.seeds);
  grid.train_scene_seed_base =
      cfg.get_u64("train_scene_seed_base", grid.train_scene_seed_base);
  grid.train_seed_base = cfg.get_u64("train_seed_base", grid.train_seed_base);
  grid.val_seed = cfg.get_u64("val_seed", grid.val_seed);
  grid.test_seed = cfg.get_u64("test_seed", grid.test_seed);
  grid.val_scenes = cfg.get_int("val_scenes", grid.val_scenes);
  grid.test_scenes = cfg.get_int("test_scenes", grid.test_scenes);

  const std::string sets = cfg.get_string("cycle_sets", "v1;v0,v1,v2,v3");
  grid.cycle_sets.clear();
  for (std::size_t start = 0; start <= sets.size();) {
    std::size_t semi = sets.find(';', start);
    if (semi == std::string::npos) semi = sets.size();
    grid.cycle_sets.push_back(sets.substr(start, semi - start));
    start = semi + 1;
  }

  const std::string keeps = cfg.get_string("keeps", "1.0,0.8,0.6");
  grid.keeps.clear();
  for (std::size_t start = 0; start <= keeps.size();) {
    std::size_t comma = keeps.find(',', start);
    if (comma == std::string::npos) comma = keeps.size();
    const std::string item = keeps.substr(start, comma - start);
    try {
      std::size_t used = 0;
      grid.keeps.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("config key 'keeps': not a number: " + item);
    }
    start = comma + 1;
  }
  cfg.reject_unknown();
  detail::write_text(dir / "config.txt", cfg.resolved_text());

  const ExperimentResult result = run_experiment(grid, dir, out);
  write_experiment_csv(result, (dir / "results.csv").string());
  const std::string table = format_experiment_table(result);
  detail::write_text(dir / "results.txt", table);
  out << table;
  out << "wrote " << (dir / "results.csv").string() << "\n";
}

inline void cmd_verify_theory(RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir =
      detail::resolve_out_dir(cfg, "pcc-verify-theory");
  const int instances = cfg.get_int("instances", 1000);
  const std::uint64_t seed = cfg.get_u64("seed", 7);
  const bool inject_fault = cfg.get_bool("inject_fault", false);
  cfg.reject_unknown();
  if (instances < 1) throw ConfigError("instances must be >= 1");
  detail::write_text(dir / "config.txt", cfg.resolved_text());

  if (inject_fault) {
    // A deliberately inconsistent instance: all three views share both
    // identities, but the 0->1 matching is swapped, so indirect paths
    // through view 1 disagree with the direct matchings.
    auto m = matching_from_identities({{0, 1}, {0, 1}, {0, 1}});
    m.p[0][1] = IntMatrix{{0, 1}, {1, 0}};
    m.p[1][0] = IntMatrix{{0, 1}, {1, 0}};
    const ConsistencyReport report = check_consistency(m);
    if (report.consistent)
      throw VerifyError("injected inconsistency was not detected");
    const ConsistencyViolation& v = report.violations.front();
    const std::string located =
        "inconsistent matching: detection " + std::to_string(v.a) + " of view " +
        std::to_string(v.i) + " reaches detection " + std::to_string(v.c) +
        " of view " + std::to_string(v.k) + " through view " +
        std::to_string(v.j) + ", but the direct matching lacks that pair";
    out << located << "\n";
    throw VerifyError(located);
  }

  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    const int n_views = 3 + static_cast<int>(rng.below(3));
    const int n_ids = 1 + static_cast<int>(rng.below(8));
    const auto inst = random_consistent_matching(
        n_views, n_ids, rng.uniform(0.3, 1.0), rng.next_u64());
    const Proposition1Report report = proposition1_verify(inst.matching);
    if (!report.holds) {
      const std::string msg = "instance " + std::to_string(i) +
                              " violates the cycle identities: " +
                              report.failures.front();
      out << msg << "\n";
      throw VerifyError(msg);
    }
  }
  const auto elapsed = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();

  std::string summary = "verified " + std::to_string(instances) +
                        " random consistent instances in " +
                        detail::format_double(elapsed) +
                        " s: every pair and triple cycle equals its masked "
                        "identity\n";
  detail::write_text(dir / "report.txt", summary);
  out << summary;
}

inline void cmd_grad_check(RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir =
      detail::resolve_out_dir(cfg, "pcc-grad-check");
  GradCheckConfig gc;
  gc.n_batches = cfg.get_int("batches", gc.n_batches);
  gc.step = cfg.get_double("step", gc.step);
  gc.samples_per_param = cfg.get_int("samples", gc.samples_per_param);
  gc.seed = cfg.get_u64("seed", gc.seed);
  const double tol = cfg.get_double("tol", 1e-4);
  cfg.reject_unknown();
  detail::write_text(dir / "config.txt", cfg.resolved_text());

  const GradCheckReport report = run_grad_check(gc);
  std::string summary =
      "checked " + std::to_string(report.checks) + " coordinates across " +
      std::to_string(report.batches) + " batches: max relative error " +
      detail::format_double(report.max_rel_err) + " (tolerance " +
      detail::format_double(tol) + ")\n";
  if (report.kink_skips > 0)
    summary += "skipped " + std::to_string(report.kink_skips) +
               " coordinates where the probe interval straddles a kink\n";
  if (!report.pass(tol)) summary += "worst: " + report.worst + "\n";
  detail::write_text(dir / "report.txt", summary);
  out << summary;
  if (!report.pass(tol))
    throw VerifyError("analytic gradients disagree with finite differences: " +
                      report.worst);
}

}  // namespace pcc
