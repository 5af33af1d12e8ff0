#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcc/adam.hpp"
#include "pcc/batch.hpp"
#include "pcc/encoder.hpp"
#include "pcc/errors.hpp"
#include "pcc/loss.hpp"
#include "pcc/sampler.hpp"

namespace pcc {

struct TrainConfig {
  EncoderConfig encoder;  // obs_dim is overwritten from the dataset
  MarginConfig margins;
  TemperatureConfig temperature;
  AdamConfig adam;
  CycleSet cycles;
  SamplerKind sampler = SamplerKind::kTimeDivergent;
  bool masking = true;
  int epochs = 10;
  std::uint64_t seed = 1;
};

inline void validate(const TrainConfig& cfg) {
  detail::require(cfg.epochs >= 1, "TrainConfig: epochs must be >= 1");
  validate(cfg.margins);
  validate(cfg.adam);
}

struct TrainResult {
  Encoder encoder;
  std::vector<double> epoch_mean_loss;
  long batches = 0;
  long skipped = 0;
};

inline int dataset_obs_dim(const Dataset& ds) {
  for (const auto& scene : ds.scenes)
    for (const auto& frame : scene.frames)
      for (const auto& view : frame.views)
        if (view.count() > 0) return view.features.cols();
  throw DataError("dataset has no detections");
}

// The full self-supervised loop. Every batch gets a fresh tape: encode the
// 2C views, build pair and triple cycles, take the masked (or plain) margin
// loss, backpropagate to the four encoder tensors, Adam step. All
// randomness flows from cfg.seed, so the result is a pure function of
// (dataset, config).
inline TrainResult train(const Dataset& ds, TrainConfig cfg,
                         std::ostream* log = nullptr) {
  validate(cfg);
  detail::require(!ds.scenes.empty(), "train: empty dataset");
  cfg.encoder.obs_dim = dataset_obs_dim(ds);

  Rng root(cfg.seed);
  Rng init_rng = root.child(0);
  TrainResult result;
  result.encoder = make_encoder(cfg.encoder, init_rng);
  Adam opt(cfg.adam);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng = root.child(static_cast<std::uint64_t>(epoch));
    const SamplerState state =
        make_schedule(ds, cfg.sampler, epoch, epoch_rng);

    double loss_sum = 0.0;
    long loss_count = 0;
    for (const BatchRef& ref : state.schedule) {
      const auto& scene = ds.scenes[static_cast<std::size_t>(ref.scene)];
      auto batch = assemble_batch(scene, ref.t, ref.dt);
      if (!batch) {
        ++result.skipped;
        if (log)
          *log << "skip scene=" << scene.scene_id << " t=" << ref.t
               << " dt=" << ref.dt << ": empty view\n";
        continue;
      }

      Tape tape;
      BoundEncoder bound = bind(tape, result.encoder);
      std::vector<std::pair<CycleMatrix, CycleMask>> cycles;
      double value = 0.0;
      DiffMatrix loss;
      try {
        cycles = build_cycles(tape, *batch, bound, cfg.cycles,
                              cfg.temperature, cfg.masking);
        if (!cycles.empty()) {
          loss = batch_loss(cycles, cfg.margins, cfg.masking);
          value = loss.value()(0, 0);
        }
      } catch (const std::invalid_argument& e) {
        // Overflow inside the forward pass trips an op's finiteness guard
        // before the loss value exists; same divergence, earlier detector.
        if (std::string(e.what()).find("non-finite") == std::string::npos)
          throw;
        value = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch
            << ", scene " << scene.scene_id << ", t=" << ref.t
            << ", dt=" << ref.dt;
        throw DataError(msg.str());
      }
      if (cycles.empty()) {
        ++result.skipped;
        if (log)
          *log << "skip scene=" << scene.scene_id << " t=" << ref.t
               << " dt=" << ref.dt << ": no usable cycle anchors\n";
        continue;
      }
      loss_sum += value;
      ++loss_count;
      ++result.batches;

      GradientTable grads = backward(tape, loss.v);
      std::vector<Matrix> g;
      for (Var v : bound_vars(bound)) g.push_back(grads.at(v));
      opt.step(parameters(result.encoder), g);
    }

    detail::require(loss_count > 0, "train: epoch produced no usable batches");
    result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(loss_count));

    for (const Matrix* p : parameters(result.encoder))
      if (!all_finite(*p))
        throw DataError("training diverged: non-finite parameters after epoch " +
                        std::to_string(epoch));
  }
  return result;
}

// Checkpoints are line-oriented text: a header with shapes, seed and the
// hash of the resolved run config, then each tensor as one row per line
// with %.17g values (round-trips doubles exactly).
struct Checkpoint {
  Encoder encoder;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

inline void save_checkpoint(const Encoder& enc, std::uint64_t seed,
                            std::uint64_t config_hash,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << "pcc-checkpoint 1\n";
  out << "obs_dim " << enc.obs_dim() << "\n";
  out << "hidden_dim " << enc.hidden_dim() << "\n";
  out << "embed_dim " << enc.embed_dim() << "\n";
  out << "seed " << seed << "\n";
  out << "config_hash " << config_hash << "\n";
  const auto params = parameters(enc);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& m = *params[k];
    out << "param " << kParameterNames[k] << " " << m.rows() << " "
        << m.cols() << "\n";
    char buf[40];
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
        out << (c ? " " : "") << buf;
      }
      out << "\n";
    }
  }
  out << "end\n";
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

namespace detail {

inline std::string expect_line(std::istream& in, const std::string& what,
                               const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw DataError("checkpoint " + path + ": truncated before " + what);
  return line;
}

inline std::uint64_t parse_header_count(const std::string& line,
                                        const std::string& key,
                                        const std::string& path) {
  std::istringstream ss(line);
  std::string k;
  unsigned long long v = 0;
  if (!(ss >> k >> v) || k != key)
    throw DataError("checkpoint " + path + ": expected '" + key +
                    " <n>', got '" + line + "'");
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  if (detail::expect_line(in, "magic", path) != "pcc-checkpoint 1")
    throw DataError("checkpoint " + path + ": bad magic line");

  Checkpoint ck;
  const int obs = static_cast<int>(detail::parse_header_count(
      detail::expect_line(in, "obs_dim", path), "obs_dim", path));
  const int hidden = static_cast<int>(detail::parse_header_count(
      detail::expect_line(in, "hidden_dim", path), "hidden_dim", path));
  const int embed = static_cast<int>(detail::parse_header_count(
      detail::expect_line(in, "embed_dim", path), "embed_dim", path));
  ck.seed = detail::parse_header_count(detail::expect_line(in, "seed", path),
                                       "seed", path);
  ck.config_hash = detail::parse_header_count(
      detail::expect_line(in, "config_hash", path), "config_hash", path);
  if (obs <= 0 || hidden <= 0 || embed <= 0)
    throw DataError("checkpoint " + path + ": non-positive dimension");

  ck.encoder = Encoder{Matrix(obs, hidden), Matrix(1, hidden),
                       Matrix(hidden, embed), Matrix(1, embed)};
  auto params = parameters(ck.encoder);
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::istringstream head(detail::expect_line(in, "param header", path));
    std::string tag, name;
    int rows = 0, cols = 0;
    if (!(head >> tag >> name >> rows >> cols) || tag != "param" ||
        name != kParameterNames[k])
      throw DataError("checkpoint " + path + ": bad parameter header for " +
                      std::string(kParameterNames[k]));
    Matrix& m = *params[k];
    if (rows != m.rows() || cols != m.cols())
      throw DataError("checkpoint " + path + ": shape mismatch for " + name);
    for (int r = 0; r < rows; ++r) {
      std::istringstream row(detail::expect_line(in, name + " row", path));
      for (int c = 0; c < cols; ++c)
        if (!(row >> m(r, c)))
          throw DataError("checkpoint " + path + ": short row in " + name);
    }
  }
  if (detail::expect_line(in, "end", path) != "end")
    throw DataError("checkpoint " + path + ": missing end marker");
  for (const Matrix* p : parameters(ck.encoder))
    if (!all_finite(*p))
      throw DataError("checkpoint " + path + ": non-finite parameter");
  return ck;
}

}  // namespace pcc
