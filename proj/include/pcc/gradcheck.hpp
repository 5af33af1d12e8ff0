#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "pcc/batch.hpp"
#include "pcc/encoder.hpp"
#include "pcc/loss.hpp"
#include "pcc/rng.hpp"
#include "pcc/sampler.hpp"
#include "pcc/scenes.hpp"
#include "pcc/train.hpp"

namespace pcc {

// Central finite differences against the tape's analytic gradients, run on
// complete training batches (encoder -> similarities -> cycles -> masked
// loss, both mask modes). Masks are baked constants on the tape, so the
// check probes exactly the function the optimizer sees.
struct GradCheckConfig {
  int n_batches = 10;
  double step = 1e-5;
  int samples_per_param = 60;
  std::uint64_t seed = 99;
  int n_scenes = 3;
  SceneConfig scene;
  EncoderConfig encoder;

  GradCheckConfig() {
    scene.n_identities = 7;
    scene.n_timesteps = 6;
    scene.obs_dim = 12;
    scene.latent_dim = 6;
    scene.fov_width = 0.7;
    scene.noise_sigma = 0.1;
    scene.seed = 424242;
    encoder.obs_dim = scene.obs_dim;
    encoder.hidden_dim = 16;
    encoder.embed_dim = 10;
  }
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  long checks = 0;
  long kink_skips = 0;
  int batches = 0;
  std::string worst;

  bool pass(double tol = 1e-4) const {
    return checks > 0 && max_rel_err < tol;
  }
};

inline GradCheckReport run_grad_check(const GradCheckConfig& cfg = {}) {
  detail::require(cfg.n_batches > 0, "run_grad_check: n_batches must be > 0");
  detail::require(cfg.step > 0.0, "run_grad_check: step must be > 0");

  DatasetConfig dcfg;
  dcfg.scene = cfg.scene;
  dcfg.n_scenes = cfg.n_scenes;
  const Dataset ds = generate_dataset(dcfg);

  Rng rng(cfg.seed);
  Rng init_rng = rng.child(0);
  const Encoder enc = make_encoder(cfg.encoder, init_rng);

  GradCheckReport report;
  int built = 0;
  int attempts = 0;
  while (built < cfg.n_batches) {
    detail::require(++attempts < cfg.n_batches * 50,
                    "run_grad_check: could not assemble enough batches");
    const int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(
        ds.scenes.size())));
    const auto& scene = ds.scenes[static_cast<std::size_t>(s)];
    const int frames = static_cast<int>(scene.frames.size());
    const int dt = 1 + static_cast<int>(rng.below(3));
    if (frames <= dt) continue;
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(frames - dt)));
    auto batch = assemble_batch(scene, t, dt);
    if (!batch) continue;

    MarginConfig margins;
    margins.mask_mode = built % 2 == 0 ? MaskMode::kLiteral : MaskMode::kRowSelect;

    Tape tape;
    BoundEncoder bound = bind(tape, enc);
    auto cycles = build_cycles(tape, *batch, bound, CycleSet{}, {}, true);
    if (cycles.empty()) continue;
    DiffMatrix loss = batch_loss(cycles, margins, true);
    GradientTable analytic = backward(tape, loss.v);
    const double f_zero = loss.value()(0, 0);
    ++built;
    ++report.batches;

    const Var leaves[] = {bound.w1, bound.b1, bound.w2, bound.b2};
    for (int k = 0; k < 4; ++k) {
      const Var leaf = leaves[k];
      const Matrix base = tape.value(leaf);
      const Matrix& grad = analytic.at(leaf);
      const int entries = base.rows() * base.cols();
      const int samples = std::min(cfg.samples_per_param, entries);
      for (int n = 0; n < samples; ++n) {
        const int idx =
            samples == entries
                ? n
                : static_cast<int>(rng.below(static_cast<std::uint64_t>(entries)));
        const int r = idx / base.cols();
        const int c = idx % base.cols();

        Matrix bumped = base;
        bumped(r, c) = base(r, c) + cfg.step;
        tape.set_value(leaf, bumped);
        tape.replay();
        const double f_plus = loss.value()(0, 0);
        bumped(r, c) = base(r, c) - cfg.step;
        tape.set_value(leaf, bumped);
        tape.replay();
        const double f_minus = loss.value()(0, 0);

        // The loss is piecewise smooth (relu hinges, row-max switches).
        // When the two one-sided slopes disagree, the probe interval
        // straddles a kink and the central difference measures a blend of
        // two subgradients rather than the derivative, so the coordinate
        // is skipped and counted. The decision reads only function
        // values; a wrong analytic gradient cannot trigger a skip.
        const double s_fwd = (f_plus - f_zero) / cfg.step;
        const double s_bwd = (f_zero - f_minus) / cfg.step;
        if (std::fabs(s_fwd - s_bwd) >
            1e-4 * std::max({std::fabs(s_fwd), std::fabs(s_bwd), 1.0})) {
          ++report.kink_skips;
          continue;
        }

        const double numeric = (f_plus - f_minus) / (2.0 * cfg.step);
        const double a = grad(r, c);
        // Relative error with an absolute floor: the floor absorbs the
        // cancellation noise of the difference quotient near zero.
        const double scale =
            std::max({std::fabs(a), std::fabs(numeric), 1e-6});
        const double rel = std::fabs(a - numeric) / scale;
        ++report.checks;
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          std::ostringstream where;
          where << kParameterNames[k] << "(" << r << "," << c << ") batch "
                << built - 1 << ": analytic " << a << " numeric " << numeric;
          report.worst = where.str();
        }
      }
      tape.set_value(leaf, base);
      tape.replay();
    }
  }
  return report;
}

}  // namespace pcc
