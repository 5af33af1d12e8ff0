#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcc/matrix.hpp"
#include "pcc/rng.hpp"
#include "pcc/theory.hpp"

// Synthetic stand-in for a multi-camera pedestrian dataset: identities
// walk along a 1-D strip, cameras watch staggered windows of it, and
// each camera renders an identity's appearance through its own linear
// distortion. Overlap between cameras (and thus how partial the
// matchings are) is controlled by window geometry alone.

namespace pcc {

struct SceneConfig {
  int n_cameras = 3;
  int n_timesteps = 24;
  int n_identities = 19;
  int latent_dim = 16;
  int obs_dim = 32;
  double fov_width = 0.6;      // fraction of the strip each camera sees
  double noise_sigma = 0.05;   // observation noise
  double camera_distortion = 0.7;  // strength of per-camera appearance change
  double walk_step = 0.08;     // random-walk step scale per timestep
  std::uint64_t seed = 1;
};

inline void validate(const SceneConfig& cfg) {
  detail::require(cfg.n_cameras >= 2, "SceneConfig: need at least 2 cameras");
  detail::require(cfg.n_timesteps >= 1, "SceneConfig: need timesteps");
  detail::require(cfg.n_identities >= 1, "SceneConfig: need identities");
  detail::require(cfg.latent_dim >= 1 && cfg.obs_dim >= 1,
                  "SceneConfig: dimensions must be positive");
  detail::require(cfg.fov_width > 0.0 && cfg.fov_width <= 1.0,
                  "SceneConfig: fov_width in (0, 1]");
  detail::require(cfg.noise_sigma >= 0.0, "SceneConfig: negative noise");
  detail::require(cfg.camera_distortion >= 0.0, "SceneConfig: negative distortion");
  detail::require(cfg.walk_step >= 0.0, "SceneConfig: negative walk step");
}

// Left edge of camera v's window. Windows are evenly staggered from the
// strip's left edge to its right, so adjacent cameras overlap most and
// the outermost pair overlaps least.
inline double fov_offset(const SceneConfig& cfg, int camera) {
  if (cfg.n_cameras == 1) return 0.0;
  return static_cast<double>(camera) * (1.0 - cfg.fov_width) /
         static_cast<double>(cfg.n_cameras - 1);
}

struct Identity {
  int id = 0;
  std::vector<double> appearance;  // unit vector, latent_dim
  std::vector<double> trajectory;  // [0,1] position per timestep
};

// One camera's detections at one timestep. Identities and positions are
// generator-side labels: training never reads them, evaluation and the
// FOV filter do.
struct ViewObservations {
  int camera = 0;
  Matrix features;  // n x obs_dim, unnormalized
  std::vector<int> detection_ids;
  std::vector<int> identities;
  std::vector<double> positions;

  int count() const { return features.rows(); }
};

struct SceneFrame {
  int scene_id = 0;
  int timestep = 0;
  std::vector<ViewObservations> views;
};

struct SceneDataset {
  int scene_id = 0;
  SceneConfig config;
  double keep_fraction = 1.0;  // FOV reduction state, 1 = untouched
  std::vector<Identity> identities;
  std::vector<SceneFrame> frames;
};

namespace detail {

// One fixed projection from latent to observation space, shared by every
// scene, split, and seed. Cameras differ by their distortion on top of
// it; keeping the base map global is what lets matching structure
// learned on training scenes carry over to held-out ones.
inline Matrix global_projection(int obs_dim, int latent_dim) {
  static const Matrix table = [] {
    constexpr int kMaxObs = 128, kMaxLatent = 64;
    Rng rng(0x9cc5a1e5u);
    Matrix m(kMaxObs, kMaxLatent);
    for (int i = 0; i < kMaxObs; ++i)
      for (int j = 0; j < kMaxLatent; ++j) m(i, j) = rng.normal();
    return m;
  }();
  require(obs_dim <= table.rows() && latent_dim <= table.cols(),
          "global_projection: dimensions exceed the fixed table");
  Matrix view(obs_dim, latent_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  for (int i = 0; i < obs_dim; ++i)
    for (int j = 0; j < latent_dim; ++j) view(i, j) = scale * table(i, j);
  return view;
}

inline double reflect_into_unit(double x) {
  while (x < 0.0 || x > 1.0) {
    if (x < 0.0) x = -x;
    if (x > 1.0) x = 2.0 - x;
  }
  return x;
}

}  // namespace detail

inline SceneDataset generate_scene(const SceneConfig& cfg, int scene_id = 0) {
  validate(cfg);
  Rng root(cfg.seed);
  Rng walk_rng = root.child(0);
  Rng appearance_rng = root.child(1);
  Rng camera_rng = root.child(2);
  Rng noise_rng = root.child(3);
  Rng order_rng = root.child(4);

  SceneDataset ds;
  ds.scene_id = scene_id;
  ds.config = cfg;

  for (int p = 0; p < cfg.n_identities; ++p) {
    Identity ident;
    ident.id = p;
    double norm = 0.0;
    do {
      ident.appearance.assign(static_cast<std::size_t>(cfg.latent_dim), 0.0);
      norm = 0.0;
      for (auto& x : ident.appearance) {
        x = appearance_rng.normal();
        norm += x * x;
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& x : ident.appearance) x /= norm;

    double pos = walk_rng.uniform();
    for (int t = 0; t < cfg.n_timesteps; ++t) {
      ident.trajectory.push_back(pos);
      pos = detail::reflect_into_unit(pos + walk_rng.normal(0.0, cfg.walk_step));
    }
    ds.identities.push_back(std::move(ident));
  }

  // Per-camera render map: the global projection composed with this
  // camera's distortion of latent space.
  const Matrix p0 = detail::global_projection(cfg.obs_dim, cfg.latent_dim);
  std::vector<Matrix> render;
  for (int v = 0; v < cfg.n_cameras; ++v) {
    Matrix distort = Matrix::identity(cfg.latent_dim);
    const double scale =
        cfg.camera_distortion * 0.5 / std::sqrt(static_cast<double>(cfg.latent_dim));
    for (int i = 0; i < cfg.latent_dim; ++i)
      for (int j = 0; j < cfg.latent_dim; ++j)
        distort(i, j) += scale * camera_rng.normal();
    render.push_back(matmul(p0, distort));
  }

  for (int t = 0; t < cfg.n_timesteps; ++t) {
    SceneFrame frame;
    frame.scene_id = scene_id;
    frame.timestep = t;
    for (int v = 0; v < cfg.n_cameras; ++v) {
      const double lo = fov_offset(cfg, v);
      const double hi = lo + cfg.fov_width;
      std::vector<int> visible;
      for (int p = 0; p < cfg.n_identities; ++p) {
        const double x = ds.identities[static_cast<std::size_t>(p)]
                             .trajectory[static_cast<std::size_t>(t)];
        if (x >= lo && x <= hi) visible.push_back(p);
      }
      order_rng.shuffle(visible);

      ViewObservations view;
      view.camera = v;
      view.features = Matrix(static_cast<int>(visible.size()), cfg.obs_dim);
      for (int row = 0; row < static_cast<int>(visible.size()); ++row) {
        const Identity& ident =
            ds.identities[static_cast<std::size_t>(visible[static_cast<std::size_t>(row)])];
        for (int d = 0; d < cfg.obs_dim; ++d) {
          double acc = 0.0;
          for (int l = 0; l < cfg.latent_dim; ++l)
            acc += render[static_cast<std::size_t>(v)](d, l) *
                   ident.appearance[static_cast<std::size_t>(l)];
          view.features(row, d) = acc + noise_rng.normal(0.0, cfg.noise_sigma);
        }
        view.detection_ids.push_back(row);
        view.identities.push_back(ident.id);
        view.positions.push_back(ident.trajectory[static_cast<std::size_t>(t)]);
      }
      frame.views.push_back(std::move(view));
    }
    ds.frames.push_back(std::move(frame));
  }
  return ds;
}

// Clip every camera to the leftmost keep_fraction of its original window
// and discard detections outside. A pure filter: surviving observations
// keep their exact feature vectors and detection ids. Filtering twice at
// the same fraction changes nothing.
inline SceneDataset reduce_fov(const SceneDataset& ds, double keep_fraction) {
  detail::require(keep_fraction > 0.0 && keep_fraction <= 1.0,
                  "reduce_fov: keep_fraction in (0, 1]");
  SceneDataset out = ds;
  out.keep_fraction = std::min(ds.keep_fraction, keep_fraction);
  for (auto& frame : out.frames) {
    for (auto& view : frame.views) {
      detail::require(
          view.positions.size() == static_cast<std::size_t>(view.count()),
          "reduce_fov: dataset lacks position metadata");
      const double lo = fov_offset(ds.config, view.camera);
      const double hi = lo + ds.config.fov_width * keep_fraction;
      std::vector<int> kept;
      for (int r = 0; r < view.count(); ++r)
        if (view.positions[static_cast<std::size_t>(r)] <= hi) kept.push_back(r);

      ViewObservations reduced;
      reduced.camera = view.camera;
      reduced.features = Matrix(static_cast<int>(kept.size()), view.features.cols());
      for (int r = 0; r < static_cast<int>(kept.size()); ++r) {
        const int src = kept[static_cast<std::size_t>(r)];
        for (int c = 0; c < view.features.cols(); ++c)
          reduced.features(r, c) = view.features(src, c);
        reduced.detection_ids.push_back(
            view.detection_ids[static_cast<std::size_t>(src)]);
        reduced.identities.push_back(
            view.identities[static_cast<std::size_t>(src)]);
        reduced.positions.push_back(
            view.positions[static_cast<std::size_t>(src)]);
      }
      view = std::move(reduced);
    }
  }
  return out;
}

// Evaluation-side labels: the true matching grid for one frame.
inline MultiViewMatching ground_truth(const SceneFrame& frame) {
  std::vector<std::vector<int>> ids;
  for (const auto& view : frame.views) ids.push_back(view.identities);
  return matching_from_identities(ids);
}

struct OverlapStats {
  double two_view_jaccard = 0.0;
  double three_view_jaccard = 0.0;
  double mean_people_per_frame = 0.0;
  int frames = 0;
};

// Jaccard overlap of identity sets across camera pairs and triples,
// averaged over frames. Pairs or triples whose union is empty are
// skipped rather than counted as any particular value.
inline OverlapStats overlap_stats(const SceneDataset& ds) {
  OverlapStats stats;
  double pair_sum = 0.0, triple_sum = 0.0, people_sum = 0.0;
  long pair_count = 0, triple_count = 0;

  for (const auto& frame : ds.frames) {
    std::vector<std::vector<bool>> seen;  // camera x identity
    std::vector<bool> any(static_cast<std::size_t>(ds.config.n_identities), false);
    for (const auto& view : frame.views) {
      std::vector<bool> here(static_cast<std::size_t>(ds.config.n_identities), false);
      for (int id : view.identities) {
        here[static_cast<std::size_t>(id)] = true;
        any[static_cast<std::size_t>(id)] = true;
      }
      seen.push_back(std::move(here));
    }
    int people = 0;
    for (bool b : any) people += b ? 1 : 0;
    people_sum += people;

    const int c = static_cast<int>(seen.size());
    for (int i = 0; i < c; ++i)
      for (int j = i + 1; j < c; ++j) {
        int inter = 0, uni = 0;
        for (int p = 0; p < ds.config.n_identities; ++p) {
          const bool a = seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)];
          const bool b = seen[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)];
          inter += (a && b) ? 1 : 0;
          uni += (a || b) ? 1 : 0;
        }
        if (uni > 0) {
          pair_sum += static_cast<double>(inter) / uni;
          ++pair_count;
        }
      }
    for (int i = 0; i < c; ++i)
      for (int j = i + 1; j < c; ++j)
        for (int k = j + 1; k < c; ++k) {
          int inter = 0, uni = 0;
          for (int p = 0; p < ds.config.n_identities; ++p) {
            const bool a = seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)];
            const bool b = seen[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)];
            const bool d = seen[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)];
            inter += (a && b && d) ? 1 : 0;
            uni += (a || b || d) ? 1 : 0;
          }
          if (uni > 0) {
            triple_sum += static_cast<double>(inter) / uni;
            ++triple_count;
          }
        }
  }

  stats.frames = static_cast<int>(ds.frames.size());
  if (pair_count > 0) stats.two_view_jaccard = pair_sum / pair_count;
  if (triple_count > 0) stats.three_view_jaccard = triple_sum / triple_count;
  if (stats.frames > 0) stats.mean_people_per_frame = people_sum / stats.frames;
  return stats;
}

// A training or evaluation corpus: several scenes with distinct
// identities, walks, and camera distortions, drawn from one master seed.
struct DatasetConfig {
  SceneConfig scene;
  int n_scenes = 5;
};

struct Dataset {
  std::vector<SceneDataset> scenes;
};

inline Dataset generate_dataset(const DatasetConfig& cfg) {
  detail::require(cfg.n_scenes >= 1, "DatasetConfig: need at least one scene");
  validate(cfg.scene);
  Dataset ds;
  Rng root(cfg.scene.seed);
  for (int s = 0; s < cfg.n_scenes; ++s) {
    SceneConfig scene_cfg = cfg.scene;
    scene_cfg.seed = root.child(static_cast<std::uint64_t>(s)).next_u64();
    ds.scenes.push_back(generate_scene(scene_cfg, s));
  }
  return ds;
}

inline Dataset reduce_fov(const Dataset& ds, double keep_fraction) {
  Dataset out;
  for (const auto& scene : ds.scenes)
    out.scenes.push_back(reduce_fov(scene, keep_fraction));
  return out;
}

inline OverlapStats overlap_stats(const Dataset& ds) {
  OverlapStats total;
  double pair_sum = 0.0, triple_sum = 0.0, people_sum = 0.0;
  for (const auto& scene : ds.scenes) {
    OverlapStats s = overlap_stats(scene);
    pair_sum += s.two_view_jaccard * s.frames;
    triple_sum += s.three_view_jaccard * s.frames;
    people_sum += s.mean_people_per_frame * s.frames;
    total.frames += s.frames;
  }
  if (total.frames > 0) {
    total.two_view_jaccard = pair_sum / total.frames;
    total.three_view_jaccard = triple_sum / total.frames;
    total.mean_people_per_frame = people_sum / total.frames;
  }
  return total;
}

}  // namespace pcc
