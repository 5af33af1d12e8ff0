#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pcc/encoder.hpp"
#include "pcc/errors.hpp"
#include "pcc/hungarian.hpp"
#include "pcc/matrix.hpp"
#include "pcc/scenes.hpp"

namespace pcc {

inline std::vector<double> default_theta_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 20; ++k) grid.push_back(0.05 * k);
  return grid;
}

struct InferenceConfig {
  double theta = 0.5;
  std::vector<double> grid = default_theta_grid();
};

inline void validate(const InferenceConfig& cfg) {
  if (cfg.grid.empty()) throw ConfigError("theta grid is empty");
  for (std::size_t k = 1; k < cfg.grid.size(); ++k)
    if (!(cfg.grid[k - 1] < cfg.grid[k]))
      throw ConfigError("theta grid must be sorted ascending");
}

// Hungarian on the cosine similarities, then drop assigned pairs whose
// similarity falls below theta. Rows of both inputs must be unit length.
inline IntMatrix match_pair(const Matrix& emb_a, const Matrix& emb_b,
                            double theta) {
  const Matrix sim = matmul(emb_a, transpose(emb_b));
  const Assignment assignment = hungarian_max(sim);
  IntMatrix p(emb_a.rows(), emb_b.rows());
  for (int r = 0; r < emb_a.rows(); ++r) {
    const int c = assignment.row_to_col[static_cast<std::size_t>(r)];
    if (c >= 0 && sim(r, c) >= theta) p(r, c) = 1;
  }
  return p;
}

struct InstanceMetrics {
  int scene_id = 0;
  int timestep = 0;
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct SceneSummary {
  int scene_id = 0;
  long instances = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Macro metrics average per-instance scores (an instance is one frame
// matched across every camera pair); micro metrics pool the raw counts.
struct MatchReport {
  std::vector<InstanceMetrics> instances;
  std::vector<SceneSummary> scenes;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  long tp = 0, fp = 0, fn = 0;
  double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
};

namespace detail {

inline void fill_rates(long tp, long fp, long fn, double& precision,
                       double& recall, double& f1) {
  precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline long shared_identity_count(const ViewObservations& a,
                                  const ViewObservations& b) {
  long shared = 0;
  for (int ia : a.identities)
    for (int ib : b.identities)
      if (ia == ib) ++shared;
  return shared;  // identities are unique within a view
}

inline void require_labeled(const Dataset& ds) {
  for (const auto& scene : ds.scenes)
    for (const auto& frame : scene.frames)
      for (const auto& view : frame.views)
        for (int ident : view.identities)
          if (ident < 0)
            throw DataError("evaluation needs a labeled dataset");
}

// Everything theta-dependent about one instance, computed once: the
// similarity and correctness of each Hungarian-assigned pair plus the
// ground-truth pair count. Sweeping theta is then just filtering.
struct InstanceAssignments {
  int scene_id = 0;
  int timestep = 0;
  std::vector<std::pair<double, bool>> pairs;  // (similarity, correct)
  long gt_pairs = 0;
};

inline std::vector<InstanceAssignments> assignment_sweep(const Encoder& enc,
                                                         const Dataset& ds) {
  require_labeled(ds);
  std::vector<InstanceAssignments> out;
  for (const auto& scene : ds.scenes) {
    for (const auto& frame : scene.frames) {
      InstanceAssignments inst;
      inst.scene_id = scene.scene_id;
      inst.timestep = frame.timestep;
      std::vector<Matrix> embs;
      for (const auto& view : frame.views)
        embs.push_back(view.count() > 0 ? encode_plain(enc, view.features)
                                        : Matrix(0, enc.embed_dim()));
      const int n_views = static_cast<int>(frame.views.size());
      for (int i = 0; i < n_views; ++i)
        for (int j = i + 1; j < n_views; ++j) {
          const auto& va = frame.views[static_cast<std::size_t>(i)];
          const auto& vb = frame.views[static_cast<std::size_t>(j)];
          inst.gt_pairs += shared_identity_count(va, vb);
          const Matrix sim = matmul(embs[static_cast<std::size_t>(i)],
                                    transpose(embs[static_cast<std::size_t>(j)]));
          const Assignment assignment = hungarian_max(sim);
          for (int r = 0; r < sim.rows(); ++r) {
            const int c = assignment.row_to_col[static_cast<std::size_t>(r)];
            if (c < 0) continue;
            const bool correct = va.identities[static_cast<std::size_t>(r)] ==
                                 vb.identities[static_cast<std::size_t>(c)];
            inst.pairs.emplace_back(sim(r, c), correct);
          }
        }
      out.push_back(std::move(inst));
    }
  }
  if (out.empty()) throw DataError("evaluation dataset has no frames");
  return out;
}

inline InstanceMetrics score_instance(const InstanceAssignments& inst,
                                      double theta) {
  InstanceMetrics m;
  m.scene_id = inst.scene_id;
  m.timestep = inst.timestep;
  for (const auto& [sim, correct] : inst.pairs) {
    if (sim < theta) continue;
    if (correct)
      ++m.tp;
    else
      ++m.fp;
  }
  m.fn = inst.gt_pairs - m.tp;
  fill_rates(m.tp, m.fp, m.fn, m.precision, m.recall, m.f1);
  return m;
}

}  // namespace detail

inline MatchReport evaluate(const Encoder& enc, const Dataset& ds,
                            double theta) {
  MatchReport report;
  std::map<int, std::pair<long, std::array<double, 3>>> per_scene;
  for (const auto& inst : detail::assignment_sweep(enc, ds)) {
    InstanceMetrics m = detail::score_instance(inst, theta);
    report.tp += m.tp;
    report.fp += m.fp;
    report.fn += m.fn;
    report.precision += m.precision;
    report.recall += m.recall;
    report.f1 += m.f1;
    auto& bucket = per_scene[m.scene_id];
    bucket.first += 1;
    bucket.second[0] += m.precision;
    bucket.second[1] += m.recall;
    bucket.second[2] += m.f1;
    report.instances.push_back(std::move(m));
  }
  const double n = static_cast<double>(report.instances.size());
  report.precision /= n;
  report.recall /= n;
  report.f1 /= n;
  for (const auto& [scene_id, bucket] : per_scene) {
    const double count = static_cast<double>(bucket.first);
    report.scenes.push_back(SceneSummary{scene_id, bucket.first,
                                         bucket.second[0] / count,
                                         bucket.second[1] / count,
                                         bucket.second[2] / count});
  }
  detail::fill_rates(report.tp, report.fp, report.fn, report.micro_precision,
                     report.micro_recall, report.micro_f1);
  return report;
}

// Grid search maximizing mean validation F1; the ascending grid plus a
// strict improvement test makes ties resolve to the smaller theta.
inline double tune_theta(const Encoder& enc, const Dataset& validation,
                         const InferenceConfig& cfg) {
  validate(cfg);
  const auto sweep = detail::assignment_sweep(enc, validation);
  double best_theta = cfg.grid.front();
  double best_f1 = -1.0;
  for (double theta : cfg.grid) {
    double f1_sum = 0.0;
    for (const auto& inst : sweep)
      f1_sum += detail::score_instance(inst, theta).f1;
    const double mean_f1 = f1_sum / static_cast<double>(sweep.size());
    if (mean_f1 > best_f1) {
      best_f1 = mean_f1;
      best_theta = theta;
    }
  }
  return best_theta;
}

namespace detail {

inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline void write_instances_csv(const MatchReport& report,
                                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "scene,timestep,tp,fp,fn,precision,recall,f1\n";
  for (const auto& m : report.instances)
    out << m.scene_id << ',' << m.timestep << ',' << m.tp << ',' << m.fp << ','
        << m.fn << ',' << detail::fmt6(m.precision) << ','
        << detail::fmt6(m.recall) << ',' << detail::fmt6(m.f1) << '\n';
  if (!out) throw DataError("failed writing: " + path);
}

inline void write_summary_csv(const MatchReport& report,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "scene,instances,precision,recall,f1\n";
  for (const auto& s : report.scenes)
    out << s.scene_id << ',' << s.instances << ',' << detail::fmt6(s.precision)
        << ',' << detail::fmt6(s.recall) << ',' << detail::fmt6(s.f1) << '\n';
  out << "macro," << report.instances.size() << ','
      << detail::fmt6(report.precision) << ',' << detail::fmt6(report.recall)
      << ',' << detail::fmt6(report.f1) << '\n';
  out << "micro," << report.instances.size() << ','
      << detail::fmt6(report.micro_precision) << ','
      << detail::fmt6(report.micro_recall) << ','
      << detail::fmt6(report.micro_f1) << '\n';
  if (!out) throw DataError("failed writing: " + path);
}

}  // namespace pcc
