#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcc/cycles.hpp"
#include "pcc/encoder.hpp"
#include "pcc/errors.hpp"
#include "pcc/loss.hpp"
#include "pcc/masking.hpp"
#include "pcc/sampler.hpp"
#include "pcc/scenes.hpp"

namespace pcc {

// Which triple composition orders participate in the loss. The pairwise
// round trip is the base term and stays on for every configuration the
// tooling exposes; ablations toggle the four triple variants.
struct CycleSet {
  bool pairwise = true;
  bool v0 = true, v1 = true, v2 = true, v3 = true;

  bool any_triple() const { return v0 || v1 || v2 || v3; }
};

inline CycleSet parse_cycle_set(const std::string& text) {
  CycleSet set{true, false, false, false, false};
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    const std::string name = text.substr(start, comma - start);
    if (name == "v0")
      set.v0 = true;
    else if (name == "v1")
      set.v1 = true;
    else if (name == "v2")
      set.v2 = true;
    else if (name == "v3")
      set.v3 = true;
    else
      throw ConfigError("unknown cycle variant '" + name +
                        "' (expected a comma-separated subset of v0,v1,v2,v3)");
    start = comma + 1;
  }
  return set;
}

inline std::string format_cycle_set(const CycleSet& set) {
  std::string out;
  const char* names[] = {"v0", "v1", "v2", "v3"};
  const bool on[] = {set.v0, set.v1, set.v2, set.v3};
  for (int k = 0; k < 4; ++k) {
    if (!on[k]) continue;
    if (!out.empty()) out += ',';
    out += names[k];
  }
  return out;
}

// The 2C views of one batch: every camera at t, then every camera at t+dt.
// Views are pointers into the dataset; nothing is copied. A batch with any
// empty view is unusable (no similarity matrix can anchor there), so the
// caller gets nothing and should log a skip.
inline std::optional<std::vector<const ViewObservations*>> assemble_batch(
    const SceneDataset& scene, int t, int dt) {
  detail::require(t >= 0 && dt >= 0, "assemble_batch: negative time");
  detail::require(t + dt < static_cast<int>(scene.frames.size()),
                  "assemble_batch: t+dt beyond scene end");
  std::vector<const ViewObservations*> views;
  for (const auto& v : scene.frames[static_cast<std::size_t>(t)].views)
    views.push_back(&v);
  for (const auto& v : scene.frames[static_cast<std::size_t>(t + dt)].views)
    views.push_back(&v);
  for (const ViewObservations* v : views)
    if (v->count() == 0) return std::nullopt;
  return views;
}

namespace detail {

inline SimilarityMatrix reversed(const SimilarityMatrix& s) {
  return SimilarityMatrix{s.j, s.i, transpose(s.s)};
}

inline CycleMask all_ones_mask(int anchor_view, int n) {
  return CycleMask{anchor_view, std::vector<int>(static_cast<std::size_t>(n), 1)};
}

}  // namespace detail

// Every cycle the batch contributes to the loss, paired with its mask.
// Anchors with fewer than two detections are skipped: a 1x1 cycle matrix
// has no competitor entry for the margin. With masking off the masks are
// all-ones placeholders that batch_loss ignores.
inline std::vector<std::pair<CycleMatrix, CycleMask>> build_cycles(
    Tape&, const std::vector<ViewEmbeddings>& emb, const CycleSet& set,
    const TemperatureConfig& tau, bool masking) {
  const int n_views = static_cast<int>(emb.size());
  detail::require(n_views >= 2, "build_cycles: need at least two views");

  // Upper-triangular similarity cache; reversed directions are transposes.
  std::vector<std::vector<SimilarityMatrix>> sim(
      static_cast<std::size_t>(n_views));
  for (int i = 0; i < n_views; ++i) {
    sim[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n_views));
    for (int j = i + 1; j < n_views; ++j)
      sim[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          cosine_similarities(emb[static_cast<std::size_t>(i)],
                              emb[static_cast<std::size_t>(j)]);
  }
  auto sim_at = [&](int i, int j) -> SimilarityMatrix {
    if (i < j) return sim[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return detail::reversed(sim[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
  };

  // Hard match hypotheses for masks, one per ordered pair. Directions are
  // not transposes of each other when the views have equal sizes, so both
  // are materialized from their own orientation of the values.
  std::vector<std::vector<PartialMatching>> hyp;
  if (masking) {
    hyp.resize(static_cast<std::size_t>(n_views));
    for (int i = 0; i < n_views; ++i)
      hyp[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n_views));
    for (int i = 0; i < n_views; ++i)
      for (int j = 0; j < n_views; ++j) {
        if (i == j) continue;
        hyp[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            pseudo_matches_from(sim_at(i, j).s.value(), i, j, tau);
      }
  }

  std::vector<std::pair<CycleMatrix, CycleMask>> out;
  for (int i = 0; i < n_views; ++i) {
    const int n_i = emb[static_cast<std::size_t>(i)].count();
    if (n_i < 2) continue;

    if (set.pairwise)
      for (int j = i + 1; j < n_views; ++j) {
        CycleMatrix cycle = pairwise_cycle(soft_match(sim_at(i, j), tau));
        CycleMask mask =
            masking ? pairwise_pseudo_mask(
                          hyp[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                    : detail::all_ones_mask(i, n_i);
        out.emplace_back(std::move(cycle), std::move(mask));
      }

    if (!set.any_triple()) continue;
    for (int j = i + 1; j < n_views; ++j)
      for (int k = j + 1; k < n_views; ++k) {
        auto cycles = triple_cycles(sim_at(i, j), sim_at(j, k), sim_at(k, i), tau);
        CycleMask mask =
            masking
                ? pseudo_mask(
                      hyp[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                      hyp[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)],
                      hyp[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)])
                : detail::all_ones_mask(i, n_i);
        const bool on[] = {set.v0, set.v1, set.v2, set.v3};
        for (int variant = 0; variant < 4; ++variant)
          if (on[variant])
            out.emplace_back(cycles[static_cast<std::size_t>(variant)], mask);
      }
  }
  return out;
}

// Convenience over raw observations: encode first, then build the graph.
inline std::vector<std::pair<CycleMatrix, CycleMask>> build_cycles(
    Tape& tape, const std::vector<const ViewObservations*>& batch,
    const BoundEncoder& enc, const CycleSet& set,
    const TemperatureConfig& tau, bool masking) {
  std::vector<ViewEmbeddings> emb;
  emb.reserve(batch.size());
  for (int v = 0; v < static_cast<int>(batch.size()); ++v)
    emb.push_back(
        encode_view(tape, enc, v, batch[static_cast<std::size_t>(v)]->features));
  return build_cycles(tape, emb, set, tau, masking);
}

}  // namespace pcc
