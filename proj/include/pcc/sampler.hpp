#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pcc/autodiff.hpp"
#include "pcc/rng.hpp"
#include "pcc/scenes.hpp"

namespace pcc {

// One optimizer step: the 2C views of scene `scene` at timesteps t and t+dt.
struct BatchRef {
  int scene = 0;
  int t = 0;
  int dt = 0;
};

enum class SamplerKind { kTimeDivergent, kStandard };

struct SamplerState {
  int epoch = 0;
  std::vector<BatchRef> schedule;
};

namespace detail {

// Largest-remainder interleave: emits scene indices so every prefix of
// length k holds close to k * counts[s] / total entries of scene s. The
// comparison is kept in exact integers so ordering never depends on
// floating-point rounding; ties go to the smaller scene index.
inline std::vector<int> largest_remainder_order(const std::vector<int>& counts) {
  std::int64_t total = 0;
  for (int c : counts) {
    require(c >= 0, "largest_remainder_order: negative count");
    total += c;
  }
  require(total > 0, "largest_remainder_order: nothing to schedule");

  std::vector<int> placed(counts.size(), 0);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(total));
  for (std::int64_t k = 1; k <= total; ++k) {
    int best = -1;
    std::int64_t best_deficit = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (placed[s] >= counts[s]) continue;
      // deficit = k * p_s - placed_s, scaled by total.
      const std::int64_t deficit =
          k * static_cast<std::int64_t>(counts[s]) -
          static_cast<std::int64_t>(placed[s]) * total;
      if (best < 0 || deficit > best_deficit) {
        best = static_cast<int>(s);
        best_deficit = deficit;
      }
    }
    ++placed[static_cast<std::size_t>(best)];
    out.push_back(best);
  }
  return out;
}

}  // namespace detail

// Epoch schedule with dt equal to the epoch number, clamped per scene so
// t+dt stays inside the scene. Frame order within a scene is shuffled;
// scenes are interleaved so local frequencies track global proportions.
inline std::vector<BatchRef> time_divergent_schedule(const Dataset& ds,
                                                     int epoch, Rng& rng) {
  detail::require(epoch >= 0, "time_divergent_schedule: negative epoch");
  const int n_scenes = static_cast<int>(ds.scenes.size());
  std::vector<int> counts(ds.scenes.size(), 0);
  std::vector<int> dts(ds.scenes.size(), 0);
  std::vector<std::vector<int>> ts(ds.scenes.size());
  for (int s = 0; s < n_scenes; ++s) {
    const int frames = static_cast<int>(ds.scenes[s].frames.size());
    if (frames == 0) continue;
    dts[s] = std::min(epoch, frames - 1);
    counts[s] = frames - dts[s];
    ts[s].resize(static_cast<std::size_t>(counts[s]));
    for (int t = 0; t < counts[s]; ++t) ts[s][static_cast<std::size_t>(t)] = t;
    rng.shuffle(ts[s]);
  }

  std::vector<BatchRef> schedule;
  std::vector<int> next(ds.scenes.size(), 0);
  for (int s : detail::largest_remainder_order(counts)) {
    const int t = ts[s][static_cast<std::size_t>(next[s]++)];
    schedule.push_back(BatchRef{s, t, dts[s]});
  }
  return schedule;
}

// Baseline: dt fixed at 1, batches drawn in one uniform shuffle.
inline std::vector<BatchRef> standard_schedule(const Dataset& ds, Rng& rng) {
  std::vector<BatchRef> schedule;
  for (int s = 0; s < static_cast<int>(ds.scenes.size()); ++s) {
    const int frames = static_cast<int>(ds.scenes[s].frames.size());
    for (int t = 0; t + 1 < frames; ++t) schedule.push_back(BatchRef{s, t, 1});
  }
  detail::require(!schedule.empty(), "standard_schedule: no trainable batches");
  rng.shuffle(schedule);
  return schedule;
}

inline SamplerState make_schedule(const Dataset& ds, SamplerKind kind,
                                  int epoch, Rng& rng) {
  if (kind == SamplerKind::kStandard)
    return SamplerState{epoch, standard_schedule(ds, rng)};
  return SamplerState{epoch, time_divergent_schedule(ds, epoch, rng)};
}

}  // namespace pcc
