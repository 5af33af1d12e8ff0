#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcc/masking.hpp"
#include "pcc/matrix.hpp"
#include "pcc/rng.hpp"

// Exact integer-arithmetic model of partial matchings across N views,
// used as the oracle the trainable pipeline is measured against. Nothing
// here touches a tape or a float.

namespace pcc {

// The full grid of pairwise matchings. p[i][j] is n_i x n_j; the grid
// carries P_ii = I and P_ji = P_ij^T explicitly so checks can read any
// ordered pair directly.
struct MultiViewMatching {
  std::vector<int> sizes;
  std::vector<std::vector<IntMatrix>> p;

  int views() const { return static_cast<int>(sizes.size()); }

  const IntMatrix& at(int i, int j) const {
    return p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
};

// Structural sanity: identity diagonal blocks, transpose symmetry, and
// at most one partner per detection in each direction.
inline void validate(const MultiViewMatching& m) {
  const int n = m.views();
  detail::require(static_cast<int>(m.p.size()) == n,
                  "MultiViewMatching: grid/sizes mismatch");
  for (int i = 0; i < n; ++i) {
    detail::require(static_cast<int>(m.p[static_cast<std::size_t>(i)].size()) == n,
                    "MultiViewMatching: grid row length");
    detail::require(m.at(i, i) == IntMatrix::identity(m.sizes[static_cast<std::size_t>(i)]),
                    "MultiViewMatching: P_ii must be the identity");
    for (int j = 0; j < n; ++j) {
      const IntMatrix& pij = m.at(i, j);
      detail::require(pij.rows() == m.sizes[static_cast<std::size_t>(i)] &&
                          pij.cols() == m.sizes[static_cast<std::size_t>(j)],
                      "MultiViewMatching: block shape");
      detail::require(transpose(pij) == m.at(j, i),
                      "MultiViewMatching: P_ji must equal P_ij^T");
      for (int a = 0; a < pij.rows(); ++a) {
        int row_sum = 0;
        for (int b = 0; b < pij.cols(); ++b) {
          detail::require(pij(a, b) == 0 || pij(a, b) == 1,
                          "MultiViewMatching: entries must be 0/1");
          row_sum += pij(a, b);
        }
        detail::require(row_sum <= 1, "MultiViewMatching: row sum > 1");
      }
      for (int b = 0; b < pij.cols(); ++b) {
        int col_sum = 0;
        for (int a = 0; a < pij.rows(); ++a) col_sum += pij(a, b);
        detail::require(col_sum <= 1, "MultiViewMatching: column sum > 1");
      }
    }
  }
}

// Build the grid from per-view identity lists: detections match exactly
// when they carry the same identity. Consistent by construction.
inline MultiViewMatching matching_from_identities(
    const std::vector<std::vector<int>>& ids) {
  MultiViewMatching m;
  const int n = static_cast<int>(ids.size());
  for (const auto& view : ids) m.sizes.push_back(static_cast<int>(view.size()));
  m.p.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    m.p[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      IntMatrix block(m.sizes[static_cast<std::size_t>(i)],
                      m.sizes[static_cast<std::size_t>(j)]);
      for (int a = 0; a < block.rows(); ++a)
        for (int b = 0; b < block.cols(); ++b)
          block(a, b) = ids[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] ==
                                ids[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)]
                            ? 1
                            : 0;
      m.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = block;
    }
  }
  return m;
}

// True masks read off the matching itself (not from any prediction):
// the two-view mask flags detections with a partner in j, the
// three-view mask flags detections whose matches chain back home.
struct GroundTruthMasks {
  CycleMask pair_mask;    // I for the i -> j -> i cycle
  CycleMask triple_mask;  // I for the i -> j -> k -> i cycle
};

inline GroundTruthMasks ground_truth_masks(const MultiViewMatching& m, int i,
                                           int j, int k) {
  detail::require(i >= 0 && j >= 0 && k >= 0 && i < m.views() &&
                      j < m.views() && k < m.views(),
                  "ground_truth_masks: view index out of range");
  const IntMatrix& p_ij = m.at(i, j);
  const IntMatrix& p_jk = m.at(j, k);
  const IntMatrix& p_ki = m.at(k, i);
  const int n_i = p_ij.rows();

  GroundTruthMasks out{CycleMask{i, std::vector<int>(static_cast<std::size_t>(n_i), 0)},
                       CycleMask{i, std::vector<int>(static_cast<std::size_t>(n_i), 0)}};
  for (int a = 0; a < n_i; ++a) {
    for (int b = 0; b < p_ij.cols(); ++b) {
      if (!p_ij(a, b)) continue;
      out.pair_mask.d[static_cast<std::size_t>(a)] = 1;
      for (int c = 0; c < p_jk.cols(); ++c)
        if (p_jk(b, c) && p_ki(c, a))
          out.triple_mask.d[static_cast<std::size_t>(a)] = 1;
    }
  }
  return out;
}

struct ConsistencyViolation {
  int i, j, k;  // the triple whose indirect matching overshoots
  int a, c;     // detection a in view i reaches c in view k indirectly only
};

struct ConsistencyReport {
  bool consistent = true;
  std::vector<ConsistencyViolation> violations;
};

// The defining subset property: matching i -> j -> k never invents a
// link that the direct matching i -> k does not have.
inline ConsistencyReport check_consistency(const MultiViewMatching& m) {
  ConsistencyReport report;
  const int n = m.views();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const IntMatrix indirect = matmul(m.at(i, j), m.at(j, k));
        const IntMatrix& direct = m.at(i, k);
        for (int a = 0; a < indirect.rows(); ++a)
          for (int c = 0; c < indirect.cols(); ++c)
            if (indirect(a, c) >= 1 && direct(a, c) == 0) {
              report.consistent = false;
              report.violations.push_back({i, j, k, a, c});
            }
      }
  return report;
}

struct Proposition1Report {
  bool holds = true;
  std::vector<std::string> failures;
};

// The equivalence this whole codebase leans on: for a consistent
// matching, composing around any cycle lands exactly on the masked
// identity, with the mask read off the matching by enumeration. Checked
// with integer equality for every pair and every ordered triple.
inline Proposition1Report proposition1_verify(const MultiViewMatching& m) {
  detail::require(check_consistency(m).consistent,
                  "proposition1_verify: input matching is not consistent");
  Proposition1Report report;
  const int n = m.views();

  auto fail = [&report](std::string msg) {
    report.holds = false;
    report.failures.push_back(std::move(msg));
  };

  auto diag_of = [](const CycleMask& mask) {
    IntMatrix d(mask.size(), mask.size());
    for (int a = 0; a < mask.size(); ++a)
      d(a, a) = mask.d[static_cast<std::size_t>(a)];
    return d;
  };

  for (int i = 0; i < n; ++i)
    if (m.at(i, i) != IntMatrix::identity(m.sizes[static_cast<std::size_t>(i)]))
      fail("P_ii != I at view " + std::to_string(i));

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto masks = ground_truth_masks(m, i, j, j);
      if (matmul(m.at(i, j), m.at(j, i)) != diag_of(masks.pair_mask))
        fail("P_ij P_ji != masked identity for views (" + std::to_string(i) +
             "," + std::to_string(j) + ")");
    }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (i == j || j == k || i == k) continue;
        const auto masks = ground_truth_masks(m, i, j, k);
        const IntMatrix product =
            matmul(matmul(m.at(i, j), m.at(j, k)), m.at(k, i));
        if (product != diag_of(masks.triple_mask))
          fail("P_ij P_jk P_ki != masked identity for views (" +
               std::to_string(i) + "," + std::to_string(j) + "," +
               std::to_string(k) + ")");
      }

  return report;
}

struct RandomMatchingInstance {
  MultiViewMatching matching;
  std::vector<std::vector<int>> identities;  // per view, in detection order
};

// Sample a universe of identities, give every view an independent random
// subset in shuffled order, and induce all matchings by shared identity.
inline RandomMatchingInstance random_consistent_matching(int n_views,
                                                         int n_identities,
                                                         double visibility_prob,
                                                         std::uint64_t seed) {
  detail::require(n_views >= 1, "random_consistent_matching: need >= 1 view");
  detail::require(visibility_prob > 0.0 && visibility_prob <= 1.0,
                  "random_consistent_matching: visibility_prob in (0, 1]");
  Rng rng(seed);
  RandomMatchingInstance out;
  out.identities.resize(static_cast<std::size_t>(n_views));
  for (auto& view : out.identities) {
    for (int id = 0; id < n_identities; ++id)
      if (rng.uniform() < visibility_prob) view.push_back(id);
    rng.shuffle(view);
  }
  out.matching = matching_from_identities(out.identities);
  return out;
}

}  // namespace pcc
