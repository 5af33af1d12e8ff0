#pragma once

#include <vector>

#include "pcc/cycles.hpp"
#include "pcc/matrix.hpp"

namespace pcc {

// Hard 0/1 match hypothesis between two views. Row sums are at most 1 by
// construction (a softmax row exceeds 0.5 at most once). Column sums can
// exceed 1 when the thresholding runs along rows; downstream consumers
// only rely on rows.
struct PartialMatching {
  int i = 0, j = 0;
  IntMatrix p;
};

inline PartialMatching transpose(const PartialMatching& m) {
  return PartialMatching{m.j, m.i, transpose(m.p)};
}

// Threshold the soft match of the smaller view against the larger one.
// The smaller side is the one whose every detection could have a partner,
// so its softmax rows are the trustworthy ones. Equal sizes take the row
// orientation. Values are plain matrices: no gradient reaches a mask.
inline PartialMatching pseudo_matches_from(const Matrix& s, int i, int j,
                                           double tau_row, double tau_col) {
  const int n_i = s.rows();
  const int n_j = s.cols();
  IntMatrix p(n_i, n_j);
  if (n_i <= n_j) {
    Matrix a = row_softmax(s, tau_row);
    for (int r = 0; r < n_i; ++r)
      for (int c = 0; c < n_j; ++c) p(r, c) = a(r, c) > 0.5 ? 1 : 0;
  } else {
    Matrix a = row_softmax(transpose(s), tau_col);
    for (int r = 0; r < n_i; ++r)
      for (int c = 0; c < n_j; ++c) p(r, c) = a(c, r) > 0.5 ? 1 : 0;
  }
  return PartialMatching{i, j, p};
}

// Fixed temperature regardless of orientation.
inline PartialMatching pseudo_matches_from(const Matrix& s, int i, int j,
                                           double tau) {
  return pseudo_matches_from(s, i, j, tau, tau);
}

inline PartialMatching pseudo_matches_from(const Matrix& s, int i, int j,
                                           const TemperatureConfig& cfg = {}) {
  return pseudo_matches_from(s, i, j, adaptive_tau(s.cols(), cfg),
                             adaptive_tau(s.rows(), cfg));
}

inline PartialMatching pseudo_matches(const SimilarityMatrix& s,
                                      const TemperatureConfig& cfg = {}) {
  return pseudo_matches_from(s.s.value(), s.i, s.j, cfg);
}

// Which anchor detections are predicted to complete a given cycle. Only
// the diagonal of the full mask matrix is ever nonzero, so the vector of
// diagonal entries is the whole mask.
struct CycleMask {
  int anchor_view = 0;
  std::vector<int> d;

  int size() const { return static_cast<int>(d.size()); }
};

namespace detail {
inline void require_chain(const PartialMatching& p_ij,
                          const PartialMatching& p_jk,
                          const PartialMatching& p_ki) {
  require(p_ij.j == p_jk.i && p_jk.j == p_ki.i && p_ki.j == p_ij.i,
          "pseudo_mask: matchings do not chain i->j->k->i");
  require(p_ij.p.cols() == p_jk.p.rows() && p_jk.p.cols() == p_ki.p.rows() &&
              p_ki.p.cols() == p_ij.p.rows(),
          "pseudo_mask: matching shapes do not chain");
}
}  // namespace detail

// Path existence by explicit search: anchor detection a is flagged when
// some b and c link a -> b -> c -> a through all three matchings.
inline CycleMask pseudo_mask_enumerated(const PartialMatching& p_ij,
                                        const PartialMatching& p_jk,
                                        const PartialMatching& p_ki) {
  detail::require_chain(p_ij, p_jk, p_ki);
  const int n_i = p_ij.p.rows();
  const int n_j = p_ij.p.cols();
  const int n_k = p_jk.p.cols();
  CycleMask mask{p_ij.i, std::vector<int>(static_cast<std::size_t>(n_i), 0)};
  for (int a = 0; a < n_i; ++a)
    for (int b = 0; b < n_j && !mask.d[static_cast<std::size_t>(a)]; ++b) {
      if (!p_ij.p(a, b)) continue;
      for (int c = 0; c < n_k; ++c)
        if (p_jk.p(b, c) && p_ki.p(c, a)) {
          mask.d[static_cast<std::size_t>(a)] = 1;
          break;
        }
    }
  return mask;
}

// Same mask via the chained matrix product: entry (a, a) of
// P_ij P_jk P_ki counts the round trips from a, and the mask keeps the
// detections with at least one.
inline CycleMask pseudo_mask(const PartialMatching& p_ij,
                             const PartialMatching& p_jk,
                             const PartialMatching& p_ki) {
  detail::require_chain(p_ij, p_jk, p_ki);
  const IntMatrix trips = matmul(matmul(p_ij.p, p_jk.p), p_ki.p);
  CycleMask mask{p_ij.i,
                 std::vector<int>(static_cast<std::size_t>(trips.rows()), 0)};
  for (int a = 0; a < trips.rows(); ++a)
    mask.d[static_cast<std::size_t>(a)] = trips(a, a) >= 1 ? 1 : 0;
  return mask;
}

// Degenerate two-view cycle: a detection participates iff its row of the
// matching is nonempty.
inline CycleMask pairwise_pseudo_mask(const PartialMatching& p_ij) {
  const int n_i = p_ij.p.rows();
  CycleMask mask{p_ij.i, std::vector<int>(static_cast<std::size_t>(n_i), 0)};
  for (int a = 0; a < n_i; ++a)
    for (int b = 0; b < p_ij.p.cols(); ++b)
      if (p_ij.p(a, b)) {
        mask.d[static_cast<std::size_t>(a)] = 1;
        break;
      }
  return mask;
}

// Diagonal mask as a dense matrix, for elementwise products in the loss.
inline Matrix diagonal_mask_matrix(const CycleMask& mask) {
  Matrix m(mask.size(), mask.size());
  for (int a = 0; a < mask.size(); ++a)
    m(a, a) = static_cast<double>(mask.d[static_cast<std::size_t>(a)]);
  return m;
}

// I minus the mask: selects the diagonal entries whose cycle is predicted
// absent. Off-diagonals are zero in both halves.
inline Matrix complement_mask_matrix(const CycleMask& mask) {
  Matrix m(mask.size(), mask.size());
  for (int a = 0; a < mask.size(); ++a)
    m(a, a) = mask.d[static_cast<std::size_t>(a)] ? 0.0 : 1.0;
  return m;
}

}  // namespace pcc
