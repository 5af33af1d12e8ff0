#pragma once

#include <utility>
#include <vector>

#include "pcc/cycles.hpp"
#include "pcc/masking.hpp"

namespace pcc {

// The literal mode multiplies the cycle matrix by the diagonal 0/1 mask,
// which zeroes every off-diagonal competitor inside each half of the
// loss. The row-select mode instead keeps rows intact and uses the mask
// to choose which rows (and columns) contribute, so competitors keep
// receiving gradient.
enum class MaskMode { kLiteral, kRowSelect };

struct MarginConfig {
  double m_plus = 0.7;
  double m_empty = 0.3;
  double m_unmasked = 0.5;
  MaskMode mask_mode = MaskMode::kLiteral;
};

inline void validate(const MarginConfig& cfg) {
  detail::require(cfg.m_plus > cfg.m_empty && cfg.m_empty > 0.0,
                  "MarginConfig: need m_plus > m_empty > 0");
  detail::require(cfg.m_plus < 1.0, "MarginConfig: m_plus must be below 1");
  detail::require(cfg.m_unmasked > 0.0 && cfg.m_unmasked < 1.0,
                  "MarginConfig: m_unmasked must be in (0,1)");
}

// Row margin violations: each detection's diagonal entry must beat its
// strongest row competitor by m.
inline DiffMatrix margin_loss(DiffMatrix a, double m) {
  DiffMatrix viol =
      relu(scalar_add(row_max_excluding_diagonal(a) - diagonal(a), m));
  return sum_all(viol);
}

inline DiffMatrix margin_loss(const CycleMatrix& cycle, double m) {
  return margin_loss(cycle.a, m);
}

// Same margin over rows and columns. Transposing the cycle gives the
// column view, so this is invariant to transposition by construction.
inline DiffMatrix symmetric_margin_loss(DiffMatrix a, double m) {
  return 0.5 * (margin_loss(a, m) + margin_loss(transpose(a), m));
}

inline DiffMatrix symmetric_margin_loss(const CycleMatrix& cycle, double m) {
  return symmetric_margin_loss(cycle.a, m);
}

namespace detail {

// Symmetric margin loss restricted to the rows and columns the 0/1
// column vector selects. Unselected rows contribute nothing, not even a
// plateau constant.
inline DiffMatrix selected_margin_loss(DiffMatrix a, const Matrix& select_col,
                                       double m) {
  Tape& t = *a.tape;
  DiffMatrix sel{&t, t.constant(select_col)};
  auto one_side = [&](DiffMatrix x) {
    DiffMatrix viol =
        relu(scalar_add(row_max_excluding_diagonal(x) - diagonal(x), m));
    return sum_all(hadamard(sel, viol));
  };
  return 0.5 * (one_side(a) + one_side(transpose(a)));
}

}  // namespace detail

// Two-margin loss steered by the pseudo-mask: detections whose cycle is
// predicted present must clear m_plus, the rest only the gentler
// m_empty. Rows fully zeroed by a mask half still contribute their
// constant relu(m) plateau in literal mode; that term carries no
// gradient and is kept so the value matches the formula as written.
inline DiffMatrix masked_loss(DiffMatrix a, const CycleMask& mask,
                              const MarginConfig& cfg) {
  const int n = a.value().rows();
  detail::require(mask.size() == n, "masked_loss: mask length != cycle side");
  Tape& t = *a.tape;

  if (cfg.mask_mode == MaskMode::kLiteral) {
    DiffMatrix keep{&t, t.constant(diagonal_mask_matrix(mask))};
    DiffMatrix drop{&t, t.constant(complement_mask_matrix(mask))};
    DiffMatrix present = symmetric_margin_loss(hadamard(a, keep), cfg.m_plus);
    DiffMatrix absent = symmetric_margin_loss(hadamard(a, drop), cfg.m_empty);
    return 0.5 * (present + absent);
  }

  Matrix sel(n, 1);
  Matrix unsel(n, 1);
  for (int r = 0; r < n; ++r) {
    sel(r, 0) = static_cast<double>(mask.d[static_cast<std::size_t>(r)]);
    unsel(r, 0) = 1.0 - sel(r, 0);
  }
  DiffMatrix present = detail::selected_margin_loss(a, sel, cfg.m_plus);
  DiffMatrix absent = detail::selected_margin_loss(a, unsel, cfg.m_empty);
  return 0.5 * (present + absent);
}

inline DiffMatrix masked_loss(const CycleMatrix& cycle, const CycleMask& mask,
                              const MarginConfig& cfg) {
  return masked_loss(cycle.a, mask, cfg);
}

// Unweighted mean over every cycle in the batch. With masking off this
// reproduces the plain symmetric margin loss at m_unmasked and ignores
// the masks entirely.
inline DiffMatrix batch_loss(
    const std::vector<std::pair<CycleMatrix, CycleMask>>& cycles,
    const MarginConfig& cfg, bool masking_enabled) {
  detail::require(!cycles.empty(), "batch_loss: empty batch");
  DiffMatrix total;
  bool first = true;
  for (const auto& [cycle, mask] : cycles) {
    DiffMatrix term = masking_enabled
                          ? masked_loss(cycle, mask, cfg)
                          : symmetric_margin_loss(cycle, cfg.m_unmasked);
    total = first ? term : total + term;
    first = false;
  }
  return (1.0 / static_cast<double>(cycles.size())) * total;
}

}  // namespace pcc
