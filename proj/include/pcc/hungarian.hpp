#pragma once

#include <limits>
#include <vector>

#include "pcc/autodiff.hpp"
#include "pcc/matrix.hpp"

namespace pcc {

struct Assignment {
  std::vector<int> row_to_col;  // -1 where a row is left out
  double value = 0.0;
};

namespace detail {

// Potential-based shortest augmenting paths (Jonker-Volgenant flavor) on a
// cost matrix with rows <= cols. Minimizes; 1-indexed internally with the
// 0 slots as sentinels. O(rows^2 * cols), deterministic: the scan always
// takes the first column reaching the minimum.
inline std::vector<int> min_cost_rows_to_cols(const Matrix& cost) {
  const int n = cost.rows(), m = cost.cols();
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] > 0)
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] =
          j - 1;
  return row_to_col;
}

}  // namespace detail

// Optimal one-to-one assignment maximizing total profit. Every row of the
// smaller side ends up assigned; thresholding away weak pairs is the
// caller's job.
inline Assignment hungarian_max(const Matrix& profit) {
  const int n = profit.rows(), m = profit.cols();
  if (n == 0 || m == 0) return Assignment{std::vector<int>(static_cast<std::size_t>(n), -1), 0.0};
  detail::require(all_finite(profit), "hungarian_max: non-finite profit");

  std::vector<int> row_to_col;
  if (n <= m) {
    Matrix cost(n, m);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < m; ++c) cost(r, c) = -profit(r, c);
    row_to_col = detail::min_cost_rows_to_cols(cost);
  } else {
    Matrix cost(m, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < m; ++c) cost(c, r) = -profit(r, c);
    const std::vector<int> col_to_row = detail::min_cost_rows_to_cols(cost);
    row_to_col.assign(static_cast<std::size_t>(n), -1);
    for (int c = 0; c < m; ++c)
      if (col_to_row[static_cast<std::size_t>(c)] >= 0)
        row_to_col[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(c)])] = c;
  }

  Assignment out{std::move(row_to_col), 0.0};
  for (int r = 0; r < n; ++r)
    if (out.row_to_col[static_cast<std::size_t>(r)] >= 0)
      out.value += profit(r, out.row_to_col[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace pcc
