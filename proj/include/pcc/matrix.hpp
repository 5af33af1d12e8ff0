#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <vector>

namespace pcc {

// Dense row-major matrix. Small and unclever on purpose: every shape in
// this project is on the order of detections-per-camera (tens), so clarity
// beats blocking. A 1x1 matrix doubles as a scalar where needed.
template <typename T>
class DenseMatrix {
 public:
  DenseMatrix() : rows_(0), cols_(0) {}

  DenseMatrix(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {
    assert(rows >= 0 && cols >= 0);
  }

  DenseMatrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : rows) {
      assert(static_cast<int>(r.size()) == cols_);
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  const T& operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool operator==(const DenseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  static DenseMatrix identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

 private:
  int rows_, cols_;
  std::vector<T> data_;
};

using Matrix = DenseMatrix<double>;
using IntMatrix = DenseMatrix<int>;

template <typename T>
bool same_shape(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

inline IntMatrix matmul(const IntMatrix& a, const IntMatrix& b) {
  assert(a.cols() == b.rows());
  IntMatrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k)
      for (int j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

template <typename T>
DenseMatrix<T> transpose(const DenseMatrix<T>& a) {
  DenseMatrix<T> out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  assert(same_shape(a, b));
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * b(i, j);
  return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  assert(same_shape(a, b));
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
  return out;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  assert(same_shape(a, b));
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
  return out;
}

inline Matrix scale(const Matrix& a, double c) {
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = c * a(i, j);
  return out;
}

inline double sum_all(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) s += a(i, j);
  return s;
}

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) m = std::max(m, std::fabs(a(i, j)));
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  assert(same_shape(a, b));
  return max_abs(sub(a, b));
}

inline bool all_finite(const Matrix& a) {
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (!std::isfinite(a(i, j))) return false;
  return true;
}

// Row-wise temperature softmax: out[a, b] = exp(t s[a, b]) / sum_b' exp(t s[a, b']).
// The row max is subtracted before exponentiation; the result is unchanged
// and the exponents stay bounded for any t >= 0.
inline Matrix row_softmax(const Matrix& s, double temperature) {
  Matrix out(s.rows(), s.cols());
  for (int a = 0; a < s.rows(); ++a) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < s.cols(); ++b) mx = std::max(mx, s(a, b));
    double z = 0.0;
    for (int b = 0; b < s.cols(); ++b) {
      out(a, b) = std::exp(temperature * (s(a, b) - mx));
      z += out(a, b);
    }
    for (int b = 0; b < s.cols(); ++b) out(a, b) /= z;
  }
  return out;
}

}  // namespace pcc
