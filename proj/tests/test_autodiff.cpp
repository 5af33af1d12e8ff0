#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pcc/autodiff.hpp"
#include "pcc/matrix.hpp"
#include "pcc/rng.hpp"

using pcc::DiffMatrix;
using pcc::Matrix;
using pcc::Rng;
using pcc::Tape;
using pcc::Var;

namespace {

// Oracle: textbook triple loop in i-j-k order, no reordering, no zero
// skipping. Deliberately independent of pcc::matmul's loop structure.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Central finite difference of the tape's scalar output with respect to
// one entry of one leaf. Restores the tape before returning.
double central_difference(Tape& tape, Var leaf, Var out, int r, int c,
                          double h) {
  const Matrix base = tape.value(leaf);
  Matrix bumped = base;
  bumped(r, c) = base(r, c) + h;
  tape.set_value(leaf, bumped);
  tape.replay();
  const double f_plus = tape.value(out)(0, 0);
  bumped(r, c) = base(r, c) - h;
  tape.set_value(leaf, bumped);
  tape.replay();
  const double f_minus = tape.value(out)(0, 0);
  tape.set_value(leaf, base);
  tape.replay();
  return (f_plus - f_minus) / (2.0 * h);
}

// Comparison rule used throughout: relative error on significant entries,
// absolute error for entries that are numerically zero.
void require_gradient_entry(double analytic, double numeric) {
  const double mag = std::max(std::fabs(analytic), std::fabs(numeric));
  if (mag < 1e-8) {
    REQUIRE(std::fabs(analytic - numeric) < 1e-8);
  } else {
    REQUIRE(std::fabs(analytic - numeric) / mag < 1e-4);
  }
}

void require_matches_finite_differences(Tape& tape,
                                        const std::vector<Var>& leaves,
                                        Var out, double h = 1e-5) {
  const auto grads = tape.gradients(out);
  for (Var leaf : leaves) {
    const Matrix& g = grads[static_cast<std::size_t>(leaf.id)];
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c)
        require_gradient_entry(g(r, c),
                               central_difference(tape, leaf, out, r, c, h));
  }
}

}  // namespace

TEST_CASE("matmul matches a naive triple-loop oracle") {
  Rng rng(42);

  Matrix i2 = Matrix::identity(2);
  Matrix m{{1.0, 2.0}, {3.0, 4.0}};
  REQUIRE(pcc::matmul(i2, m) == m);

  Matrix swap{{0.0, 1.0}, {1.0, 0.0}};
  Matrix swapped = pcc::matmul(m, swap);
  REQUIRE(swapped == Matrix{{2.0, 1.0}, {4.0, 3.0}});

  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int k = 1 + static_cast<int>(rng.below(6));
    const int p = 1 + static_cast<int>(rng.below(6));
    Matrix a = random_matrix(rng, n, k);
    Matrix b = random_matrix(rng, k, p);
    REQUIRE(pcc::max_abs_diff(pcc::matmul(a, b), naive_matmul(a, b)) < 1e-12);
  }

  Matrix a = random_matrix(rng, 4, 3);
  Matrix b = random_matrix(rng, 3, 5);
  REQUIRE(pcc::max_abs_diff(pcc::matmul(a, b), naive_matmul(a, b)) < 1e-12);
}

TEST_CASE("elementwise ops and reductions have textbook values") {
  Tape t;
  Var x = t.leaf(Matrix{{-1.0, 2.0}});
  REQUIRE(t.value(t.relu(x)) == Matrix{{0.0, 2.0}});

  Var m = t.leaf(Matrix{{1.0, 2.0}, {3.0, 4.0}});
  Var ones = t.constant(Matrix(2, 2, 1.0));
  REQUIRE(t.value(t.hadamard(m, ones)) == t.value(m));
  REQUIRE(t.value(t.sum_all(m))(0, 0) == 10.0);
  REQUIRE(t.value(t.scalar_mul(m, 2.0)) == Matrix{{2.0, 4.0}, {6.0, 8.0}});
  REQUIRE(t.value(t.scalar_add(m, 1.0)) == Matrix{{2.0, 3.0}, {4.0, 5.0}});
  REQUIRE(t.value(t.transpose(m)) == Matrix{{1.0, 3.0}, {2.0, 4.0}});
  REQUIRE(t.value(t.diagonal(m)) == Matrix{{1.0}, {4.0}});

  Var row = t.leaf(Matrix{{10.0, 20.0}});
  REQUIRE(t.value(t.add_rowvec(m, row)) == Matrix{{11.0, 22.0}, {13.0, 24.0}});

  Var normed = t.row_l2_normalize(t.leaf(Matrix{{3.0, 4.0}}));
  REQUIRE(pcc::max_abs_diff(t.value(normed), Matrix{{0.6, 0.8}}) < 1e-12);
}

TEST_CASE("row softmax values and normalization") {
  SECTION("all-zero input gives uniform rows at any temperature") {
    for (double tau : {0.5, 1.0, 7.0}) {
      Matrix y = pcc::row_softmax(Matrix(2, 2), tau);
      REQUIRE(pcc::max_abs_diff(y, Matrix(2, 2, 0.5)) < 1e-15);
    }
  }

  SECTION("hand-evaluated two-entry row") {
    Matrix y = pcc::row_softmax(Matrix{{1.0, -1.0}}, 1.0);
    // exp(1) / (exp(1) + exp(-1)) and its complement.
    REQUIRE(y(0, 0) == Catch::Approx(0.8808).margin(1e-4));
    REQUIRE(y(0, 1) == Catch::Approx(0.1192).margin(1e-4));
    REQUIRE(std::fabs(y(0, 0) - 1.0 / (1.0 + std::exp(-2.0))) < 1e-15);
  }

  SECTION("rows sum to one, entries strictly inside (0,1)") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(6));
      const int c = 2 + static_cast<int>(rng.below(6));
      Matrix s = random_matrix(rng, n, c, -3.0, 3.0);
      Matrix y = pcc::row_softmax(s, rng.uniform(0.1, 9.0));
      for (int r = 0; r < n; ++r) {
        double sum = 0.0;
        for (int b = 0; b < c; ++b) {
          REQUIRE(y(r, b) > 0.0);
          REQUIRE(y(r, b) < 1.0);
          sum += y(r, b);
        }
        REQUIRE(std::fabs(sum - 1.0) < 1e-9);
      }
    }
  }

  SECTION("max subtraction keeps huge temperatures finite") {
    Matrix y = pcc::row_softmax(Matrix{{500.0, -500.0}}, 50.0);
    REQUIRE(pcc::all_finite(y));
    REQUIRE(y(0, 0) == Catch::Approx(1.0));
  }
}

TEST_CASE("row max excluding the diagonal") {
  Tape t;

  Var eye = t.leaf(Matrix::identity(2));
  REQUIRE(t.value(t.row_max_excluding_diagonal(eye)) == Matrix{{0.0}, {0.0}});

  Var a = t.leaf(Matrix{{0.6, 0.4}, {0.3, 0.7}});
  REQUIRE(t.value(t.row_max_excluding_diagonal(a)) == Matrix{{0.4}, {0.3}});

  SECTION("random square matrices match a per-row loop oracle exactly") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(5));
      Matrix x = random_matrix(rng, n, n);
      Var v = t.leaf(x);
      Matrix got = t.value(t.row_max_excluding_diagonal(v));
      for (int r = 0; r < n; ++r) {
        double best = -1e300;
        for (int c = 0; c < n; ++c)
          if (c != r && x(r, c) > best) best = x(r, c);
        REQUIRE(got(r, 0) == best);
      }
    }
  }

  SECTION("subgradient goes to the first arg-max on ties") {
    Tape tt;
    Var x = tt.leaf(Matrix{{0.1, 0.5, 0.5}, {0.2, 0.0, 0.9}, {0.3, 0.3, 0.0}});
    Var loss = tt.sum_all(tt.row_max_excluding_diagonal(x));
    Matrix g = tt.gradients(loss)[static_cast<std::size_t>(x.id)];
    REQUIRE(g == Matrix{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}});
  }

  SECTION("1x1 input is rejected") {
    Tape tt;
    Var x = tt.leaf(Matrix(1, 1, 0.3));
    REQUIRE_THROWS_AS(tt.row_max_excluding_diagonal(x), std::invalid_argument);
  }
}

TEST_CASE("backward closed forms") {
  SECTION("sum of a matrix differentiates to all-ones") {
    Tape t;
    Var w = t.leaf(Matrix{{1.0, -2.0}, {0.5, 3.0}});
    auto table = pcc::backward(t, t.sum_all(w));
    REQUIRE(table.at(w) == Matrix(2, 2, 1.0));
  }

  SECTION("sum of a product differentiates to the partner transpose") {
    Rng rng(5);
    Matrix av = random_matrix(rng, 3, 4);
    Matrix bv = random_matrix(rng, 4, 2);
    Tape t;
    Var a = t.leaf(av);
    Var b = t.leaf(bv);
    auto table = pcc::backward(t, t.sum_all(t.matmul(a, b)));
    // d/dA sum(AB) = 1 B^T, d/dB = A^T 1.
    Matrix expect_a = pcc::matmul(Matrix(3, 2, 1.0), pcc::transpose(bv));
    Matrix expect_b = pcc::matmul(pcc::transpose(av), Matrix(3, 2, 1.0));
    REQUIRE(pcc::max_abs_diff(table.at(a), expect_a) < 1e-12);
    REQUIRE(pcc::max_abs_diff(table.at(b), expect_b) < 1e-12);
  }
}

TEST_CASE("every op's gradient matches central finite differences") {
  // One expression touching the whole op set, shaped like the real loss:
  // an encoder layer, cosine-style similarities, softmaxes in both
  // orientations, a cycle product, a masked margin construction.
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    Tape t;
    Var x = t.leaf(random_matrix(rng, 4, 6));
    Var y = t.leaf(random_matrix(rng, 5, 6));
    Var w = t.leaf(random_matrix(rng, 6, 6, -0.5, 0.5));
    Var b = t.leaf(random_matrix(rng, 1, 6, -0.2, 0.2));

    Var e1 = t.row_l2_normalize(t.tanh(t.add_rowvec(t.matmul(x, w), b)));
    Var e2 = t.row_l2_normalize(y);
    Var s = t.matmul(e1, t.transpose(e2));
    Var a1 = t.row_softmax(s, 2.5);
    Var a2 = t.row_softmax(t.transpose(s), 1.7);
    Var cycle = t.matmul(a1, a2);

    Matrix mask = Matrix::identity(4);
    mask(2, 2) = 0.0;
    Var masked = t.hadamard(cycle, t.constant(mask));
    Var viol = t.relu(t.scalar_add(
        t.sub(t.row_max_excluding_diagonal(masked), t.diagonal(masked)), 0.4));
    Var extra = t.sum_all(t.add(t.scalar_mul(e1, 0.3), t.matmul(x, w)));
    Var loss = t.add(t.scalar_mul(t.sum_all(viol), 0.5),
                     t.scalar_mul(extra, 0.05));

    require_matches_finite_differences(t, {x, y, w, b}, loss);
  }
}

TEST_CASE("replay reproduces values after a leaf update") {
  Rng rng(9);
  Matrix first = random_matrix(rng, 3, 3);
  Matrix second = random_matrix(rng, 3, 3);

  Tape t;
  Var x = t.leaf(first);
  Var out = t.sum_all(t.row_softmax(t.matmul(x, t.transpose(x)), 2.0));
  const double before = t.value(out)(0, 0);

  t.set_value(x, second);
  t.replay();

  Tape fresh;
  Var x2 = fresh.leaf(second);
  Var out2 =
      fresh.sum_all(fresh.row_softmax(fresh.matmul(x2, fresh.transpose(x2)), 2.0));
  REQUIRE(t.value(out)(0, 0) == fresh.value(out2)(0, 0));

  t.set_value(x, first);
  t.replay();
  REQUIRE(t.value(out)(0, 0) == before);
}

TEST_CASE("unreachable leaves get zero gradients") {
  Tape t;
  Var used = t.leaf(Matrix(2, 2, 1.0));
  Var unused = t.leaf(Matrix(3, 1, 5.0));
  auto table = pcc::backward(t, t.sum_all(used));
  REQUIRE(table.at(unused) == Matrix(3, 1, 0.0));
}

TEST_CASE("identical tapes give bit-identical values and gradients") {
  auto build = [](Tape& t, Var& leaf_out, Var& loss_out) {
    Rng rng(31);
    Matrix xv = Matrix(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) xv(i, j) = rng.uniform(-2.0, 2.0);
    leaf_out = t.leaf(xv);
    Var a = t.row_softmax(leaf_out, 3.0);
    Var c = t.matmul(a, t.row_softmax(t.transpose(leaf_out), 3.0));
    loss_out = t.sum_all(t.relu(t.scalar_add(
        t.sub(t.row_max_excluding_diagonal(c), t.diagonal(c)), 0.5)));
  };
  Tape t1, t2;
  Var leaf1, loss1, leaf2, loss2;
  build(t1, leaf1, loss1);
  build(t2, leaf2, loss2);
  REQUIRE(t1.value(loss1) == t2.value(loss2));
  REQUIRE(t1.gradients(loss1)[static_cast<std::size_t>(leaf1.id)] ==
          t2.gradients(loss2)[static_cast<std::size_t>(leaf2.id)]);
}

TEST_CASE("op preconditions are rejected") {
  Tape t;
  Var a = t.leaf(Matrix(2, 3, 1.0));
  Var b = t.leaf(Matrix(2, 3, 1.0));
  REQUIRE_THROWS_AS(t.matmul(a, b), std::invalid_argument);
  REQUIRE_THROWS_AS(t.row_softmax(a, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(t.row_softmax(a, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(t.gradients(a), std::invalid_argument);

  Matrix bad(1, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(t.leaf(bad), std::invalid_argument);

  Matrix wide(2, 2, 1.0);
  Var c = t.leaf(wide);
  REQUIRE_THROWS_AS(t.hadamard(a, c), std::invalid_argument);
}

TEST_CASE("expression handles compose like the underlying tape") {
  Rng rng(13);
  Tape t;
  Matrix xv = random_matrix(rng, 3, 4);
  DiffMatrix x{&t, t.leaf(xv)};
  DiffMatrix s = matmul(row_l2_normalize(x), transpose(row_l2_normalize(x)));
  DiffMatrix loss = sum_all(relu(scalar_add(
      row_max_excluding_diagonal(row_softmax(s, 2.0)) -
          diagonal(row_softmax(s, 2.0)),
      0.3)));
  REQUIRE(loss.value().rows() == 1);
  REQUIRE(loss.value().cols() == 1);
  REQUIRE(pcc::all_finite(loss.value()));
  require_matches_finite_differences(t, {x.v}, loss.v);
}
