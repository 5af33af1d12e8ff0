#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pcc/cycles.hpp"
#include "pcc/rng.hpp"

using pcc::CycleMatrix;
using pcc::Matrix;
using pcc::Rng;
using pcc::Tape;
using pcc::TemperatureConfig;
using pcc::ViewEmbeddings;

namespace {

Matrix random_rows(Rng& rng, int n, int d) {
  Matrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

// First n rows of a d-dimensional identity: orthonormal one-hot people.
Matrix one_hot_people(int n, int d) {
  Matrix m(n, d);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void require_row_stochastic(const Matrix& a, double tol = 1e-9) {
  for (int r = 0; r < a.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < a.cols(); ++c) {
      REQUIRE(a(r, c) > 0.0);
      REQUIRE(a(r, c) < 1.0 + tol);
      sum += a(r, c);
    }
    REQUIRE(std::fabs(sum - 1.0) < tol);
  }
}

}  // namespace

TEST_CASE("adaptive temperature") {
  REQUIRE(pcc::adaptive_tau(1, {3.0}) == Catch::Approx(2.0794).margin(1e-4));
  REQUIRE(pcc::adaptive_tau(20, {3.0}) ==
          Catch::Approx(3.0 * std::log(21.0)).margin(1e-12));
  REQUIRE(pcc::adaptive_tau(20, {3.0}) == Catch::Approx(9.1336).margin(1e-4));
  for (int n = 1; n < 40; ++n)
    REQUIRE(pcc::adaptive_tau(n + 1, {}) > pcc::adaptive_tau(n, {}));
  REQUIRE_THROWS_AS(pcc::adaptive_tau(0, {}), std::invalid_argument);
  REQUIRE_THROWS_AS(pcc::adaptive_tau(3, {0.0}), std::invalid_argument);
}

TEST_CASE("cosine similarities") {
  SECTION("identical and orthogonal unit vectors") {
    Tape t;
    auto a = pcc::normalized_view(t, 0, Matrix{{2.0, 0.0}});
    auto b = pcc::normalized_view(t, 1, Matrix{{5.0, 0.0}});
    REQUIRE(pcc::cosine_similarities(a, b).s.value()(0, 0) ==
            Catch::Approx(1.0).margin(1e-12));

    auto e1 = pcc::normalized_view(t, 0, Matrix{{1.0, 0.0}});
    auto e2 = pcc::normalized_view(t, 1, Matrix{{0.0, 1.0}});
    REQUIRE(pcc::cosine_similarities(e1, e2).s.value()(0, 0) ==
            Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("random unit rows match a per-pair dot loop") {
    Rng rng(21);
    Tape t;
    auto a = pcc::normalized_view(t, 0, random_rows(rng, 4, 8));
    auto b = pcc::normalized_view(t, 1, random_rows(rng, 6, 8));
    Matrix s = pcc::cosine_similarities(a, b).s.value();
    const Matrix& av = a.vectors.value();
    const Matrix& bv = b.vectors.value();
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 6; ++q) {
        double dot = 0.0;
        for (int k = 0; k < 8; ++k) dot += av(p, k) * bv(q, k);
        REQUIRE(std::fabs(s(p, q) - dot) < 1e-12);
        REQUIRE(s(p, q) >= -1.0 - 1e-12);
        REQUIRE(s(p, q) <= 1.0 + 1e-12);
      }
  }

  SECTION("dimension mismatch is rejected") {
    Tape t;
    auto a = pcc::normalized_view(t, 0, Matrix{{1.0, 0.0}});
    auto b = pcc::normalized_view(t, 1, Matrix{{1.0, 0.0, 0.0}});
    REQUIRE_THROWS_AS(pcc::cosine_similarities(a, b), std::invalid_argument);
  }
}

TEST_CASE("soft match pairs") {
  SECTION("sharp temperature recovers an identity similarity") {
    Tape t;
    pcc::SimilarityMatrix s{0, 1, {&t, t.leaf(Matrix::identity(2))}};
    auto m = pcc::soft_match(s, TemperatureConfig{20.0});  // tau = 20 ln 3 > 20
    REQUIRE(pcc::max_abs_diff(m.a_ij.value(), Matrix::identity(2)) < 1e-3);
    REQUIRE(pcc::max_abs_diff(m.a_ji.value(), Matrix::identity(2)) < 1e-3);
  }

  SECTION("single-row similarity softmaxes the one row; reverse is all ones") {
    Tape t;
    pcc::SimilarityMatrix s{0, 1, {&t, t.leaf(Matrix{{0.9, 0.1, -0.3}})}};
    auto m = pcc::soft_match(s);
    REQUIRE(m.a_ij.value().rows() == 1);
    require_row_stochastic(m.a_ij.value());
    // Each of the three reverse rows has a single candidate.
    REQUIRE(pcc::max_abs_diff(m.a_ji.value(), Matrix(3, 1, 1.0)) < 1e-12);
  }

  SECTION("the two directions are not transposes of each other") {
    Rng rng(3);
    Tape t;
    auto a = pcc::normalized_view(t, 0, random_rows(rng, 3, 5));
    auto b = pcc::normalized_view(t, 1, random_rows(rng, 4, 5));
    auto m = pcc::soft_match(pcc::cosine_similarities(a, b));
    require_row_stochastic(m.a_ij.value());
    require_row_stochastic(m.a_ji.value());
    REQUIRE(pcc::max_abs_diff(m.a_ij.value(),
                              pcc::transpose(m.a_ji.value())) > 1e-3);
  }
}

TEST_CASE("pairwise cycles") {
  SECTION("equal views with one-hot people give a near-identity cycle") {
    Tape t;
    auto vi = pcc::normalized_view(t, 0, one_hot_people(3, 4));
    auto vj = pcc::normalized_view(t, 1, one_hot_people(3, 4));
    auto cyc = pcc::pairwise_cycle(
        pcc::soft_match(pcc::cosine_similarities(vi, vj), {20.0}));
    REQUIRE(pcc::max_abs_diff(cyc.a.value(), Matrix::identity(3)) < 1e-2);
    REQUIRE(cyc.anchor_view == 0);
    REQUIRE(cyc.variant == pcc::CycleVariant::kPairwise);
  }

  SECTION("cycle rows stay stochastic on random embeddings") {
    Rng rng(8);
    Tape t;
    auto vi = pcc::normalized_view(t, 0, random_rows(rng, 5, 6));
    auto vj = pcc::normalized_view(t, 1, random_rows(rng, 3, 6));
    auto cyc = pcc::pairwise_cycle(
        pcc::soft_match(pcc::cosine_similarities(vi, vj)));
    REQUIRE(cyc.a.value().rows() == 5);
    REQUIRE(cyc.a.value().cols() == 5);
    require_row_stochastic(cyc.a.value());
  }

  SECTION("a person missing from the partner view loses diagonal mass") {
    Tape t;
    // View 0 sees persons {0, 1, 2}; view 1 sees only {0, 1}.
    auto vi = pcc::normalized_view(t, 0, one_hot_people(3, 3));
    auto vj = pcc::normalized_view(t, 1, one_hot_people(2, 3));
    auto cyc = pcc::pairwise_cycle(
        pcc::soft_match(pcc::cosine_similarities(vi, vj)));
    const Matrix& a = cyc.a.value();
    REQUIRE(a(2, 2) < a(0, 0));
    REQUIRE(a(2, 2) < a(1, 1));
  }
}

TEST_CASE("triple cycles") {
  auto triple_from = [](Tape& t, const Matrix& mi, const Matrix& mj,
                        const Matrix& mk, TemperatureConfig cfg = {}) {
    auto vi = pcc::normalized_view(t, 0, mi);
    auto vj = pcc::normalized_view(t, 1, mj);
    auto vk = pcc::normalized_view(t, 2, mk);
    return pcc::triple_cycles(pcc::cosine_similarities(vi, vj),
                              pcc::cosine_similarities(vj, vk),
                              pcc::cosine_similarities(vk, vi), cfg);
  };

  SECTION("identical one-hot views give near-identity in all variants") {
    Tape t;
    Matrix people = one_hot_people(3, 4);
    auto cycles = triple_from(t, people, people, people, {20.0});
    for (const auto& c : cycles) {
      REQUIRE(pcc::max_abs_diff(c.a.value(), Matrix::identity(3)) < 1e-2);
      REQUIRE(c.anchor_view == 0);
    }
  }

  SECTION("all variants are anchor-shaped and row-stochastic") {
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
      Tape t;
      const int ni = 1 + static_cast<int>(rng.below(5));
      const int nj = 1 + static_cast<int>(rng.below(5));
      const int nk = 1 + static_cast<int>(rng.below(5));
      auto cycles = triple_from(t, random_rows(rng, ni, 6),
                                random_rows(rng, nj, 6),
                                random_rows(rng, nk, 6));
      for (const auto& c : cycles) {
        REQUIRE(c.a.value().rows() == ni);
        REQUIRE(c.a.value().cols() == ni);
        require_row_stochastic(c.a.value());
      }
    }
  }

  SECTION("a person absent from one view loses diagonal mass everywhere") {
    Tape t;
    // Person 0 visible in all three views; person 1 missing from view 2.
    auto cycles = triple_from(t, one_hot_people(2, 3), one_hot_people(2, 3),
                              one_hot_people(1, 3));
    for (const auto& c : cycles) {
      const Matrix& a = c.a.value();
      REQUIRE(a(0, 0) > a(1, 1));
    }
  }

  SECTION("degenerate triple with k = j collapses to the pairwise cycle") {
    Tape t;
    Matrix people_i = one_hot_people(3, 4);
    Matrix people_j = one_hot_people(3, 4);
    auto cycles = triple_from(t, people_i, people_j, people_j, {20.0});
    auto vi = pcc::normalized_view(t, 0, people_i);
    auto vj = pcc::normalized_view(t, 1, people_j);
    auto pair = pcc::pairwise_cycle(
        pcc::soft_match(pcc::cosine_similarities(vi, vj), {20.0}));
    for (const auto& c : cycles)
      REQUIRE(pcc::max_abs_diff(c.a.value(), pair.a.value()) < 1e-2);
  }

  SECTION("views that do not chain are rejected") {
    Tape t;
    auto vi = pcc::normalized_view(t, 0, one_hot_people(2, 3));
    auto vj = pcc::normalized_view(t, 1, one_hot_people(2, 3));
    auto vk = pcc::normalized_view(t, 2, one_hot_people(2, 3));
    auto s_ij = pcc::cosine_similarities(vi, vj);
    auto s_jk = pcc::cosine_similarities(vj, vk);
    REQUIRE_THROWS_AS(pcc::triple_cycles(s_ij, s_jk, s_jk),
                      std::invalid_argument);
  }

  SECTION("gradients flow back to the embeddings") {
    Rng rng(29);
    Tape t;
    Matrix raw = random_rows(rng, 3, 5);
    pcc::DiffMatrix leaf{&t, t.leaf(raw)};
    ViewEmbeddings vi{0, pcc::row_l2_normalize(leaf)};
    auto vj = pcc::normalized_view(t, 1, random_rows(rng, 4, 5));
    auto vk = pcc::normalized_view(t, 2, random_rows(rng, 2, 5));
    auto cycles = pcc::triple_cycles(pcc::cosine_similarities(vi, vj),
                                     pcc::cosine_similarities(vj, vk),
                                     pcc::cosine_similarities(vk, vi));
    auto loss = sum_all(hadamard(cycles[3].a, cycles[1].a));
    Matrix g = t.gradients(loss.v)[static_cast<std::size_t>(leaf.v.id)];
    REQUIRE(pcc::max_abs(g) > 0.0);

    const double h = 1e-6;
    Matrix bumped = raw;
    bumped(1, 2) += h;
    t.set_value(leaf.v, bumped);
    t.replay();
    const double up = loss.value()(0, 0);
    bumped(1, 2) -= 2.0 * h;
    t.set_value(leaf.v, bumped);
    t.replay();
    const double dn = loss.value()(0, 0);
    REQUIRE(g(1, 2) == Catch::Approx((up - dn) / (2.0 * h)).epsilon(1e-4));
  }
}
