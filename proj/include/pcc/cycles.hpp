#pragma once

#include <array>
#include <cmath>

#include "pcc/autodiff.hpp"
#include "pcc/matrix.hpp"

namespace pcc {

// Softmax temperature grows with the number of candidates, so that a
// clear winner can keep most of the probability mass in wide rows too.
struct TemperatureConfig {
  double tau0 = 3.0;
};

inline double adaptive_tau(int n_cols, const TemperatureConfig& cfg = {}) {
  detail::require(n_cols >= 1, "adaptive_tau: need at least one column");
  detail::require(cfg.tau0 > 0.0, "adaptive_tau: tau0 must be > 0");
  return cfg.tau0 * std::log(static_cast<double>(n_cols) + 1.0);
}

// One camera view's embedded detections: n_i rows, each L2-normalized.
struct ViewEmbeddings {
  int view_id = 0;
  DiffMatrix vectors;

  int count() const { return vectors.value().rows(); }
  int dim() const { return vectors.value().cols(); }
};

// Convenience for raw rows that are not yet unit length.
inline ViewEmbeddings normalized_view(Tape& tape, int view_id,
                                      const Matrix& rows) {
  DiffMatrix raw{&tape, tape.leaf(rows)};
  return ViewEmbeddings{view_id, row_l2_normalize(raw)};
}

struct SimilarityMatrix {
  int i = 0, j = 0;
  DiffMatrix s;  // n_i x n_j
};

// Cosine similarity of every detection pair across two views. Rows are
// unit length, so this is just the Gram matrix.
inline SimilarityMatrix cosine_similarities(const ViewEmbeddings& a,
                                            const ViewEmbeddings& b) {
  detail::require(a.dim() == b.dim(),
                  "cosine_similarities: embedding dims differ");
  return SimilarityMatrix{a.view_id, b.view_id,
                          matmul(a.vectors, transpose(b.vectors))};
}

// Row-stochastic match estimates in both directions. The two are not
// transposes of each other: each direction normalizes over its own
// candidate set and gets its own temperature.
struct SoftMatchPair {
  int i = 0, j = 0;
  DiffMatrix a_ij;  // n_i x n_j
  DiffMatrix a_ji;  // n_j x n_i
};

inline SoftMatchPair soft_match(const SimilarityMatrix& s,
                                const TemperatureConfig& cfg = {}) {
  const int n_i = s.s.value().rows();
  const int n_j = s.s.value().cols();
  return SoftMatchPair{
      s.i, s.j,
      row_softmax(s.s, adaptive_tau(n_j, cfg)),
      row_softmax(transpose(s.s), adaptive_tau(n_i, cfg)),
  };
}

enum class CycleVariant { kPairwise, kV0, kV1, kV2, kV3 };

inline const char* variant_name(CycleVariant v) {
  switch (v) {
    case CycleVariant::kPairwise: return "pairwise";
    case CycleVariant::kV0: return "v0";
    case CycleVariant::kV1: return "v1";
    case CycleVariant::kV2: return "v2";
    case CycleVariant::kV3: return "v3";
  }
  return "?";
}

struct Triple {
  int i = -1, j = -1, k = -1;
};

// A soft round trip that starts and ends at the anchor view. Square, one
// row per anchor detection; a detection whose cycle exists should put
// its mass on the diagonal.
struct CycleMatrix {
  int anchor_view = 0;
  CycleVariant variant = CycleVariant::kPairwise;
  DiffMatrix a;  // n_i x n_i
  Triple triple;

  int anchor_count() const { return a.value().rows(); }
};

// i -> j -> i.
inline CycleMatrix pairwise_cycle(const SoftMatchPair& m) {
  return CycleMatrix{m.i, CycleVariant::kPairwise, matmul(m.a_ij, m.a_ji),
                     Triple{m.i, m.j, m.i}};
}

// The four i -> j -> k -> i round trips. They differ in where the soft
// normalization happens: v0 normalizes each hop, v1 and v2 normalize the
// composed two-hop similarity S_ij S_jk, and v3 composes all three
// two-hop products. All four share the anchor shape n_i x n_i.
inline std::array<CycleMatrix, 4> triple_cycles(const SimilarityMatrix& s_ij,
                                                const SimilarityMatrix& s_jk,
                                                const SimilarityMatrix& s_ki,
                                                const TemperatureConfig& cfg = {}) {
  detail::require(s_ij.j == s_jk.i && s_jk.j == s_ki.i && s_ki.j == s_ij.i,
                  "triple_cycles: views do not chain i->j->k->i");
  const int n_i = s_ij.s.value().rows();
  const int n_j = s_jk.s.value().rows();
  const int n_k = s_ki.s.value().rows();
  detail::require(s_ij.s.value().cols() == n_j && s_jk.s.value().cols() == n_k &&
                      s_ki.s.value().cols() == n_i,
                  "triple_cycles: similarity shapes do not chain");

  const Triple t{s_ij.i, s_ij.j, s_jk.j};
  auto soft = [&cfg](DiffMatrix s, int cols) {
    return row_softmax(s, adaptive_tau(cols, cfg));
  };

  DiffMatrix a_ij = soft(s_ij.s, n_j);
  DiffMatrix a_jk = soft(s_jk.s, n_k);
  DiffMatrix a_ki = soft(s_ki.s, n_i);
  DiffMatrix v0 = matmul(matmul(a_ij, a_jk), a_ki);

  DiffMatrix s_ijk = matmul(s_ij.s, s_jk.s);  // n_i x n_k
  DiffMatrix a_ijk = soft(s_ijk, n_k);
  DiffMatrix a_kji = soft(transpose(s_ijk), n_i);
  DiffMatrix v1 = matmul(a_ijk, a_kji);

  DiffMatrix v2 = matmul(a_ijk, a_ki);

  DiffMatrix s_kij = matmul(s_ki.s, s_ij.s);  // n_k x n_j
  DiffMatrix s_jki = matmul(s_jk.s, s_ki.s);  // n_j x n_i
  DiffMatrix a_kij = soft(s_kij, n_j);
  DiffMatrix a_jki = soft(s_jki, n_i);
  DiffMatrix v3 = matmul(matmul(a_ijk, a_kij), a_jki);

  return {
      CycleMatrix{t.i, CycleVariant::kV0, v0, t},
      CycleMatrix{t.i, CycleVariant::kV1, v1, t},
      CycleMatrix{t.i, CycleVariant::kV2, v2, t},
      CycleMatrix{t.i, CycleVariant::kV3, v3, t},
  };
}

}  // namespace pcc
