#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pcc/autodiff.hpp"
#include "pcc/cycles.hpp"
#include "pcc/matrix.hpp"
#include "pcc/rng.hpp"

namespace pcc {

// Two affine layers with a tanh between, rows L2-normalized at the end so
// cosine similarity of any two outputs is a plain dot product. Deliberately
// small: the method only needs some differentiable feature map.
struct EncoderConfig {
  int obs_dim = 32;
  int hidden_dim = 64;
  int embed_dim = 32;
};

inline void validate(const EncoderConfig& cfg) {
  detail::require(cfg.obs_dim > 0, "EncoderConfig: obs_dim must be positive");
  detail::require(cfg.hidden_dim > 0,
                  "EncoderConfig: hidden_dim must be positive");
  detail::require(cfg.embed_dim > 0,
                  "EncoderConfig: embed_dim must be positive");
}

struct Encoder {
  Matrix w1, b1;  // obs_dim x hidden, 1 x hidden
  Matrix w2, b2;  // hidden x embed, 1 x embed

  int obs_dim() const { return w1.rows(); }
  int hidden_dim() const { return w1.cols(); }
  int embed_dim() const { return w2.cols(); }
};

// Fixed parameter order shared by the optimizer and the checkpoint format.
inline std::vector<Matrix*> parameters(Encoder& enc) {
  return {&enc.w1, &enc.b1, &enc.w2, &enc.b2};
}

inline std::vector<const Matrix*> parameters(const Encoder& enc) {
  return {&enc.w1, &enc.b1, &enc.w2, &enc.b2};
}

inline const char* const kParameterNames[] = {"w1", "b1", "w2", "b2"};

inline Encoder make_encoder(const EncoderConfig& cfg, Rng& rng) {
  validate(cfg);
  Encoder enc{Matrix(cfg.obs_dim, cfg.hidden_dim), Matrix(1, cfg.hidden_dim),
              Matrix(cfg.hidden_dim, cfg.embed_dim), Matrix(1, cfg.embed_dim)};
  const double s1 = 1.0 / std::sqrt(static_cast<double>(cfg.obs_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  for (int r = 0; r < enc.w1.rows(); ++r)
    for (int c = 0; c < enc.w1.cols(); ++c) enc.w1(r, c) = s1 * rng.normal();
  for (int r = 0; r < enc.w2.rows(); ++r)
    for (int c = 0; c < enc.w2.cols(); ++c) enc.w2(r, c) = s2 * rng.normal();
  return enc;  // biases start at zero
}

// Parameter leaves on a tape; gradients come back in the same order.
struct BoundEncoder {
  Var w1, b1, w2, b2;
};

inline BoundEncoder bind(Tape& tape, const Encoder& enc) {
  return BoundEncoder{tape.leaf(enc.w1), tape.leaf(enc.b1), tape.leaf(enc.w2),
                      tape.leaf(enc.b2)};
}

inline std::vector<Var> bound_vars(const BoundEncoder& b) {
  return {b.w1, b.b1, b.w2, b.b2};
}

inline DiffMatrix encode(Tape& tape, const BoundEncoder& p, const Matrix& obs) {
  detail::require(obs.cols() == tape.value(p.w1).rows(),
                  "encode: observation width does not match encoder input");
  DiffMatrix x{&tape, tape.constant(obs)};
  DiffMatrix w1{&tape, p.w1}, b1{&tape, p.b1};
  DiffMatrix w2{&tape, p.w2}, b2{&tape, p.b2};
  DiffMatrix h = tanh(add_rowvec(matmul(x, w1), b1));
  return row_l2_normalize(add_rowvec(matmul(h, w2), b2));
}

inline ViewEmbeddings encode_view(Tape& tape, const BoundEncoder& p,
                                  int view_id, const Matrix& obs) {
  return ViewEmbeddings{view_id, encode(tape, p, obs)};
}

// Same arithmetic without a tape, for inference over a frozen encoder.
inline Matrix encode_plain(const Encoder& enc, const Matrix& obs) {
  detail::require(obs.cols() == enc.obs_dim(),
                  "encode_plain: observation width does not match encoder");
  Matrix h = matmul(obs, enc.w1);
  for (int r = 0; r < h.rows(); ++r)
    for (int c = 0; c < h.cols(); ++c) h(r, c) = std::tanh(h(r, c) + enc.b1(0, c));
  Matrix e = matmul(h, enc.w2);
  for (int r = 0; r < e.rows(); ++r) {
    double sq = 0.0;
    for (int c = 0; c < e.cols(); ++c) {
      e(r, c) += enc.b2(0, c);
      sq += e(r, c) * e(r, c);
    }
    const double norm = std::sqrt(Tape::kNormEps + sq);
    for (int c = 0; c < e.cols(); ++c) e(r, c) /= norm;
  }
  return e;
}

}  // namespace pcc
