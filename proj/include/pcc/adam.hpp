#pragma once

#include <cmath>
#include <vector>

#include "pcc/autodiff.hpp"
#include "pcc/matrix.hpp"

namespace pcc {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void validate(const AdamConfig& cfg) {
  detail::require(cfg.learning_rate > 0.0, "AdamConfig: learning rate <= 0");
  detail::require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0, "AdamConfig: beta1");
  detail::require(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0, "AdamConfig: beta2");
  detail::require(cfg.epsilon > 0.0, "AdamConfig: epsilon <= 0");
}

// Bias-corrected Adam over a fixed list of parameter tensors. Moments are
// created on first use and must keep their shapes for the optimizer's
// whole life.
class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) { validate(cfg); }

  int step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  void step(const std::vector<Matrix*>& params,
            const std::vector<Matrix>& grads) {
    detail::require(params.size() == grads.size(),
                    "Adam::step: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
      }
    }
    detail::require(params.size() == m_.size(),
                    "Adam::step: parameter count changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix& p = *params[k];
      const Matrix& g = grads[k];
      detail::require(same_shape(p, g) && same_shape(p, m_[k]),
                      "Adam::step: shape mismatch");
      for (int r = 0; r < p.rows(); ++r)
        for (int c = 0; c < p.cols(); ++c) {
          double& m = m_[k](r, c);
          double& v = v_[k](r, c);
          m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g(r, c);
          v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g(r, c) * g(r, c);
          p(r, c) -= cfg_.learning_rate * (m / c1) /
                     (std::sqrt(v / c2) + cfg_.epsilon);
        }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  int t_ = 0;
};

}  // namespace pcc
