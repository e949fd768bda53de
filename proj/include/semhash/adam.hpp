#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "semhash/errors.hpp"
#include "semhash/matrix.hpp"

namespace semhash {

/// Adam with bias correction. Moment buffers are laid out to mirror the
/// tensor list passed to the first step; later steps must pass the same
/// tensors in the same order.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                     double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  std::uint64_t step_count() const { return step_; }
  double learning_rate() const { return lr_; }

  void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads) {
    if (params.size() != grads.size()) {
      throw ShapeError("adam step: parameter/gradient tensor counts differ");
    }
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t t = 0; t < params.size(); ++t) {
        m_[t].assign(params[t].data.size(), 0.0);
        v_[t].assign(params[t].data.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) {
      throw ShapeError("adam step: tensor count changed between steps");
    }

    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));

    for (std::size_t t = 0; t < params.size(); ++t) {
      auto p = params[t].data;
      auto g = grads[t].data;
      if (p.size() != g.size() || p.size() != m_[t].size()) {
        throw ShapeError("adam step: shape mismatch for tensor " + params[t].name);
      }
      if (!all_finite(g)) {
        throw NumericError("adam step: non-finite gradient in tensor " + params[t].name);
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[t][i] = beta1_ * m_[t][i] + (1.0 - beta1_) * g[i];
        v_[t][i] = beta2_ * v_[t][i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = m_[t][i] / bc1;
        const double vhat = v_[t][i] / bc2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace semhash
