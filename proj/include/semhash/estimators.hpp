#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "semhash/code.hpp"
#include "semhash/errors.hpp"
#include "semhash/matrix.hpp"

namespace semhash {

enum class EstimatorTag { arm, st, gs };

inline const char* estimator_name(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::arm: return "arm";
    case EstimatorTag::st: return "st";
    case EstimatorTag::gs: return "gs";
  }
  return "?";
}

/// Strategy selector for gradients through the Bernoulli latent layer.
struct EstimatorKind {
  EstimatorTag tag = EstimatorTag::arm;
  double gs_temperature = 1.0;  // used only when tag == gs

  void validate() const {
    if (tag == EstimatorTag::gs && !(gs_temperature > 0.0)) {
      throw ConfigError("gumbel-softmax temperature must be positive");
    }
  }
};

/// bit_k = 1 iff u_k < sigmoid(psi_k), i.e. z ~ Bernoulli(sigmoid(psi))
/// under the shared uniform variates u.
inline BinaryCode sample_bernoulli(std::span<const double> psi, std::span<const double> u) {
  if (psi.size() != u.size()) {
    throw ShapeError("sample_bernoulli: psi and u lengths differ");
  }
  BinaryCode z(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    if (u[k] < sigmoid(psi[k])) z.set_bit(k, true);
  }
  return z;
}

/// Unbiased single-sample gradient of E_{z~Bern(sigmoid(psi))}[score(z)]
/// with respect to the logits psi:
///
///   (score(1[u > sigmoid(-psi)]) - score(1[u < sigmoid(psi)])) * (u - 1/2)
///
/// The two pseudo-codes share one uniform vector (antithetic coupling) and
/// the score is evaluated exactly twice per call. Where the codes agree the
/// difference vanishes, so no extra baseline is needed to control variance.
/// score may be non-differentiable; it only has to be defined on {0,1}^K.
template <typename ScoreFn>
std::vector<double> arm_gradient(ScoreFn&& score, std::span<const double> psi,
                                 std::span<const double> u) {
  if (psi.size() != u.size()) {
    throw ShapeError("arm_gradient: psi and u lengths differ");
  }
  const std::size_t k = psi.size();
  BinaryCode z1(k), z2(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (u[i] > sigmoid(-psi[i])) z1.set_bit(i, true);
    if (u[i] < sigmoid(psi[i])) z2.set_bit(i, true);
  }
  std::vector<double> grad(k, 0.0);
  if (z1 == z2) return grad;  // difference is exactly zero
  const double f1 = score(static_cast<const BinaryCode&>(z1));
  const double f2 = score(static_cast<const BinaryCode&>(z2));
  if (!std::isfinite(f1) || !std::isfinite(f2)) {
    throw NumericError("arm_gradient: score returned a non-finite value");
  }
  const double diff = f1 - f2;
  for (std::size_t i = 0; i < k; ++i) grad[i] = diff * (u[i] - 0.5);
  return grad;
}

/// Straight-through rule for z sampled from Bernoulli(sigmoid(psi)):
/// forward value is z itself; the backward pass treats the sample as
/// z' = stop_gradient(z - sigmoid(psi)) + sigmoid(psi), so incoming
/// gradients reach psi scaled by sigmoid'(psi) only.
struct StPassThrough {
  BinaryCode value;
  std::vector<double> sig_deriv;  // sigmoid'(psi_k)

  std::vector<double> backward(std::span<const double> grad_in) const {
    if (grad_in.size() != sig_deriv.size()) {
      throw ShapeError("st backward: gradient length != K");
    }
    std::vector<double> g(sig_deriv.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = grad_in[k] * sig_deriv[k];
    return g;
  }
};

inline StPassThrough st_passthrough(std::span<const double> psi, BinaryCode z) {
  if (z.bits() != psi.size()) {
    throw ShapeError("st_passthrough: code length != K");
  }
  StPassThrough st;
  st.value = std::move(z);
  st.sig_deriv.resize(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) st.sig_deriv[k] = sigmoid_deriv(psi[k]);
  return st;
}

/// Relaxed binary sample via Logistic noise:
///   g_k = log u_k - log(1 - u_k),  h_k = sigmoid((g_k + psi_k) / tau).
/// The backward rule is the exact pathwise derivative dh/dpsi =
/// h (1 - h) / tau. As tau -> 0, h -> 1[g + psi > 0], which is
/// Bernoulli(sigmoid(psi))-distributed.
struct GsSample {
  std::vector<double> relaxed;   // h in (0,1)^K
  std::vector<double> dh_dpsi;

  std::vector<double> backward(std::span<const double> grad_in) const {
    if (grad_in.size() != dh_dpsi.size()) {
      throw ShapeError("gs backward: gradient length != K");
    }
    std::vector<double> g(dh_dpsi.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = grad_in[k] * dh_dpsi[k];
    return g;
  }
};

inline GsSample gs_relaxed_sample(std::span<const double> psi, std::span<const double> u,
                                  double tau) {
  if (psi.size() != u.size()) {
    throw ShapeError("gs_relaxed_sample: psi and u lengths differ");
  }
  if (!(tau > 0.0)) throw ConfigError("gs_relaxed_sample: temperature must be positive");
  GsSample s;
  s.relaxed.resize(psi.size());
  s.dh_dpsi.resize(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double g = std::log(u[k]) - std::log1p(-u[k]);
    const double h = sigmoid((g + psi[k]) / tau);
    s.relaxed[k] = h;
    s.dh_dpsi[k] = h * (1.0 - h) / tau;
  }
  return s;
}

/// Testing-phase code: hard threshold of the posterior means at 0.5,
/// i.e. bit_k = 1 iff psi_k >= 0. Ties (psi_k = 0) map to 1.
inline BinaryCode threshold_code(std::span<const double> psi) {
  BinaryCode z(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    if (psi[k] >= 0.0) z.set_bit(k, true);
  }
  return z;
}

}  // namespace semhash
