#pragma once

// Shared test oracles. Everything here is independent of the library code
// paths it checks: finite differences for analytic gradients, exhaustive
// enumeration for expectations over {0,1}^K, and plain Monte Carlo.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semhash/code.hpp"
#include "semhash/matrix.hpp"
#include "semhash/rng.hpp"

namespace semhash::testing {

/// Central finite differences over every parameter reachable through
/// `params`, compared against `analytic` (same layout). Returns the worst
/// mismatch as (|a - fd|) / max(1, |a|, |fd|).
template <typename LossFn>
double max_fd_error(std::vector<TensorRef> params, const std::vector<TensorRef>& analytic,
                    LossFn&& loss, double step = 1e-6) {
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].data.size(); ++i) {
      double& v = params[t].data[i];
      const double saved = v;
      v = saved + step;
      const double up = loss();
      v = saved - step;
      const double down = loss();
      v = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = analytic[t].data[i];
      const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Exact E[score(z)] for z ~ prod_k Bernoulli(sigmoid(psi_k)), by
/// enumerating all 2^K codes.
inline double enumeration_expectation(const std::function<double(const BinaryCode&)>& score,
                                      std::span<const double> psi) {
  const std::size_t k = psi.size();
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
    BinaryCode z(k);
    double prob = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double p = sigmoid(psi[i]);
      if (mask & (1ULL << i)) {
        z.set_bit(i, true);
        prob *= p;
      } else {
        prob *= 1.0 - p;
      }
    }
    total += prob * score(z);
  }
  return total;
}

/// Exact gradient of the enumeration expectation w.r.t. psi:
///   d/dpsi_k = sigmoid'(psi_k) * sum_z score(z) * (z_k ? +1 : -1)
///              * prod_{j != k} Bern(z_j; sigmoid(psi_j)).
inline std::vector<double> enumeration_gradient(
    const std::function<double(const BinaryCode&)>& score, std::span<const double> psi) {
  const std::size_t k = psi.size();
  std::vector<double> grad(k, 0.0);
  for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
    BinaryCode z(k);
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (1ULL << i)) z.set_bit(i, true);
    }
    const double f = score(z);
    for (std::size_t i = 0; i < k; ++i) {
      double partial = sigmoid_deriv(psi[i]) * (z.bit(i) ? 1.0 : -1.0);
      for (std::size_t j = 0; j < k; ++j) {
        if (j == i) continue;
        const double p = sigmoid(psi[j]);
        partial *= z.bit(j) ? p : 1.0 - p;
      }
      grad[i] += f * partial;
    }
  }
  return grad;
}

struct McMoments {
  std::vector<double> mean;
  std::vector<double> std_error;
};

/// Streaming mean / standard error of a vector-valued sampler.
template <typename SampleFn>
McMoments mc_moments(SampleFn&& draw, std::size_t dim, std::size_t n) {
  std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
  std::vector<double> sample;
  for (std::size_t i = 1; i <= n; ++i) {
    sample = draw();
    for (std::size_t d = 0; d < dim; ++d) {
      const double delta = sample[d] - mean[d];
      mean[d] += delta / static_cast<double>(i);
      m2[d] += delta * (sample[d] - mean[d]);
    }
  }
  McMoments out;
  out.mean = std::move(mean);
  out.std_error.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    out.std_error[d] = std::sqrt(m2[d] / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return out;
}

}  // namespace semhash::testing
