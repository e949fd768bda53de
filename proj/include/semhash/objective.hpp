#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semhash/code.hpp"
#include "semhash/errors.hpp"
#include "semhash/estimators.hpp"
#include "semhash/nn.hpp"
#include "semhash/tfidf.hpp"

namespace semhash {

struct PshHyper {
  double lambda = 0.01;  // KL weight
  double alpha = 0.1;    // classifier weight (scheduled during training)
  double beta = 0.05;    // pairwise weight
  std::size_t code_bits = 16;
};

/// Full model: encoder (phi), softmax decoder (theta = {E, b}), linear
/// classifier (eta; absent in unsupervised runs) and the Bernoulli prior.
struct PshModel {
  MlpEncoder encoder;
  SoftmaxDecoder decoder;
  LinearClassifier classifier;  // num_classes() == 0 when unsupervised
  std::vector<double> prior;    // gamma_k in (0,1), length K
  PshHyper hyper;

  bool supervised() const { return classifier.num_classes() > 0; }

  void validate() const {
    const std::size_t k = hyper.code_bits;
    if (encoder.code_bits() != k || decoder.code_bits() != k) {
      throw ShapeError("model: inconsistent code length across components");
    }
    if (supervised() && classifier.code_bits() != k) {
      throw ShapeError("model: classifier code length != K");
    }
    if (prior.size() != k) throw ShapeError("model: prior length != K");
    for (double g : prior) {
      if (!(g > 0.0 && g < 1.0)) throw ConfigError("model: prior probabilities must be in (0,1)");
    }
    if (hyper.lambda < 0.0 || hyper.alpha < 0.0 || hyper.beta < 0.0) {
      throw ConfigError("model: lambda, alpha, beta must be nonnegative");
    }
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> refs = encoder.tensors();
    for (TensorRef& t : decoder.tensors()) refs.push_back(std::move(t));
    if (supervised()) {
      for (TensorRef& t : classifier.tensors()) refs.push_back(std::move(t));
    }
    return refs;
  }
};

/// Log-probabilities of every vocabulary word given a binary code (Eq. of
/// the softmax decoder), stabilized by max subtraction.
inline std::vector<double> decoder_log_probs(const SoftmaxDecoder& dec, const BinaryCode& z) {
  if (z.bits() != dec.code_bits()) throw ShapeError("decoder_log_probs: code length != K");
  return log_softmax(dec.logits(z.to_doubles()));
}

/// Relaxed-code variant used by Gumbel-Softmax training forwards.
inline std::vector<double> decoder_log_probs_relaxed(const SoftmaxDecoder& dec,
                                                     std::span<const double> z) {
  return log_softmax(dec.logits(z));
}

/// TF-IDF-weighted document log-likelihood:
///   sum over the document support of weight_w * log p(word = w | z).
inline double reconstruction_ll_values(const SoftmaxDecoder& dec, std::span<const double> z,
                                       const TfidfVector& doc) {
  const std::vector<double> logp = log_softmax(dec.logits(z));
  double total = 0.0;
  for (const WeightedTerm& wt : doc.terms) {
    if (wt.term >= logp.size()) throw ShapeError("reconstruction_ll: term id out of range");
    total += wt.weight * logp[wt.term];
  }
  return total;
}

inline double reconstruction_ll(const SoftmaxDecoder& dec, const BinaryCode& z,
                                const TfidfVector& doc) {
  return reconstruction_ll_values(dec, z.to_doubles(), doc);
}

/// Accumulates scale * d(reconstruction_ll)/d(theta) into `dec_grads`, and
/// optionally scale * d(reconstruction_ll)/d(z) into `grad_code`. Returns
/// the (unscaled) reconstruction_ll value from the same forward pass.
/// d recon / d logit_w = weight_w - W_total * softmax(logits)_w, with
/// W_total the summed document weights.
inline double reconstruction_backward(const SoftmaxDecoder& dec, std::span<const double> z,
                                      const TfidfVector& doc, double scale,
                                      SoftmaxDecoder* dec_grads,
                                      std::span<double> grad_code = {}) {
  const std::vector<double> logp = log_softmax(dec.logits(z));
  double value = 0.0;
  double total_weight = 0.0;
  for (const WeightedTerm& wt : doc.terms) {
    if (wt.term >= logp.size()) throw ShapeError("reconstruction_backward: term out of range");
    value += wt.weight * logp[wt.term];
    total_weight += wt.weight;
  }
  std::vector<double> glogit(logp.size());
  for (std::size_t w = 0; w < logp.size(); ++w) glogit[w] = -total_weight * std::exp(logp[w]);
  for (const WeightedTerm& wt : doc.terms) glogit[wt.term] += wt.weight;

  if (dec_grads != nullptr) {
    axpy(scale, glogit, dec_grads->bias());
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (z[k] != 0.0) axpy(scale * z[k], glogit, dec_grads->embedding().row(k));
    }
  }
  if (!grad_code.empty()) {
    if (grad_code.size() != dec.code_bits()) {
      throw ShapeError("reconstruction_backward: grad_code length != K");
    }
    for (std::size_t k = 0; k < grad_code.size(); ++k) {
      grad_code[k] += scale * dot(dec.embedding().row(k), glogit);
    }
  }
  return value;
}

/// Closed-form KL between Bernoulli(q) with q = sigmoid(psi) and the prior
/// Bernoulli(gamma), summed over coordinates. q is clamped into
/// [1e-12, 1-1e-12] before the logs.
inline double kl_bernoulli(std::span<const double> psi, std::span<const double> gamma) {
  if (psi.size() != gamma.size()) throw ShapeError("kl_bernoulli: psi and gamma lengths differ");
  constexpr double eps = 1e-12;
  double total = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double g = gamma[k];
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("kl_bernoulli: gamma must be in (0,1)");
    const double q = std::clamp(sigmoid(psi[k]), eps, 1.0 - eps);
    total += q * std::log(q / g) + (1.0 - q) * std::log((1.0 - q) / (1.0 - g));
  }
  return total;
}

/// d KL / d psi_k = sigmoid'(psi_k) * (psi_k - logit(gamma_k)): the KL term
/// never goes through a gradient estimator.
inline std::vector<double> kl_bernoulli_grad(std::span<const double> psi,
                                             std::span<const double> gamma) {
  if (psi.size() != gamma.size()) {
    throw ShapeError("kl_bernoulli_grad: psi and gamma lengths differ");
  }
  std::vector<double> grad(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double g = gamma[k];
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("kl_bernoulli_grad: gamma must be in (0,1)");
    grad[k] = sigmoid_deriv(psi[k]) * (psi[k] - (std::log(g) - std::log1p(-g)));
  }
  return grad;
}

/// Softmax cross-entropy of the label head: -log softmax(W^T z + c)_y.
inline double classifier_loss_values(const LinearClassifier& clf, std::span<const double> z,
                                     std::uint32_t label) {
  if (label >= clf.num_classes()) {
    throw ValidationError("classifier_loss: label id " + std::to_string(label) +
                          " out of range for " + std::to_string(clf.num_classes()) + " classes");
  }
  const std::vector<double> logp = log_softmax(clf.logits(z));
  return -logp[label];
}

inline double classifier_loss(const LinearClassifier& clf, const BinaryCode& z,
                              std::uint32_t label) {
  return classifier_loss_values(clf, z.to_doubles(), label);
}

/// Accumulates scale * d(classifier_loss)/d(eta) into `clf_grads` and
/// optionally the code gradient; returns the (unscaled) loss value.
/// d loss / d logit = softmax(logits) - e_y.
inline double classifier_backward(const LinearClassifier& clf, std::span<const double> z,
                                  std::uint32_t label, double scale, LinearClassifier* clf_grads,
                                  std::span<double> grad_code = {}) {
  if (label >= clf.num_classes()) {
    throw ValidationError("classifier_backward: label out of range");
  }
  std::vector<double> glogit = log_softmax(clf.logits(z));
  const double value = -glogit[label];
  for (double& v : glogit) v = std::exp(v);
  glogit[label] -= 1.0;

  if (clf_grads != nullptr) {
    axpy(scale, glogit, clf_grads->bias());
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (z[k] != 0.0) axpy(scale * z[k], glogit, clf_grads->weight().row(k));
    }
  }
  if (!grad_code.empty()) {
    for (std::size_t k = 0; k < grad_code.size(); ++k) {
      grad_code[k] += scale * dot(clf.weight().row(k), glogit);
    }
  }
  return value;
}

inline bool labels_intersect(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  // both sides sorted
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

inline double normalized_hamming(const BinaryCode& z1, const BinaryCode& z2) {
  if (z1.bits() == 0) throw ShapeError("normalized_hamming: empty codes");
  return static_cast<double>(z1.hamming_distance(z2)) / static_cast<double>(z1.bits());
}

/// Multilinear extension of the normalized Hamming distance; coincides with
/// it on binary codes and stays differentiable for relaxed ones:
///   d(a, b) = (1/K) sum_k (a_k + b_k - 2 a_k b_k)
inline double relaxed_hamming(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("relaxed_hamming: length mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] + b[k] - 2.0 * a[k] * b[k];
  return d / static_cast<double>(a.size());
}

/// Pairwise code loss: +d for same-label pairs, -d for different-label
/// pairs, with d the normalized Hamming distance. "Same label" for
/// multi-label documents means a nonempty label intersection.
inline double pairwise_loss(const BinaryCode& z1, const BinaryCode& z2,
                            std::span<const std::uint32_t> labels1,
                            std::span<const std::uint32_t> labels2) {
  const double sign = labels_intersect(labels1, labels2) ? 1.0 : -1.0;
  return sign * normalized_hamming(z1, z2);
}

/// One (document, code) side of a training pair.
struct PairSide {
  const TfidfVector* doc = nullptr;
  std::span<const std::uint32_t> labels;
  const BinaryCode* code = nullptr;
  std::span<const double> psi;  // encoder logits for the KL term
};

struct Pair {
  PairSide first;
  PairSide second;
};

/// The full training loss for a batch of pairs, averaged over pairs:
///   -(recon1 - lambda KL1) - (recon2 - lambda KL2)
///   + beta * pairwise + alpha * (clf1 + clf2)
/// Codes must have been sampled from the encoder posteriors of the pair.
inline double psh_objective(const PshModel& model, std::span<const Pair> batch) {
  if (batch.empty()) throw ValidationError("psh_objective: empty batch");
  const auto side_loss = [&](const PairSide& s) {
    const double recon = reconstruction_ll(model.decoder, *s.code, *s.doc);
    const double kl = kl_bernoulli(s.psi, model.prior);
    double loss = -(recon - model.hyper.lambda * kl);
    if (model.supervised() && model.hyper.alpha > 0.0) {
      if (s.labels.empty()) throw ValidationError("psh_objective: unlabeled document");
      loss += model.hyper.alpha * classifier_loss(model.classifier, *s.code, s.labels[0]);
    }
    return loss;
  };
  double total = 0.0;
  for (const Pair& p : batch) {
    total += side_loss(p.first) + side_loss(p.second);
    if (model.hyper.beta > 0.0) {
      total += model.hyper.beta *
               pairwise_loss(*p.first.code, *p.second.code, p.first.labels, p.second.labels);
    }
  }
  return total / static_cast<double>(batch.size());
}

/// Word neighbors in the embedding space: the n tokens whose E columns have
/// the smallest cosine distance to the query column, excluding the query.
/// Ties break by ascending token id. Zero-norm columns count as distance 1.
inline std::vector<std::uint32_t> embedding_neighbor_ids(const SoftmaxDecoder& dec,
                                                         std::uint32_t query, std::size_t n) {
  const std::size_t vocab = dec.vocab_size();
  const std::size_t bits = dec.code_bits();
  if (query >= vocab) throw ValidationError("embedding_neighbor_ids: query id out of range");

  std::vector<double> dots(vocab, 0.0), norms(vocab, 0.0);
  for (std::size_t k = 0; k < bits; ++k) {
    const auto row = dec.embedding().row(k);
    const double qv = row[query];
    for (std::size_t w = 0; w < vocab; ++w) {
      dots[w] += qv * row[w];
      norms[w] += row[w] * row[w];
    }
  }
  const double qnorm = std::sqrt(norms[query]);

  std::vector<std::uint32_t> ids;
  ids.reserve(vocab - 1);
  for (std::uint32_t w = 0; w < vocab; ++w) {
    if (w != query) ids.push_back(w);
  }
  std::vector<double> dist(vocab, 1.0);
  for (std::uint32_t w = 0; w < vocab; ++w) {
    const double denom = qnorm * std::sqrt(norms[w]);
    if (denom > 0.0) dist[w] = 1.0 - dots[w] / denom;
  }
  const std::size_t take = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (dist[a] != dist[b]) return dist[a] < dist[b];
                      return a < b;
                    });
  ids.resize(take);
  return ids;
}

inline std::vector<std::string> embedding_neighbors(const SoftmaxDecoder& dec,
                                                    const Vocabulary& vocab,
                                                    const std::string& token, std::size_t n) {
  const auto id = vocab.find(token);
  if (!id) throw ValidationError("embedding_neighbors: unknown token '" + token + "'");
  std::vector<std::string> out;
  for (std::uint32_t w : embedding_neighbor_ids(dec, *id, n)) {
    out.push_back(vocab.id_to_token[w]);
  }
  return out;
}

}  // namespace semhash
