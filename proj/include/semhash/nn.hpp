#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semhash/errors.hpp"
#include "semhash/matrix.hpp"
#include "semhash/rng.hpp"
#include "semhash/tfidf.hpp"

namespace semhash {

enum class RunMode { train, eval };

/// Glorot-uniform fill: entries in +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_init(DenseMatrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.values) v = (2.0 * rng.uniform() - 1.0) * bound;
}

/// Two-hidden-layer ReLU MLP mapping a sparse document vector to K logits.
/// Inverted dropout is applied to the output in train mode (scale by
/// 1/(1-p)), so the eval path needs no rescaling. Train-mode forwards with
/// dropout_rate > 0 consume exactly K uniforms from the stream, in output
/// order.
class MlpEncoder {
 public:
  MlpEncoder() = default;
  MlpEncoder(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2,
             std::size_t code_bits, double dropout_rate)
      : input_dim_(input_dim),
        hidden1_(hidden1),
        hidden2_(hidden2),
        code_bits_(code_bits),
        dropout_rate_(dropout_rate),
        w1_(input_dim, hidden1),   // input-major: row t holds term t's weights
        b1_(hidden1, 0.0),
        w2_(hidden2, hidden1),     // output-major
        b2_(hidden2, 0.0),
        w3_(code_bits, hidden2),   // output-major
        b3_(code_bits, 0.0) {
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw ConfigError("dropout rate must be in [0, 1)");
    }
  }

  void init_weights(Rng& rng) {
    glorot_init(w1_, input_dim_, hidden1_, rng);
    glorot_init(w2_, hidden1_, hidden2_, rng);
    glorot_init(w3_, hidden2_, code_bits_, rng);
    std::fill(b1_.begin(), b1_.end(), 0.0);
    std::fill(b2_.begin(), b2_.end(), 0.0);
    std::fill(b3_.begin(), b3_.end(), 0.0);
  }

  struct Cache {
    const MlpEncoder* owner = nullptr;
    TfidfVector input;
    std::vector<double> pre1, act1;  // hidden1 pre-activation / post-ReLU
    std::vector<double> pre2, act2;  // hidden2
    std::vector<double> dropout_scale;  // per-output: 0 or 1/(1-p); 1.0 in eval
  };

  /// Returns the K logits psi. `rng` is required only for train-mode
  /// forwards with dropout_rate > 0.
  std::vector<double> forward(const TfidfVector& x, RunMode mode, Rng* rng = nullptr,
                              Cache* cache = nullptr) const {
    std::vector<double> a1(b1_);
    for (const WeightedTerm& wt : x.terms) {
      if (wt.term >= input_dim_) {
        throw ShapeError("encoder forward: term id " + std::to_string(wt.term) +
                         " out of range for input dim " + std::to_string(input_dim_));
      }
      axpy(wt.weight, w1_.row(wt.term), a1);
    }
    std::vector<double> h1(a1);
    for (double& v : h1) v = std::max(0.0, v);

    std::vector<double> a2(b2_);
    for (std::size_t i = 0; i < hidden2_; ++i) a2[i] += dot(w2_.row(i), h1);
    std::vector<double> h2(a2);
    for (double& v : h2) v = std::max(0.0, v);

    std::vector<double> psi(b3_);
    for (std::size_t k = 0; k < code_bits_; ++k) psi[k] += dot(w3_.row(k), h2);

    std::vector<double> scale(code_bits_, 1.0);
    if (mode == RunMode::train && dropout_rate_ > 0.0) {
      if (rng == nullptr) {
        throw ConfigError("encoder forward: train mode with dropout requires an rng");
      }
      const double keep_scale = 1.0 / (1.0 - dropout_rate_);
      for (std::size_t k = 0; k < code_bits_; ++k) {
        scale[k] = rng->uniform() < dropout_rate_ ? 0.0 : keep_scale;
        psi[k] *= scale[k];
      }
    }

    if (cache != nullptr) {
      cache->owner = this;
      cache->input = x;
      cache->pre1 = std::move(a1);
      cache->act1 = std::move(h1);
      cache->pre2 = std::move(a2);
      cache->act2 = std::move(h2);
      cache->dropout_scale = std::move(scale);
    }
    return psi;
  }

  /// Accumulates d(loss)/d(parameters) into `grads` (an encoder of
  /// identical shape) given d(loss)/d(psi). The cache must come from a
  /// matching forward call on this encoder.
  void backward(const Cache& cache, std::span<const double> grad_psi, MlpEncoder& grads) const {
    if (cache.owner != this || cache.act2.size() != hidden2_ || cache.act1.size() != hidden1_) {
      throw ShapeError("encoder backward: cache does not match this encoder");
    }
    if (grad_psi.size() != code_bits_ || !same_shape(grads)) {
      throw ShapeError("encoder backward: gradient shapes disagree");
    }

    std::vector<double> g3(code_bits_);
    for (std::size_t k = 0; k < code_bits_; ++k) {
      g3[k] = grad_psi[k] * cache.dropout_scale[k];
    }

    std::vector<double> gh2(hidden2_, 0.0);
    for (std::size_t k = 0; k < code_bits_; ++k) {
      grads.b3_[k] += g3[k];
      axpy(g3[k], cache.act2, grads.w3_.row(k));
      axpy(g3[k], w3_.row(k), gh2);
    }
    for (std::size_t i = 0; i < hidden2_; ++i) {
      if (cache.pre2[i] <= 0.0) gh2[i] = 0.0;  // ReLU gate
    }

    std::vector<double> gh1(hidden1_, 0.0);
    for (std::size_t i = 0; i < hidden2_; ++i) {
      grads.b2_[i] += gh2[i];
      axpy(gh2[i], cache.act1, grads.w2_.row(i));
      axpy(gh2[i], w2_.row(i), gh1);
    }
    for (std::size_t j = 0; j < hidden1_; ++j) {
      if (cache.pre1[j] <= 0.0) gh1[j] = 0.0;
    }

    axpy(1.0, gh1, {grads.b1_.data(), grads.b1_.size()});
    for (const WeightedTerm& wt : cache.input.terms) {
      axpy(wt.weight, gh1, grads.w1_.row(wt.term));
    }
  }

  std::vector<TensorRef> tensors() {
    return {
        {"encoder.w1", {w1_.values.data(), w1_.values.size()}},
        {"encoder.b1", {b1_.data(), b1_.size()}},
        {"encoder.w2", {w2_.values.data(), w2_.values.size()}},
        {"encoder.b2", {b2_.data(), b2_.size()}},
        {"encoder.w3", {w3_.values.data(), w3_.values.size()}},
        {"encoder.b3", {b3_.data(), b3_.size()}},
    };
  }

  MlpEncoder zeros_like() const {
    return MlpEncoder(input_dim_, hidden1_, hidden2_, code_bits_, dropout_rate_);
  }

  bool same_shape(const MlpEncoder& other) const {
    return input_dim_ == other.input_dim_ && hidden1_ == other.hidden1_ &&
           hidden2_ == other.hidden2_ && code_bits_ == other.code_bits_;
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden1() const { return hidden1_; }
  std::size_t hidden2() const { return hidden2_; }
  std::size_t code_bits() const { return code_bits_; }
  double dropout_rate() const { return dropout_rate_; }
  void set_dropout_rate(double p) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    dropout_rate_ = p;
  }

 private:
  std::size_t input_dim_ = 0, hidden1_ = 0, hidden2_ = 0, code_bits_ = 0;
  double dropout_rate_ = 0.0;
  DenseMatrix w1_;
  std::vector<double> b1_;
  DenseMatrix w2_;
  std::vector<double> b2_;
  DenseMatrix w3_;
  std::vector<double> b3_;
};

/// Softmax decoder over the vocabulary: logit_w = sum_k z_k E[k,w] + b_w.
/// E doubles as the word embedding matrix (columns are word vectors).
class SoftmaxDecoder {
 public:
  SoftmaxDecoder() = default;
  SoftmaxDecoder(std::size_t code_bits, std::size_t vocab_size)
      : embedding_(code_bits, vocab_size), bias_(vocab_size, 0.0) {}

  void init_weights(Rng& rng) {
    glorot_init(embedding_, embedding_.rows, embedding_.cols, rng);
    std::fill(bias_.begin(), bias_.end(), 0.0);
  }

  std::size_t code_bits() const { return embedding_.rows; }
  std::size_t vocab_size() const { return embedding_.cols; }
  const DenseMatrix& embedding() const { return embedding_; }
  DenseMatrix& embedding() { return embedding_; }
  std::span<const double> bias() const { return bias_; }
  std::span<double> bias() { return bias_; }

  /// logits for a code given as dense values (binary or relaxed).
  std::vector<double> logits(std::span<const double> code) const {
    if (code.size() != code_bits()) {
      throw ShapeError("decoder logits: code length != K");
    }
    std::vector<double> out(bias_);
    for (std::size_t k = 0; k < code.size(); ++k) {
      if (code[k] != 0.0) axpy(code[k], embedding_.row(k), out);
    }
    return out;
  }

  std::vector<TensorRef> tensors() {
    return {
        {"decoder.embedding", {embedding_.values.data(), embedding_.values.size()}},
        {"decoder.bias", {bias_.data(), bias_.size()}},
    };
  }

  SoftmaxDecoder zeros_like() const { return SoftmaxDecoder(code_bits(), vocab_size()); }

 private:
  DenseMatrix embedding_;  // K x |V|
  std::vector<double> bias_;
};

/// log softmax with max-subtraction; output log-sum-exps to exactly 0 up to
/// rounding.
inline std::vector<double> log_softmax(std::vector<double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : logits) v -= lse;
  return logits;
}

inline std::vector<double> softmax(std::vector<double> logits) {
  logits = log_softmax(std::move(logits));
  for (double& v : logits) v = std::exp(v);
  return logits;
}

/// Single linear layer + softmax cross-entropy label head.
class LinearClassifier {
 public:
  LinearClassifier() = default;
  LinearClassifier(std::size_t code_bits, std::size_t num_classes)
      : weight_(code_bits, num_classes), bias_(num_classes, 0.0) {}

  void init_weights(Rng& rng) {
    glorot_init(weight_, weight_.rows, weight_.cols, rng);
    std::fill(bias_.begin(), bias_.end(), 0.0);
  }

  std::size_t code_bits() const { return weight_.rows; }
  std::size_t num_classes() const { return weight_.cols; }
  const DenseMatrix& weight() const { return weight_; }
  DenseMatrix& weight() { return weight_; }
  std::span<const double> bias() const { return bias_; }
  std::span<double> bias() { return bias_; }

  std::vector<double> logits(std::span<const double> code) const {
    if (code.size() != code_bits()) {
      throw ShapeError("classifier logits: code length != K");
    }
    std::vector<double> out(bias_);
    for (std::size_t k = 0; k < code.size(); ++k) {
      if (code[k] != 0.0) axpy(code[k], weight_.row(k), out);
    }
    return out;
  }

  std::vector<TensorRef> tensors() {
    return {
        {"classifier.weight", {weight_.values.data(), weight_.values.size()}},
        {"classifier.bias", {bias_.data(), bias_.size()}},
    };
  }

  LinearClassifier zeros_like() const { return LinearClassifier(code_bits(), num_classes()); }

 private:
  DenseMatrix weight_;  // K x C
  std::vector<double> bias_;
};

}  // namespace semhash
