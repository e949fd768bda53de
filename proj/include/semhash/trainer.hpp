#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "semhash/adam.hpp"
#include "semhash/code.hpp"
#include "semhash/corpus.hpp"
#include "semhash/errors.hpp"
#include "semhash/estimators.hpp"
#include "semhash/index.hpp"
#include "semhash/objective.hpp"
#include "semhash/parallel.hpp"
#include "semhash/rng.hpp"
#include "semhash/tfidf.hpp"

namespace semhash {

/// start -> end over ramp_epochs, then constant.
struct LinearRamp {
  double start = 0.01;
  double end = 0.1;
  std::size_t ramp_epochs = 10;

  double value(std::size_t epoch) const {
    if (ramp_epochs == 0 || epoch >= ramp_epochs) return end;
    return start + (end - start) * static_cast<double>(epoch) / static_cast<double>(ramp_epochs);
  }
};

/// init * decay^epoch, floored.
struct ExpDecay {
  double init = 1.0;
  double decay = 0.96;
  double floor = 0.1;

  double value(std::size_t epoch) const {
    return std::max(floor, init * std::pow(decay, static_cast<double>(epoch)));
  }
};

enum class TrainMode { unsupervised, supervised };

inline const char* train_mode_name(TrainMode m) {
  return m == TrainMode::supervised ? "supervised" : "unsupervised";
}

struct TrainConfig {
  TrainMode mode = TrainMode::unsupervised;
  EstimatorKind estimator{};
  std::size_t epochs = 100;
  std::size_t batch_size = 100;
  double learning_rate = 5e-4;
  double lambda = 0.01;              // KL weight
  double beta = 0.05;                // pairwise weight (supervised)
  LinearRamp alpha{0.01, 0.1, 10};   // classifier weight ramp (supervised)
  ExpDecay gs_temperature{1.0, 0.96, 0.1};
  double code_noise = 0.1;           // bit-flip rate on decoder input (unsupervised)
  double dropout = 0.2;
  std::size_t hidden1 = 500;
  std::size_t hidden2 = 500;
  std::size_t code_bits = 16;
  double prior = 0.5;                // Bernoulli prior gamma, broadcast over bits
  double grad_clip = 5.0;            // global-norm clip; 0 disables
  std::size_t val_eval_every = 10;   // epochs between validation evals; 0 = never
  bool select_best_by_val = true;    // restore the best-validation parameters at the end
  std::size_t precision_k = 100;
  std::uint64_t seed = 1;
  bool record_touched_docs = false;  // test instrumentation for split hygiene

  void validate() const {
    estimator.validate();
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    if (beta < 0.0) throw ConfigError("beta must be nonnegative");
    if (alpha.start < 0.0 || alpha.end < alpha.start) {
      throw ConfigError("alpha schedule must be a nondecreasing ramp");
    }
    if (!(gs_temperature.init > 0.0) || !(gs_temperature.floor > 0.0) ||
        !(gs_temperature.decay > 0.0) || gs_temperature.decay > 1.0) {
      throw ConfigError("gs temperature schedule must decay within (0,1] to a positive floor");
    }
    if (code_noise < 0.0 || code_noise >= 1.0) throw ConfigError("code_noise must be in [0, 1)");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (code_bits < 1) throw ConfigError("code_bits must be >= 1");
    if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden layer sizes must be >= 1");
    if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("prior must be in (0, 1)");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be nonnegative");
    if (precision_k < 1) throw ConfigError("precision_k must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double neg_elbo = 0.0;   // per-document mean of -(recon - lambda*KL)
  double recon = 0.0;
  double kl = 0.0;
  double clf = 0.0;        // unweighted cross-entropy mean (0 when unsupervised)
  double pairwise = 0.0;   // per-pair mean (0 when unsupervised)
  std::optional<double> val_p100;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;          // set when validation selected a checkpoint
  std::vector<std::uint64_t> touched_docs;        // sorted unique; only when recorded
};

/// Flips each bit independently with probability p. Training-time trick for
/// unsupervised runs only; never applied at evaluation.
inline BinaryCode inject_code_noise(const BinaryCode& z, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("inject_code_noise: p must be in [0, 1)");
  BinaryCode out = z;
  for (std::size_t k = 0; k < z.bits(); ++k) {
    if (rng.uniform() < p) out.flip_bit(k);
  }
  return out;
}

/// Fresh model sized for the corpus, weights Glorot-initialized from the
/// config seed.
inline PshModel make_model(const Corpus& corpus, const TrainConfig& cfg) {
  cfg.validate();
  std::size_t num_classes = 0;
  if (cfg.mode == TrainMode::supervised) {
    for (const auto& [label, name] : corpus.labels) {
      num_classes = std::max<std::size_t>(num_classes, label + 1);
    }
    if (num_classes == 0) {
      throw ValidationError("supervised mode requires a labeled corpus");
    }
  }
  PshModel model;
  model.encoder = MlpEncoder(corpus.vocab_size, cfg.hidden1, cfg.hidden2, cfg.code_bits,
                             cfg.dropout);
  model.decoder = SoftmaxDecoder(cfg.code_bits, corpus.vocab_size);
  if (num_classes > 0) model.classifier = LinearClassifier(cfg.code_bits, num_classes);
  model.prior.assign(cfg.code_bits, cfg.prior);
  model.hyper = {cfg.lambda, cfg.alpha.start, cfg.beta, cfg.code_bits};

  Rng rng(mix_seed({cfg.seed, 0x1417ULL}));
  model.encoder.init_weights(rng);
  model.decoder.init_weights(rng);
  if (num_classes > 0) model.classifier.init_weights(rng);
  model.validate();
  return model;
}

/// Eval-phase encoding of one split: deterministic eval forward, hard
/// threshold of the logits. Parallel over documents.
inline std::vector<CodeIndex::Entry> encode_split(const PshModel& model, const Corpus& corpus,
                                                  std::span<const double> idf, Split split) {
  const std::vector<std::uint64_t> ids = corpus.doc_ids_in(split);
  std::vector<CodeIndex::Entry> entries(ids.size());
  parallel_for(ids.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Document& doc = corpus.doc_by_id(ids[i]);
      const TfidfVector x = tfidf_vector(doc, idf);
      const std::vector<double> psi = model.encoder.forward(x, RunMode::eval);
      entries[i] = {doc.doc_id, threshold_code(psi), doc.labels};
    }
  });
  return entries;
}

/// precision@k of `query_split` codes against the `pool_split` index.
inline double evaluate_precision(const PshModel& model, const Corpus& corpus,
                                 std::span<const double> idf, Split pool_split,
                                 Split query_split, std::size_t k) {
  const CodeIndex index = CodeIndex::build(encode_split(model, corpus, idf, pool_split),
                                           model.hyper.code_bits);
  std::vector<QueryDoc> queries;
  for (CodeIndex::Entry& e : encode_split(model, corpus, idf, query_split)) {
    queries.push_back({std::move(e.code), std::move(e.labels), e.doc_id});
  }
  if (queries.empty() || index.size() == 0) {
    throw ValidationError("evaluate_precision: empty pool or query split");
  }
  return precision_at_k(index, queries, k);
}

namespace detail {

inline constexpr std::uint64_t kDocStreamTag = 0xD0CULL;
inline constexpr std::uint64_t kShuffleTag = 0x5F0FULL;

/// Per-side state of one training pair.
struct SideWork {
  const TfidfVector* x = nullptr;
  std::span<const std::uint32_t> labels;
  MlpEncoder::Cache cache;
  std::vector<double> psi;
  std::vector<double> u;
  BinaryCode z;                  // sampled hashing code
  std::vector<double> code_vals; // values fed to classifier/pairwise (z, or relaxed h for GS)
  std::vector<double> dec_vals;  // values fed to the decoder (code_vals after noise)
  std::vector<double> noise_sign;  // +1 per bit, -1 where the noise mask flipped
  GsSample gs;
};

struct StepMetrics {
  double recon = 0.0, kl = 0.0, clf = 0.0, pairwise = 0.0;
  std::size_t docs = 0, pairs = 0;
};

}  // namespace detail

/// Algorithm: per iteration, sample two mini-batches, encode, sample codes
/// from the Bernoulli posteriors, estimate the reconstruction /
/// classifier / pairwise gradient through the codes with the configured
/// estimator (the KL gradient is always analytic), backprop the decoder and
/// classifier at the sampled codes, and apply one Adam update over all
/// parameters. Deterministic given (config, corpus, seed): randomness is
/// partitioned per document from the master seed.
///
/// Per-document draw order from the stream, identical for every estimator:
///   K dropout uniforms (train mode, dropout > 0), then the K code
///   uniforms u, then K noise uniforms (unsupervised, code_noise > 0).
inline TrainReport train(PshModel& model, const Corpus& corpus, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  if (model.encoder.input_dim() != corpus.vocab_size) {
    throw ShapeError("train: model input dim != corpus vocabulary size");
  }
  const bool supervised = cfg.mode == TrainMode::supervised;
  if (supervised && !model.supervised()) {
    throw ConfigError("train: supervised mode requires a model with a classifier head");
  }

  TrainReport report;
  if (cfg.epochs == 0) return report;

  const std::vector<std::uint64_t> train_ids = corpus.doc_ids_in(Split::train);
  if (train_ids.empty()) throw ValidationError("train: empty training split");
  if (supervised) {
    for (std::uint64_t id : train_ids) {
      if (corpus.doc_by_id(id).labels.empty()) {
        throw ValidationError("train: supervised mode requires labels on all training documents"
                              " (doc " + std::to_string(id) + " is unlabeled)");
      }
    }
  }

  const std::vector<double> idf = compute_idf(corpus);
  std::unordered_map<std::uint64_t, TfidfVector> tfidf;
  tfidf.reserve(train_ids.size());
  for (std::uint64_t id : train_ids) {
    tfidf.emplace(id, tfidf_vector(corpus.doc_by_id(id), idf));
  }

  model.hyper.lambda = cfg.lambda;
  model.hyper.beta = cfg.beta;

  const std::size_t k_bits = cfg.code_bits;
  const std::size_t batch = std::min(cfg.batch_size, train_ids.size());
  const std::size_t iters_per_epoch = (train_ids.size() + batch - 1) / batch;
  const bool use_noise = !supervised && cfg.code_noise > 0.0;

  AdamState adam(cfg.learning_rate);
  MlpEncoder enc_grads = model.encoder.zeros_like();
  SoftmaxDecoder dec_grads = model.decoder.zeros_like();
  LinearClassifier clf_grads =
      model.supervised() ? model.classifier.zeros_like() : LinearClassifier();

  const auto zero_grads = [&] {
    for (TensorRef& t : enc_grads.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
    for (TensorRef& t : dec_grads.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
    if (model.supervised()) {
      for (TensorRef& t : clf_grads.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
    }
  };
  const auto grad_tensors = [&] {
    std::vector<TensorRef> refs = enc_grads.tensors();
    for (TensorRef& t : dec_grads.tensors()) refs.push_back(std::move(t));
    if (model.supervised()) {
      for (TensorRef& t : clf_grads.tensors()) refs.push_back(std::move(t));
    }
    return refs;
  };

  std::unordered_set<std::uint64_t> touched;
  PshModel best_model;
  double best_val = -1.0;
  std::optional<std::size_t> best_epoch;

  detail::SideWork sides[2];

  // Fills one side's forward state; consumes the documented draw order.
  const auto forward_side = [&](detail::SideWork& s, std::uint64_t doc_id, Rng& rng,
                                double tau) {
    const Document& doc = corpus.doc_by_id(doc_id);
    s.x = &tfidf.at(doc_id);
    s.labels = doc.labels;
    s.psi = model.encoder.forward(*s.x, RunMode::train, &rng, &s.cache);
    rng.fill_uniform(s.u, k_bits);
    s.z = sample_bernoulli(s.psi, s.u);

    s.noise_sign.assign(k_bits, 1.0);
    BinaryCode z_dec = s.z;
    if (use_noise) {
      for (std::size_t k = 0; k < k_bits; ++k) {
        if (rng.uniform() < cfg.code_noise) {
          z_dec.flip_bit(k);
          s.noise_sign[k] = -1.0;
        }
      }
    }

    if (cfg.estimator.tag == EstimatorTag::gs) {
      s.gs = gs_relaxed_sample(s.psi, s.u, tau);
      s.code_vals = s.gs.relaxed;
      s.dec_vals.resize(k_bits);
      for (std::size_t k = 0; k < k_bits; ++k) {
        // affine noise: value -> 1 - value where the mask flips
        s.dec_vals[k] = s.noise_sign[k] > 0.0 ? s.code_vals[k] : 1.0 - s.code_vals[k];
      }
    } else {
      s.code_vals = s.z.to_doubles();
      s.dec_vals = z_dec.to_doubles();
    }
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const double alpha_e = supervised ? cfg.alpha.value(epoch) : 0.0;
    const double tau_e = cfg.gs_temperature.value(epoch);
    model.hyper.alpha = alpha_e;

    std::vector<std::uint64_t> perm_a = train_ids;
    std::vector<std::uint64_t> perm_b = train_ids;
    {
      Rng ra(mix_seed({cfg.seed, detail::kShuffleTag, epoch, 0}));
      Rng rb(mix_seed({cfg.seed, detail::kShuffleTag, epoch, 1}));
      shuffle(perm_a, ra);
      shuffle(perm_b, rb);
    }

    detail::StepMetrics metrics;

    for (std::size_t iter = 0; iter < iters_per_epoch; ++iter) {
      const std::size_t begin = iter * batch;
      const std::size_t end = std::min(train_ids.size(), begin + batch);
      const std::size_t pairs = end - begin;
      zero_grads();

      for (std::size_t j = begin; j < end; ++j) {
        const std::uint64_t ids[2] = {perm_a[j], perm_b[j]};
        for (int side = 0; side < 2; ++side) {
          Rng rng(mix_seed({cfg.seed, detail::kDocStreamTag, epoch, iter, j,
                            static_cast<std::uint64_t>(side)}));
          forward_side(sides[side], ids[side], rng, tau_e);
          if (cfg.record_touched_docs) touched.insert(ids[side]);
        }

        const double pair_sign =
            labels_intersect(sides[0].labels, sides[1].labels) ? 1.0 : -1.0;
        const bool use_pair = supervised && cfg.beta > 0.0;

        for (int side = 0; side < 2; ++side) {
          detail::SideWork& s = sides[side];
          const detail::SideWork& partner = sides[1 - side];

          // analytic KL gradient; never estimated
          const double kl_val = kl_bernoulli(s.psi, model.prior);
          std::vector<double> gpsi = kl_bernoulli_grad(s.psi, model.prior);
          for (double& g : gpsi) g *= cfg.lambda;

          if (cfg.estimator.tag == EstimatorTag::arm) {
            // score(z) bundles every z-dependent objective term (to be
            // maximized); the partner's code stays at its sampled value.
            const auto score = [&](const BinaryCode& c) {
              BinaryCode c_dec = c;
              if (use_noise) {
                for (std::size_t k = 0; k < k_bits; ++k) {
                  if (s.noise_sign[k] < 0.0) c_dec.flip_bit(k);
                }
              }
              double val = reconstruction_ll(model.decoder, c_dec, *s.x);
              if (supervised && alpha_e > 0.0) {
                val -= alpha_e * classifier_loss(model.classifier, c, s.labels[0]);
              }
              if (use_pair) {
                val -= cfg.beta * pair_sign * normalized_hamming(c, partner.z);
              }
              return val;
            };
            const std::vector<double> est = arm_gradient(score, s.psi, s.u);
            for (std::size_t k = 0; k < k_bits; ++k) gpsi[k] -= est[k];
          } else {
            // pathwise/surrogate gradient of the loss wrt the code values
            std::vector<double> grad_dec(k_bits, 0.0);
            std::vector<double> grad_code(k_bits, 0.0);
            metrics.recon += reconstruction_backward(model.decoder, s.dec_vals, *s.x, -1.0,
                                                     &dec_grads, grad_dec);
            for (std::size_t k = 0; k < k_bits; ++k) {
              grad_code[k] = grad_dec[k] * s.noise_sign[k];
            }
            if (supervised && alpha_e > 0.0) {
              metrics.clf += classifier_backward(model.classifier, s.code_vals, s.labels[0],
                                                 alpha_e, &clf_grads, grad_code);
            }
            if (use_pair) {
              for (std::size_t k = 0; k < k_bits; ++k) {
                grad_code[k] += cfg.beta * pair_sign *
                                (1.0 - 2.0 * partner.code_vals[k]) /
                                static_cast<double>(k_bits);
              }
            }
            if (cfg.estimator.tag == EstimatorTag::st) {
              const StPassThrough st = st_passthrough(s.psi, s.z);
              const std::vector<double> g = st.backward(grad_code);
              for (std::size_t k = 0; k < k_bits; ++k) gpsi[k] += g[k];
            } else {
              const std::vector<double> g = s.gs.backward(grad_code);
              for (std::size_t k = 0; k < k_bits; ++k) gpsi[k] += g[k];
            }
          }

          model.encoder.backward(s.cache, gpsi, enc_grads);
          metrics.kl += kl_val;
          ++metrics.docs;
        }

        // decoder/classifier gradients at the sampled codes (ARM only;
        // the surrogate branch accumulated them above)
        if (cfg.estimator.tag == EstimatorTag::arm) {
          for (int side = 0; side < 2; ++side) {
            detail::SideWork& s = sides[side];
            metrics.recon +=
                reconstruction_backward(model.decoder, s.dec_vals, *s.x, -1.0, &dec_grads);
            if (supervised && alpha_e > 0.0) {
              metrics.clf += classifier_backward(model.classifier, s.code_vals, s.labels[0],
                                                 alpha_e, &clf_grads);
            }
          }
        }
        if (use_pair) {
          metrics.pairwise +=
              pair_sign * relaxed_hamming(sides[0].code_vals, sides[1].code_vals);
        }
        ++metrics.pairs;
      }

      // mean over pairs; each pair carries both sides' terms
      const double inv_pairs = 1.0 / static_cast<double>(pairs);
      std::vector<TensorRef> grads = grad_tensors();
      for (TensorRef& t : grads) {
        for (double& g : t.data) g *= inv_pairs;
      }

      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (const TensorRef& t : grads) {
          for (double g : t.data) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          const double scale = cfg.grad_clip / norm;
          for (TensorRef& t : grads) {
            for (double& g : t.data) g *= scale;
          }
        }
      }

      adam.step(model.tensors(), grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const double n_docs = static_cast<double>(metrics.docs);
    rec.recon = metrics.recon / n_docs;
    rec.kl = metrics.kl / n_docs;
    rec.clf = supervised ? metrics.clf / n_docs : 0.0;
    rec.pairwise = metrics.pairs > 0 ? metrics.pairwise / static_cast<double>(metrics.pairs) : 0.0;
    rec.neg_elbo = -(rec.recon - cfg.lambda * rec.kl);
    if (!std::isfinite(rec.neg_elbo)) {
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
    }

    const bool val_due = cfg.val_eval_every > 0 &&
                         ((epoch + 1) % cfg.val_eval_every == 0 || epoch + 1 == cfg.epochs);
    if (val_due && corpus.count_in(Split::validation) > 0) {
      rec.val_p100 = evaluate_precision(model, corpus, idf, Split::train, Split::validation,
                                        cfg.precision_k);
      if (cfg.select_best_by_val && *rec.val_p100 > best_val) {
        best_val = *rec.val_p100;
        best_model = model;
        best_epoch = epoch;
      }
    }

    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    report.epochs.push_back(rec);
  }

  if (best_epoch) {
    model = std::move(best_model);
    report.best_epoch = best_epoch;
  }
  if (cfg.record_touched_docs) {
    report.touched_docs.assign(touched.begin(), touched.end());
    std::sort(report.touched_docs.begin(), report.touched_docs.end());
  }
  return report;
}

}  // namespace semhash
