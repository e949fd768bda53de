#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "semhash/errors.hpp"
#include "semhash/estimators.hpp"
#include "semhash/io.hpp"
#include "semhash/objective.hpp"
#include "semhash/trainer.hpp"

namespace semhash {

/// A trained model plus everything needed to encode new documents:
/// the training-split idf table and the resolved hyperparameters.
struct Checkpoint {
  PshModel model;
  std::vector<double> idf;  // length |V|
  TrainMode mode = TrainMode::unsupervised;
  EstimatorKind estimator{};
  std::map<std::string, double> hyper;  // resolved numeric config snapshot
};

namespace detail {
inline constexpr char kCheckpointMagic[9] = "SEMHASH1";
}

/// Binary layout, little-endian:
///   magic, u32 version,
///   u32 |V|, u32 hidden1, u32 hidden2, u32 K, u32 C (0 = no classifier),
///   u8 mode, u8 estimator tag, f64 gs temperature,
///   hyper block: u32 count, then (string key, f64 value) pairs,
///   prior:      K f64,
///   idf:        |V| f64,
///   tensors:    u32 count, then (string name, u64 numel, numel f64) each.
/// Round-trips are bit-exact: doubles are stored as raw IEEE-754 words.
inline void save_checkpoint(Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(detail::kCheckpointMagic, 8);
  detail::write_u32(out, 1);

  PshModel& m = ckpt.model;
  detail::write_u32(out, static_cast<std::uint32_t>(m.encoder.input_dim()));
  detail::write_u32(out, static_cast<std::uint32_t>(m.encoder.hidden1()));
  detail::write_u32(out, static_cast<std::uint32_t>(m.encoder.hidden2()));
  detail::write_u32(out, static_cast<std::uint32_t>(m.hyper.code_bits));
  detail::write_u32(out, static_cast<std::uint32_t>(m.classifier.num_classes()));
  out.put(ckpt.mode == TrainMode::supervised ? 1 : 0);
  out.put(static_cast<char>(ckpt.estimator.tag));
  detail::write_f64(out, ckpt.estimator.gs_temperature);

  detail::write_u32(out, static_cast<std::uint32_t>(ckpt.hyper.size()));
  for (const auto& [key, value] : ckpt.hyper) {
    detail::write_string(out, key);
    detail::write_f64(out, value);
  }

  if (m.prior.size() != m.hyper.code_bits) throw ShapeError("checkpoint: bad prior length");
  for (double g : m.prior) detail::write_f64(out, g);
  if (ckpt.idf.size() != m.encoder.input_dim()) throw ShapeError("checkpoint: bad idf length");
  for (double v : ckpt.idf) detail::write_f64(out, v);

  std::vector<TensorRef> tensors = m.tensors();
  detail::write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const TensorRef& t : tensors) {
    detail::write_string(out, t.name);
    detail::write_u64(out, t.data.size());
    for (double v : t.data) detail::write_f64(out, v);
  }
  if (!out) throw IoError("short write to checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 8) != detail::kCheckpointMagic) {
    throw IoError("not a checkpoint file (bad magic): " + path);
  }
  const std::uint32_t version = detail::read_u32(in);
  if (version != 1) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }

  const std::uint32_t vocab = detail::read_u32(in);
  const std::uint32_t h1 = detail::read_u32(in);
  const std::uint32_t h2 = detail::read_u32(in);
  const std::uint32_t bits = detail::read_u32(in);
  const std::uint32_t classes = detail::read_u32(in);

  Checkpoint ckpt;
  ckpt.mode = in.get() == 1 ? TrainMode::supervised : TrainMode::unsupervised;
  const int tag = in.get();
  if (tag < 0 || tag > 2) throw IoError("checkpoint: bad estimator tag");
  ckpt.estimator.tag = static_cast<EstimatorTag>(tag);
  ckpt.estimator.gs_temperature = detail::read_f64(in);

  const std::uint32_t nhyper = detail::read_u32(in);
  for (std::uint32_t i = 0; i < nhyper; ++i) {
    const std::string key = detail::read_string(in);
    ckpt.hyper[key] = detail::read_f64(in);
  }

  const double dropout = ckpt.hyper.count("dropout") ? ckpt.hyper.at("dropout") : 0.0;
  PshModel& m = ckpt.model;
  m.encoder = MlpEncoder(vocab, h1, h2, bits, dropout);
  m.decoder = SoftmaxDecoder(bits, vocab);
  if (classes > 0) m.classifier = LinearClassifier(bits, classes);
  m.hyper.code_bits = bits;
  if (ckpt.hyper.count("lambda")) m.hyper.lambda = ckpt.hyper.at("lambda");
  if (ckpt.hyper.count("alpha")) m.hyper.alpha = ckpt.hyper.at("alpha");
  if (ckpt.hyper.count("beta")) m.hyper.beta = ckpt.hyper.at("beta");

  m.prior.resize(bits);
  for (double& g : m.prior) g = detail::read_f64(in);
  ckpt.idf.resize(vocab);
  for (double& v : ckpt.idf) v = detail::read_f64(in);

  const std::uint32_t ntensors = detail::read_u32(in);
  std::vector<TensorRef> tensors = m.tensors();
  if (ntensors != tensors.size()) {
    throw IoError("checkpoint: tensor count mismatch (" + std::to_string(ntensors) + " vs " +
                  std::to_string(tensors.size()) + ")");
  }
  for (TensorRef& t : tensors) {
    const std::string name = detail::read_string(in);
    const std::uint64_t numel = detail::read_u64(in);
    if (name != t.name || numel != t.data.size()) {
      throw IoError("checkpoint: tensor layout mismatch at " + name);
    }
    for (double& v : t.data) v = detail::read_f64(in);
  }
  m.validate();
  return ckpt;
}

}  // namespace semhash
