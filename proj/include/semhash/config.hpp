#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "semhash/corpus.hpp"
#include "semhash/errors.hpp"
#include "semhash/trainer.hpp"

namespace semhash {

/// Everything a training run needs: the TrainConfig plus file wiring.
/// Populated from a flat key-value config file; individual keys can be
/// overridden afterwards (precedence: overrides > file > defaults).
struct RunSpec {
  std::string corpus_path;
  std::string vocab_path;    // optional sidecar
  std::string splits_path;   // optional; otherwise fractions+seed assign splits
  std::string output_dir = "run";
  SplitFractions fractions{};
  TrainConfig train{};
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  if (!parse_u64(value, v)) {
    throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" +
                      value + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are rejected so typos
/// cannot silently fall back to defaults.
inline void apply_config_key(RunSpec& spec, const std::string& key, const std::string& value) {
  TrainConfig& t = spec.train;
  if (key == "corpus") {
    spec.corpus_path = value;
  } else if (key == "vocab") {
    spec.vocab_path = value;
  } else if (key == "splits") {
    spec.splits_path = value;
  } else if (key == "output_dir") {
    spec.output_dir = value;
  } else if (key == "train_frac") {
    spec.fractions.train = detail::parse_double(key, value);
  } else if (key == "val_frac") {
    spec.fractions.validation = detail::parse_double(key, value);
  } else if (key == "test_frac") {
    spec.fractions.test = detail::parse_double(key, value);
  } else if (key == "mode") {
    if (value == "supervised") {
      t.mode = TrainMode::supervised;
    } else if (value == "unsupervised") {
      t.mode = TrainMode::unsupervised;
    } else {
      throw ConfigError("config key 'mode': expected supervised|unsupervised, got '" + value +
                        "'");
    }
  } else if (key == "estimator") {
    if (value == "arm") {
      t.estimator.tag = EstimatorTag::arm;
    } else if (value == "st") {
      t.estimator.tag = EstimatorTag::st;
    } else if (value == "gs") {
      t.estimator.tag = EstimatorTag::gs;
    } else {
      throw ConfigError("config key 'estimator': expected arm|st|gs, got '" + value + "'");
    }
  } else if (key == "epochs") {
    t.epochs = detail::parse_uint(key, value);
  } else if (key == "batch_size") {
    t.batch_size = detail::parse_uint(key, value);
  } else if (key == "learning_rate") {
    t.learning_rate = detail::parse_double(key, value);
  } else if (key == "lambda") {
    t.lambda = detail::parse_double(key, value);
  } else if (key == "beta") {
    t.beta = detail::parse_double(key, value);
  } else if (key == "alpha_start") {
    t.alpha.start = detail::parse_double(key, value);
  } else if (key == "alpha_end") {
    t.alpha.end = detail::parse_double(key, value);
  } else if (key == "alpha_ramp_epochs") {
    t.alpha.ramp_epochs = detail::parse_uint(key, value);
  } else if (key == "gs_temp_init") {
    t.gs_temperature.init = detail::parse_double(key, value);
  } else if (key == "gs_temp_decay") {
    t.gs_temperature.decay = detail::parse_double(key, value);
  } else if (key == "gs_temp_floor") {
    t.gs_temperature.floor = detail::parse_double(key, value);
  } else if (key == "code_noise") {
    t.code_noise = detail::parse_double(key, value);
  } else if (key == "dropout") {
    t.dropout = detail::parse_double(key, value);
  } else if (key == "hidden1") {
    t.hidden1 = detail::parse_uint(key, value);
  } else if (key == "hidden2") {
    t.hidden2 = detail::parse_uint(key, value);
  } else if (key == "bits") {
    t.code_bits = detail::parse_uint(key, value);
  } else if (key == "prior") {
    t.prior = detail::parse_double(key, value);
  } else if (key == "grad_clip") {
    t.grad_clip = detail::parse_double(key, value);
  } else if (key == "val_eval_every") {
    t.val_eval_every = detail::parse_uint(key, value);
  } else if (key == "select_best_by_val") {
    t.select_best_by_val = detail::parse_bool(key, value);
  } else if (key == "precision_k") {
    t.precision_k = detail::parse_uint(key, value);
  } else if (key == "seed") {
    t.seed = detail::parse_uint(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Flat key-value file: `key = value` per line, `#` comments.
inline RunSpec load_run_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ": line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ": line " + std::to_string(line_no) + ": empty key");
    }
    apply_config_key(spec, key, value);
  }
  return spec;
}

/// Resolved numeric snapshot, written into checkpoints and manifests.
inline std::map<std::string, double> hyper_snapshot(const TrainConfig& t) {
  return {
      {"epochs", static_cast<double>(t.epochs)},
      {"batch_size", static_cast<double>(t.batch_size)},
      {"learning_rate", t.learning_rate},
      {"lambda", t.lambda},
      {"beta", t.beta},
      {"alpha_start", t.alpha.start},
      {"alpha_end", t.alpha.end},
      {"alpha_ramp_epochs", static_cast<double>(t.alpha.ramp_epochs)},
      {"alpha", t.alpha.end},
      {"gs_temp_init", t.gs_temperature.init},
      {"gs_temp_decay", t.gs_temperature.decay},
      {"gs_temp_floor", t.gs_temperature.floor},
      {"code_noise", t.code_noise},
      {"dropout", t.dropout},
      {"hidden1", static_cast<double>(t.hidden1)},
      {"hidden2", static_cast<double>(t.hidden2)},
      {"bits", static_cast<double>(t.code_bits)},
      {"prior", t.prior},
      {"grad_clip", t.grad_clip},
      {"seed", static_cast<double>(t.seed)},
  };
}

}  // namespace semhash
