#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "semhash/errors.hpp"
#include "semhash/rng.hpp"

namespace semhash {

/// Bijection token <-> dense id in [0, |V|).
struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, std::uint32_t> token_to_id;

  std::size_t size() const { return id_to_token.size(); }

  std::optional<std::uint32_t> find(const std::string& token) const {
    auto it = token_to_id.find(token);
    if (it == token_to_id.end()) return std::nullopt;
    return it->second;
  }

  /// Sidecar format: one `<term_id>\t<token>` per line. Ids must be dense.
  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::pair<std::uint32_t, std::string>> entries;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw ParseError(path + ": line " + std::to_string(line_no) + ": expected <id>\\t<token>");
      }
      std::uint32_t id = 0;
      try {
        id = static_cast<std::uint32_t>(std::stoul(line.substr(0, tab)));
      } catch (const std::exception&) {
        throw ParseError(path + ": line " + std::to_string(line_no) + ": bad term id");
      }
      entries.emplace_back(id, line.substr(tab + 1));
    }
    vocab.id_to_token.resize(entries.size());
    for (auto& [id, token] : entries) {
      if (id >= entries.size()) {
        throw ValidationError(path + ": term ids are not dense in [0, |V|)");
      }
      vocab.id_to_token[id] = std::move(token);
    }
    for (std::uint32_t id = 0; id < vocab.id_to_token.size(); ++id) {
      auto [it, inserted] = vocab.token_to_id.emplace(vocab.id_to_token[id], id);
      if (!inserted) {
        throw ValidationError(path + ": duplicate token '" + vocab.id_to_token[id] + "'");
      }
    }
    return vocab;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    for (std::uint32_t id = 0; id < id_to_token.size(); ++id) {
      out << id << '\t' << id_to_token[id] << '\n';
    }
  }
};

struct TermCount {
  std::uint32_t term = 0;
  std::uint32_t count = 0;
  bool operator==(const TermCount&) const = default;
};

/// Sparse bag-of-words document. Term ids strictly increasing, counts >= 1.
struct Document {
  std::uint64_t doc_id = 0;
  std::vector<TermCount> terms;
  std::vector<std::uint32_t> labels;  // sorted, unique; empty when unlabeled

  bool operator==(const Document&) const = default;
};

enum class Split { train, validation, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline std::optional<Split> split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  return std::nullopt;
}

/// Immutable after load; safe for concurrent read access.
struct Corpus {
  std::size_t vocab_size = 0;
  std::optional<Vocabulary> vocabulary;  // present when a sidecar was loaded
  std::vector<Document> documents;
  std::map<std::uint32_t, std::string> labels;          // label id -> display name
  std::unordered_map<std::uint64_t, Split> splits;      // every doc in exactly one split
  std::unordered_map<std::uint64_t, std::size_t> id_to_index;

  const Document& doc_by_id(std::uint64_t doc_id) const {
    auto it = id_to_index.find(doc_id);
    if (it == id_to_index.end()) {
      throw ValidationError("unknown doc_id: " + std::to_string(doc_id));
    }
    return documents[it->second];
  }

  Split split_of(std::uint64_t doc_id) const {
    auto it = splits.find(doc_id);
    if (it == splits.end()) {
      throw ValidationError("doc_id has no split assignment: " + std::to_string(doc_id));
    }
    return it->second;
  }

  std::vector<std::uint64_t> doc_ids_in(Split split) const {
    std::vector<std::uint64_t> ids;
    for (const Document& d : documents) {
      if (split_of(d.doc_id) == split) ids.push_back(d.doc_id);
    }
    return ids;
  }

  std::size_t count_in(Split split) const {
    std::size_t n = 0;
    for (const Document& d : documents) {
      if (split_of(d.doc_id) == split) ++n;
    }
    return n;
  }
};

namespace detail {

inline bool parse_u64(std::string_view s, std::uint64_t& out) {
  if (s.empty()) return false;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

/// Loads the bow-text format, one document per line:
///   `<doc_id> [lbl=<int>]* <term_id>:<count> [<term_id>:<count>]*`
/// `#`-prefixed lines are comments. Duplicate term ids within a line are
/// summed. Documents with zero terms are rejected: the reconstruction term
/// is vacuous for them. When `vocab_size` is zero and no sidecar is given,
/// the vocabulary size is inferred as max term id + 1.
inline Corpus load_corpus(const std::string& bow_path,
                          std::optional<Vocabulary> vocabulary = std::nullopt,
                          std::size_t vocab_size = 0) {
  std::ifstream in(bow_path);
  if (!in) throw IoError("cannot open corpus file: " + bow_path);

  Corpus corpus;
  if (vocabulary) {
    vocab_size = vocabulary->size();
    corpus.vocabulary = std::move(vocabulary);
  }

  std::string line;
  std::size_t line_no = 0;
  std::uint32_t max_term = 0;
  bool any_term = false;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(bow_path + ": line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;

    std::istringstream fields(line);
    std::string field;
    if (!(fields >> field)) continue;  // whitespace-only line

    Document doc;
    if (!detail::parse_u64(field, doc.doc_id)) {
      throw fail("bad doc_id '" + field + "'");
    }
    if (corpus.id_to_index.count(doc.doc_id)) {
      throw ValidationError(bow_path + ": line " + std::to_string(line_no) +
                            ": duplicate doc_id " + std::to_string(doc.doc_id));
    }

    while (fields >> field) {
      if (field.rfind("lbl=", 0) == 0) {
        std::uint64_t lbl = 0;
        if (!detail::parse_u64(std::string_view(field).substr(4), lbl)) {
          throw fail("bad label '" + field + "'");
        }
        doc.labels.push_back(static_cast<std::uint32_t>(lbl));
        continue;
      }
      const auto colon = field.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == field.size()) {
        throw fail("expected <term_id>:<count>, got '" + field + "'");
      }
      std::uint64_t term = 0, count = 0;
      if (!detail::parse_u64(std::string_view(field).substr(0, colon), term) ||
          !detail::parse_u64(std::string_view(field).substr(colon + 1), count)) {
        throw fail("expected <term_id>:<count>, got '" + field + "'");
      }
      if (count == 0) {
        throw ValidationError(bow_path + ": line " + std::to_string(line_no) +
                              ": zero count for term " + std::to_string(term));
      }
      if (vocab_size > 0 && term >= vocab_size) {
        throw ValidationError(bow_path + ": line " + std::to_string(line_no) +
                              ": term id " + std::to_string(term) +
                              " out of range for |V|=" + std::to_string(vocab_size));
      }
      doc.terms.push_back({static_cast<std::uint32_t>(term), static_cast<std::uint32_t>(count)});
      max_term = std::max(max_term, static_cast<std::uint32_t>(term));
      any_term = true;
    }

    if (doc.terms.empty()) {
      throw ValidationError(bow_path + ": line " + std::to_string(line_no) +
                            ": document " + std::to_string(doc.doc_id) + " has no terms");
    }

    // Merge duplicate term ids; counts sum.
    std::sort(doc.terms.begin(), doc.terms.end(),
              [](const TermCount& a, const TermCount& b) { return a.term < b.term; });
    std::vector<TermCount> merged;
    merged.reserve(doc.terms.size());
    for (const TermCount& tc : doc.terms) {
      if (!merged.empty() && merged.back().term == tc.term) {
        merged.back().count += tc.count;
      } else {
        merged.push_back(tc);
      }
    }
    doc.terms = std::move(merged);

    std::sort(doc.labels.begin(), doc.labels.end());
    doc.labels.erase(std::unique(doc.labels.begin(), doc.labels.end()), doc.labels.end());
    for (std::uint32_t lbl : doc.labels) {
      corpus.labels.emplace(lbl, std::to_string(lbl));
    }

    corpus.id_to_index.emplace(doc.doc_id, corpus.documents.size());
    corpus.splits.emplace(doc.doc_id, Split::train);  // default until split_corpus
    corpus.documents.push_back(std::move(doc));
  }

  corpus.vocab_size = vocab_size > 0 ? vocab_size : (any_term ? max_term + 1 : 0);
  return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& bow_path) {
  std::ofstream out(bow_path);
  if (!out) throw IoError("cannot write corpus file: " + bow_path);
  for (const Document& doc : corpus.documents) {
    out << doc.doc_id;
    for (std::uint32_t lbl : doc.labels) out << " lbl=" << lbl;
    for (const TermCount& tc : doc.terms) out << ' ' << tc.term << ':' << tc.count;
    out << '\n';
  }
}

/// Splits sidecar: `<doc_id>\t<train|validation|test>` per line.
inline void save_splits(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write splits file: " + path);
  for (const Document& doc : corpus.documents) {
    out << doc.doc_id << '\t' << split_name(corpus.split_of(doc.doc_id)) << '\n';
  }
}

inline void load_splits(Corpus& corpus, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open splits file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    std::uint64_t doc_id = 0;
    std::optional<Split> split;
    if (tab != std::string::npos && detail::parse_u64(line.substr(0, tab), doc_id)) {
      split = split_from_name(std::string_view(line).substr(tab + 1));
    }
    if (!split) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected <doc_id>\\t<train|validation|test>");
    }
    if (!corpus.id_to_index.count(doc_id)) {
      throw ValidationError(path + ": line " + std::to_string(line_no) +
                            ": unknown doc_id " + std::to_string(doc_id));
    }
    corpus.splits[doc_id] = *split;
  }
}

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Assigns every document to exactly one split. Deterministic given the
/// seed; split sizes land within one document of the exact fractions
/// (largest-remainder rounding).
inline void split_corpus(Corpus& corpus, const SplitFractions& fractions, std::uint64_t seed) {
  const double parts[3] = {fractions.train, fractions.validation, fractions.test};
  double sum = 0.0;
  std::size_t positive = 0;
  for (double p : parts) {
    if (p < 0.0) throw ConfigError("split fractions must be nonnegative");
    if (p > 0.0) ++positive;
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const std::size_t n = corpus.documents.size();
  if (n < positive) throw ConfigError("fewer documents than splits");

  std::size_t sizes[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = parts[s] * static_cast<double>(n);
    sizes[s] = static_cast<std::size_t>(exact);
    remainders[s] = exact - static_cast<double>(sizes[s]);
    assigned += sizes[s];
  }
  while (assigned < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s) {
      if (remainders[s] > remainders[best]) best = s;
    }
    ++sizes[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  std::vector<std::uint64_t> ids;
  ids.reserve(n);
  for (const Document& d : corpus.documents) ids.push_back(d.doc_id);
  Rng rng(mix_seed({seed, 0x51D17C0A9B5ULL}));
  shuffle(ids, rng);

  std::size_t pos = 0;
  const Split order[3] = {Split::train, Split::validation, Split::test};
  for (int s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < sizes[s]; ++i) {
      corpus.splits[ids[pos++]] = order[s];
    }
  }
}

/// FNV-1a 64 over raw file bytes; used for run manifests.
inline std::uint64_t file_checksum_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for checksum: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

}  // namespace semhash
