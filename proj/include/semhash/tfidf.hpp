#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "semhash/corpus.hpp"
#include "semhash/errors.hpp"

namespace semhash {

struct WeightedTerm {
  std::uint32_t term = 0;
  double weight = 0.0;
  bool operator==(const WeightedTerm&) const = default;
};

/// Sparse TF-IDF representation of one document. Support equals the source
/// document's support; weights can be zero when idf is zero.
struct TfidfVector {
  std::vector<WeightedTerm> terms;
};

/// idf(w) = ln(N_train / df(w)) with document frequencies counted over the
/// training split only; idf = 0 for terms unseen in training. Errors if the
/// training split is empty.
inline std::vector<double> compute_idf(const Corpus& corpus) {
  std::vector<std::size_t> df(corpus.vocab_size, 0);
  std::size_t n_train = 0;
  for (const Document& doc : corpus.documents) {
    if (corpus.split_of(doc.doc_id) != Split::train) continue;
    ++n_train;
    for (const TermCount& tc : doc.terms) ++df[tc.term];
  }
  if (n_train == 0) throw ValidationError("compute_idf: training split is empty");
  std::vector<double> idf(corpus.vocab_size, 0.0);
  for (std::size_t w = 0; w < corpus.vocab_size; ++w) {
    if (df[w] > 0) {
      idf[w] = std::log(static_cast<double>(n_train) / static_cast<double>(df[w]));
    }
  }
  return idf;
}

/// weight(w, d) = count(w, d) * idf(w). Support preserved.
inline TfidfVector tfidf_vector(const Document& doc, std::span<const double> idf) {
  TfidfVector v;
  v.terms.reserve(doc.terms.size());
  for (const TermCount& tc : doc.terms) {
    if (tc.term >= idf.size()) {
      throw ValidationError("tfidf_vector: term id out of range");
    }
    v.terms.push_back({tc.term, static_cast<double>(tc.count) * idf[tc.term]});
  }
  return v;
}

/// TF-IDF vectors for the selected split (or all documents when nullopt),
/// always using training-split document frequencies.
inline std::unordered_map<std::uint64_t, TfidfVector> compute_tfidf(
    const Corpus& corpus, std::optional<Split> split = std::nullopt) {
  const std::vector<double> idf = compute_idf(corpus);
  std::unordered_map<std::uint64_t, TfidfVector> out;
  for (const Document& doc : corpus.documents) {
    if (split && corpus.split_of(doc.doc_id) != *split) continue;
    out.emplace(doc.doc_id, tfidf_vector(doc, idf));
  }
  return out;
}

}  // namespace semhash
