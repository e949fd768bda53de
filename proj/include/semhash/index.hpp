#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "semhash/code.hpp"
#include "semhash/errors.hpp"
#include "semhash/io.hpp"
#include "semhash/parallel.hpp"

namespace semhash {

/// Immutable store of bit-packed K-bit codes with ids and label sets.
/// Codes live contiguously (words_per_code() 64-bit words each), so queries
/// are a linear XOR+popcount scan.
class CodeIndex {
 public:
  struct Entry {
    std::uint64_t doc_id = 0;
    BinaryCode code;
    std::vector<std::uint32_t> labels;  // sorted
  };

  CodeIndex() = default;

  static CodeIndex build(std::span<const Entry> entries, std::size_t code_bits = 0) {
    CodeIndex index;
    if (entries.empty()) {
      index.code_bits_ = code_bits;
      index.words_per_code_ = words_for_bits(code_bits);
      return index;
    }
    index.code_bits_ = entries.front().code.bits();
    if (code_bits != 0 && code_bits != index.code_bits_) {
      throw ShapeError("build_index: entries do not match requested code length");
    }
    index.words_per_code_ = words_for_bits(index.code_bits_);
    index.words_.reserve(entries.size() * index.words_per_code_);
    index.doc_ids_.reserve(entries.size());
    index.label_sets_.reserve(entries.size());
    index.id_to_pos_.reserve(entries.size());
    for (const Entry& e : entries) {
      if (e.code.bits() != index.code_bits_) {
        throw ShapeError("build_index: mixed code lengths");
      }
      if (!index.id_to_pos_.emplace(e.doc_id, index.doc_ids_.size()).second) {
        throw ValidationError("build_index: duplicate doc_id " + std::to_string(e.doc_id));
      }
      for (std::uint64_t w : e.code.words()) index.words_.push_back(w);
      index.doc_ids_.push_back(e.doc_id);
      std::vector<std::uint32_t> labels = e.labels;
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
      index.label_sets_.push_back(std::move(labels));
    }
    return index;
  }

  std::size_t size() const { return doc_ids_.size(); }
  std::size_t code_bits() const { return code_bits_; }
  std::size_t words_per_code() const { return words_per_code_; }

  std::uint64_t doc_id(std::size_t i) const { return doc_ids_[i]; }
  std::span<const std::uint32_t> labels(std::size_t i) const { return label_sets_[i]; }
  std::span<const std::uint64_t> code_words(std::size_t i) const {
    return {words_.data() + i * words_per_code_, words_per_code_};
  }
  BinaryCode code(std::size_t i) const {
    return BinaryCode::from_words(code_words(i), code_bits_);
  }

  std::optional<std::size_t> position_of(std::uint64_t doc_id) const {
    auto it = id_to_pos_.find(doc_id);
    if (it == id_to_pos_.end()) return std::nullopt;
    return it->second;
  }

  /// Binary layout, little-endian:
  ///   magic "SHCODES1", u32 K, u64 count,
  ///   count * words_per_code u64 packed code words,
  ///   count u64 doc ids,
  ///   per record: u32 label count + that many u32 labels.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write code file: " + path);
    out.write(kMagic, 8);
    detail::write_u32(out, static_cast<std::uint32_t>(code_bits_));
    detail::write_u64(out, doc_ids_.size());
    for (std::uint64_t w : words_) detail::write_u64(out, w);
    for (std::uint64_t id : doc_ids_) detail::write_u64(out, id);
    for (const auto& labels : label_sets_) {
      detail::write_u32(out, static_cast<std::uint32_t>(labels.size()));
      for (std::uint32_t l : labels) detail::write_u32(out, l);
    }
    if (!out) throw IoError("short write to code file: " + path);
  }

  static CodeIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open code file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string_view(magic, 8) != kMagic) {
      throw IoError("not a code file (bad magic): " + path);
    }
    CodeIndex index;
    index.code_bits_ = detail::read_u32(in);
    index.words_per_code_ = words_for_bits(index.code_bits_);
    const std::uint64_t count = detail::read_u64(in);
    index.words_.resize(count * index.words_per_code_);
    for (std::uint64_t& w : index.words_) w = detail::read_u64(in);
    index.doc_ids_.resize(count);
    for (std::uint64_t& id : index.doc_ids_) id = detail::read_u64(in);
    index.label_sets_.resize(count);
    for (auto& labels : index.label_sets_) {
      labels.resize(detail::read_u32(in));
      for (std::uint32_t& l : labels) l = detail::read_u32(in);
    }
    index.id_to_pos_.reserve(count);
    for (std::size_t i = 0; i < index.doc_ids_.size(); ++i) {
      if (!index.id_to_pos_.emplace(index.doc_ids_[i], i).second) {
        throw ValidationError("code file contains duplicate doc_id: " + path);
      }
    }
    return index;
  }

  /// Debug export: `<doc_id> <hex code> <labels,csv>` per line.
  void export_text(std::ostream& out) const {
    for (std::size_t i = 0; i < size(); ++i) {
      out << doc_ids_[i] << ' ' << code(i).to_hex() << ' ';
      for (std::size_t j = 0; j < label_sets_[i].size(); ++j) {
        if (j > 0) out << ',';
        out << label_sets_[i][j];
      }
      out << '\n';
    }
  }

  bool operator==(const CodeIndex&) const = default;

 private:
  static constexpr const char kMagic[9] = "SHCODES1";

  std::size_t code_bits_ = 0;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::uint64_t> doc_ids_;
  std::vector<std::vector<std::uint32_t>> label_sets_;
  std::unordered_map<std::uint64_t, std::size_t> id_to_pos_;
};

struct Neighbor {
  std::uint64_t doc_id = 0;
  std::uint32_t distance = 0;
};

struct RetrievalResult {
  std::optional<std::uint64_t> query_id;
  std::vector<Neighbor> neighbors;  // distances nondecreasing
};

/// Exact k nearest codes by Hamming distance. Ties break by ascending
/// doc_id; k is clipped to the index size; `exclude_doc_id` (usually the
/// query's own id) never appears in the result.
inline RetrievalResult hamming_topk(const CodeIndex& index, const BinaryCode& query,
                                    std::size_t k,
                                    std::optional<std::uint64_t> exclude_doc_id = std::nullopt) {
  if (query.bits() != index.code_bits()) {
    throw ShapeError("hamming_topk: query length != index code length");
  }
  RetrievalResult result;
  result.query_id = exclude_doc_id;
  if (k == 0 || index.size() == 0) return result;

  const std::size_t words = index.words_per_code();
  const std::span<const std::uint64_t> q = query.words();

  // bounded max-heap on (distance, doc_id)
  using Key = std::pair<std::uint32_t, std::uint64_t>;
  std::vector<Key> heap;
  heap.reserve(std::min(k, index.size()));

  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::uint64_t id = index.doc_id(i);
    if (exclude_doc_id && id == *exclude_doc_id) continue;
    const std::uint64_t* cw = index.code_words(i).data();
    std::uint32_t dist = 0;
    for (std::size_t w = 0; w < words; ++w) {
      dist += static_cast<std::uint32_t>(std::popcount(q[w] ^ cw[w]));
    }
    const Key key{dist, id};
    if (heap.size() < k) {
      heap.push_back(key);
      std::push_heap(heap.begin(), heap.end());
    } else if (key < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = key;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  std::sort_heap(heap.begin(), heap.end());
  result.neighbors.reserve(heap.size());
  for (const Key& key : heap) result.neighbors.push_back({key.second, key.first});
  return result;
}

struct QueryDoc {
  BinaryCode code;
  std::vector<std::uint32_t> labels;  // sorted
  std::optional<std::uint64_t> exclude_doc_id;  // self-exclusion when pool may contain the query
};

namespace detail {

inline bool sorted_intersect(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
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

}  // namespace detail

/// Fraction of the k retrieved documents sharing at least one label with
/// the query, for each query. k is clipped to what the pool can return.
inline std::vector<double> per_query_precision(const CodeIndex& index,
                                               std::span<const QueryDoc> queries,
                                               std::size_t k = 100) {
  if (queries.empty()) throw ValidationError("precision_at_k: empty query set");
  std::vector<double> precision(queries.size(), 0.0);
  parallel_for(queries.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t qi = begin; qi < end; ++qi) {
      const QueryDoc& q = queries[qi];
      const RetrievalResult r = hamming_topk(index, q.code, k, q.exclude_doc_id);
      if (r.neighbors.empty()) continue;
      std::size_t relevant = 0;
      for (const Neighbor& n : r.neighbors) {
        const auto pos = index.position_of(n.doc_id);
        if (pos && detail::sorted_intersect(index.labels(*pos), q.labels)) ++relevant;
      }
      precision[qi] = static_cast<double>(relevant) / static_cast<double>(r.neighbors.size());
    }
  });
  return precision;
}

inline double precision_at_k(const CodeIndex& index, std::span<const QueryDoc> queries,
                             std::size_t k = 100) {
  const std::vector<double> per_query = per_query_precision(index, queries, k);
  double sum = 0.0;
  for (double p : per_query) sum += p;
  return sum / static_cast<double>(per_query.size());
}

}  // namespace semhash
