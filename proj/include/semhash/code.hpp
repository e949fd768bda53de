#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semhash/errors.hpp"

namespace semhash {

inline constexpr std::size_t words_for_bits(std::size_t bits) {
  return (bits + 63) / 64;
}

/// K-bit hashing code packed into 64-bit words. Bit k lives at word k/64,
/// position k%64. Padding bits above K are always zero, so XOR+popcount over
/// whole words is a valid Hamming distance.
class BinaryCode {
 public:
  BinaryCode() = default;
  explicit BinaryCode(std::size_t bits) : bits_(bits), words_(words_for_bits(bits), 0) {}

  static BinaryCode from_bits(std::span<const std::uint8_t> bits) {
    BinaryCode c(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) c.set_bit(i, true);
    }
    return c;
  }

  static BinaryCode from_words(std::span<const std::uint64_t> words, std::size_t bits) {
    if (words.size() != words_for_bits(bits)) {
      throw ShapeError("BinaryCode::from_words: word count does not match bit count");
    }
    BinaryCode c(bits);
    for (std::size_t i = 0; i < words.size(); ++i) c.words_[i] = words[i];
    c.mask_padding();
    return c;
  }

  std::size_t bits() const { return bits_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool bit(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1ULL;
  }

  void set_bit(std::size_t i, bool v) {
    const std::uint64_t mask = 1ULL << (i & 63);
    if (v) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }

  void flip_bit(std::size_t i) { words_[i >> 6] ^= 1ULL << (i & 63); }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  std::size_t hamming_distance(const BinaryCode& other) const {
    if (other.bits_ != bits_) {
      throw ShapeError("hamming_distance: code lengths differ");
    }
    std::size_t d = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      d += static_cast<std::size_t>(std::popcount(words_[i] ^ other.words_[i]));
    }
    return d;
  }

  /// Dense {0,1} doubles, for feeding codes into dense layers.
  std::vector<double> to_doubles() const {
    std::vector<double> v(bits_);
    for (std::size_t i = 0; i < bits_; ++i) v[i] = bit(i) ? 1.0 : 0.0;
    return v;
  }

  /// Hex string over ceil(K/4) digits, most significant nibble first
  /// (bit K-1 is the top bit of the first digit).
  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    const std::size_t ndigits = (bits_ + 3) / 4;
    std::string out(ndigits, '0');
    for (std::size_t d = 0; d < ndigits; ++d) {
      unsigned nibble = 0;
      for (unsigned b = 0; b < 4; ++b) {
        const std::size_t idx = 4 * (ndigits - 1 - d) + b;
        if (idx < bits_ && bit(idx)) nibble |= 1u << b;
      }
      out[d] = digits[nibble];
    }
    return out;
  }

  static BinaryCode from_hex(std::string_view hex, std::size_t bits) {
    if (hex.size() != (bits + 3) / 4) {
      throw ParseError("BinaryCode::from_hex: digit count does not match bit count");
    }
    BinaryCode c(bits);
    const std::size_t ndigits = hex.size();
    for (std::size_t d = 0; d < ndigits; ++d) {
      const char ch = hex[d];
      unsigned nibble;
      if (ch >= '0' && ch <= '9') {
        nibble = static_cast<unsigned>(ch - '0');
      } else if (ch >= 'a' && ch <= 'f') {
        nibble = static_cast<unsigned>(ch - 'a' + 10);
      } else if (ch >= 'A' && ch <= 'F') {
        nibble = static_cast<unsigned>(ch - 'A' + 10);
      } else {
        throw ParseError("BinaryCode::from_hex: invalid hex digit");
      }
      for (unsigned b = 0; b < 4; ++b) {
        const std::size_t idx = 4 * (ndigits - 1 - d) + b;
        if (nibble & (1u << b)) {
          if (idx >= bits) {
            throw ParseError("BinaryCode::from_hex: set bit beyond code length");
          }
          c.set_bit(idx, true);
        }
      }
    }
    return c;
  }

  bool operator==(const BinaryCode& other) const = default;

 private:
  void mask_padding() {
    const std::size_t rem = bits_ & 63;
    if (rem != 0 && !words_.empty()) {
      words_.back() &= (~0ULL) >> (64 - rem);
    }
  }

  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace semhash
