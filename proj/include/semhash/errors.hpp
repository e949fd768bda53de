#pragma once

#include <stdexcept>
#include <string>

namespace semhash {

/// Malformed input file contents (message names the offending line).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally valid input that violates a data invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or misuse of a public interface.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimension disagreement.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value encountered during numerical work.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// I/O failure or corrupt binary artifact.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semhash
