#ifndef HBGNN_ERROR_HPP_
#define HBGNN_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace hbgnn {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operand shapes are incompatible (matmul inner extents, elementwise, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input is outside an operation's domain (empty softmax, fan_in 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An API contract was violated (non-scalar backward root, re-running a tape).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A structure could not be built (duplicate node name, empty vocabulary).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is out of range (optimizer betas, layer counts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A token or index does not resolve in a vocabulary or embedding table.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// A data file is malformed; the message carries the file and line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint has the wrong version, is truncated, or fails its checksum.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace hbgnn

#endif  // HBGNN_ERROR_HPP_
