#pragma once

#include <stdexcept>
#include <string>

namespace diswm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible or invalid tensor shapes (broadcast, matmul, axes).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation evaluated outside its mathematical domain (log of 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or incompatible serialized file.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite during training.
class NumericAbort : public Error {
 public:
  using Error::Error;
};

}  // namespace diswm
