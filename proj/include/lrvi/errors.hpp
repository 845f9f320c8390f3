#pragma once

#include <stdexcept>
#include <string>

namespace lrvi {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (matrix sizes, channel counts, sequence counts).
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A time index or window falls outside the valid range of a sequence.
class IndexError : public Error {
public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Non-finite values, divergence, failed decompositions.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Malformed or unreadable input file.
class IoError : public Error {
public:
  using Error::Error;
};

namespace detail {

template <typename E = ConfigError>
inline void require(bool condition, const std::string& message) {
  if (!condition) throw E(message);
}

} // namespace detail
} // namespace lrvi
