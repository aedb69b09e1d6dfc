#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace riskminer {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define RISKMINER_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

RISKMINER_DEFINE_ERROR(InvalidExpression)
RISKMINER_DEFINE_ERROR(ArityError)
RISKMINER_DEFINE_ERROR(IoError)
RISKMINER_DEFINE_ERROR(SchemaError)
RISKMINER_DEFINE_ERROR(DataError)
RISKMINER_DEFINE_ERROR(ArgumentError)
RISKMINER_DEFINE_ERROR(EmptyOverlap)
RISKMINER_DEFINE_ERROR(DegenerateTarget)
RISKMINER_DEFINE_ERROR(EvaluationError)
RISKMINER_DEFINE_ERROR(EmptyPool)
RISKMINER_DEFINE_ERROR(TerminalState)
RISKMINER_DEFINE_ERROR(IllegalAction)
RISKMINER_DEFINE_ERROR(NonFiniteGradient)
RISKMINER_DEFINE_ERROR(InsufficientUniverse)
RISKMINER_DEFINE_ERROR(ConfigError)
RISKMINER_DEFINE_ERROR(CheckpointError)

#undef RISKMINER_DEFINE_ERROR

/// Malformed expression text. `position()` is the 0-based character offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error("ParseError", message + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace riskminer
