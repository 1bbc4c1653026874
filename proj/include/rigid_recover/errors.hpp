#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rigid {

enum class ErrorCode {
  InvalidArgument,
  CoincidentPoint,
  WrongKind,
  DegenerateConfiguration,
  LabelMismatch,
  InvalidInstance,
  NegativeRadicand,
  NoSolution,
  DegenerateImages,
  IllConditioned,
  NonPositiveLengths,
  InconsistentLengths,
  MirrorMismatch,
  OutOfArc,
  AngleMismatch,
  NoConvergence,
  FamilyBreak,
  GuardExhausted,
  ParseError,
  SchemaError,
  InvariantError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt,
        std::optional<double> value = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        index_(index),
        value_(value) {}

  ErrorCode code() const noexcept { return code_; }
  // Offending position (batch index, frame index) when one applies.
  std::optional<std::size_t> index() const noexcept { return index_; }
  // Numeric detail, e.g. the best residual reached before NoConvergence.
  std::optional<double> value() const noexcept { return value_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
  std::optional<double> value_;
};

}  // namespace rigid
