#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crygcn {

enum class ErrorKind {
  ParseError,
  EmptyInput,
  DegenerateLabels,
  InsufficientClassSize,
  InvalidConfig,
  DegenerateGeometry,
  DegenerateGraph,
  ShapeError,
  EmptyMask,
  EmptyEvaluation,
  InvalidSplit,
  DivergenceError,
  IoError,
  Internal,
};

std::string_view error_kind_name(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so that
/// the C layer can map it onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace crygcn
