#include "crygcn/error.hpp"

namespace crygcn {

std::string_view error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::InsufficientClassSize: return "InsufficientClassSize";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::DegenerateGraph: return "DegenerateGraph";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::InvalidSplit: return "InvalidSplit";
    case ErrorKind::DivergenceError: return "DivergenceError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::Internal: return "InternalError";
  }
  return "InternalError";
}

}  // namespace crygcn
