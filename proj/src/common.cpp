#include "walkdiff/common.hpp"

namespace walkdiff {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::QuadratureDivergence: return "QuadratureDivergence";
    case ErrorCode::UnsupportedCase: return "UnsupportedCase";
    case ErrorCode::NoSolution: return "NoSolution";
    case ErrorCode::GridUnderflow: return "GridUnderflow";
    case ErrorCode::InvalidCase: return "InvalidCase";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::UnsupportedModel: return "UnsupportedModel";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

}  // namespace walkdiff
