#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace walkdiff {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorCode {
  NonFiniteInput,
  DomainError,
  QuadratureDivergence,
  UnsupportedCase,
  NoSolution,
  GridUnderflow,
  InvalidCase,
  UnsortedInput,
  UnsupportedModel,
  ParseError,
  ValidationError,
};

std::string_view to_string(ErrorCode code);

/// Library error carrying a stable code; the CLI maps codes to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class Side { left, right };

inline std::string_view to_string(Side s) { return s == Side::left ? "left" : "right"; }

/// Open state interval (lower, upper) with possibly infinite endpoints.
struct Interval {
  double lower = -kInf;
  double upper = kInf;

  bool lower_finite() const { return std::isfinite(lower); }
  bool upper_finite() const { return std::isfinite(upper); }
  bool contains_open(double x) const { return x > lower && x < upper; }
  bool contains_closed(double x) const { return x >= lower && x <= upper; }
  double endpoint(Side s) const { return s == Side::left ? lower : upper; }

  bool operator==(const Interval&) const = default;
};

/// Boundary case of a state interval: 1 = (-inf,inf), 2 = (l,inf), 3 = (-inf,r), 4 = (l,r).
inline int boundary_case(const Interval& iv) {
  if (!iv.lower_finite() && !iv.upper_finite()) return 1;
  if (iv.lower_finite() && !iv.upper_finite()) return 2;
  if (!iv.lower_finite()) return 3;
  return 4;
}

inline void require_finite(double x, const char* what) {
  if (std::isnan(x)) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " is NaN");
}

}  // namespace walkdiff
