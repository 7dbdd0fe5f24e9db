#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "walkdiff/rng.hpp"
#include "walkdiff/scale_factor.hpp"

namespace walkdiff {

/// Y_0 = m, Y_{k+1} = Y_k + a_N(Y_k) X_{k+1}.
struct WalkPath {
  std::uint64_t N = 1;
  double start = 0.0;
  std::vector<double> states;
  /// First index at which the path sits on a finite end of the interval.
  std::optional<std::size_t> absorbed_at;
};

/// y + a_N(y) x, with landings within rounding of a finite end snapped onto it.
double step(const ScaleSolver& solver, double y, double x);

/// Lands y + a x on [l, r], snapping values within rounding of an end.
double land(const Interval& iv, double y, double ax);

WalkPath simulate_path(const ScaleSolver& solver, std::size_t steps, RngStream& rng);
WalkPath simulate_path_forced(const ScaleSolver& solver, std::span<const double> increments);

/// Linear interpolation Y_t between integer times; DomainError beyond the path.
double interpolate(const WalkPath& path, double t);

/// Paths 0..count-1, path i drawn from stream (seed, i).
std::vector<WalkPath> simulate_paths(const ScaleSolver& solver, std::size_t steps, std::size_t count,
                                     std::uint64_t seed, unsigned threads = 1);

}  // namespace walkdiff
