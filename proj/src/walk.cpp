#include "walkdiff/walk.hpp"

#include <cmath>
#include <limits>

#include "walkdiff/parallel.hpp"

namespace walkdiff {

double land(const Interval& iv, double y, double ax) {
  const double res = y + ax;
  const double slack = 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(y) + std::abs(ax));
  if (iv.lower_finite() && res <= iv.lower + slack) return iv.lower;
  if (iv.upper_finite() && res >= iv.upper - slack) return iv.upper;
  return res;
}

double step(const ScaleSolver& solver, double y, double x) {
  const Interval& iv = solver.qfunction().interval();
  require_finite(y, "y");
  if (y < iv.lower || y > iv.upper) throw Error(ErrorCode::DomainError, "step: state outside [l, r]");
  const double a = solver.a(y);
  if (a == 0.0 || x == 0.0) return y;
  return land(iv, y, a * x);
}

namespace {

template <class Next>
WalkPath run(const ScaleSolver& solver, std::size_t steps, Next&& next) {
  const Interval& iv = solver.qfunction().interval();
  WalkPath p;
  p.N = solver.N();
  p.start = solver.qfunction().reference_point();
  p.states.reserve(steps + 1);
  p.states.push_back(p.start);
  double y = p.start;
  for (std::size_t k = 0; k < steps; ++k) {
    y = step(solver, y, next(k));
    p.states.push_back(y);
    if (!p.absorbed_at && !iv.contains_open(y)) p.absorbed_at = k + 1;
  }
  return p;
}

}  // namespace

WalkPath simulate_path(const ScaleSolver& solver, std::size_t steps, RngStream& rng) {
  const IncrementMeasure& mu = solver.measure();
  return run(solver, steps, [&](std::size_t) { return mu.sample(rng); });
}

WalkPath simulate_path_forced(const ScaleSolver& solver, std::span<const double> increments) {
  return run(solver, increments.size(), [&](std::size_t k) { return increments[k]; });
}

double interpolate(const WalkPath& path, double t) {
  require_finite(t, "t");
  const double K = static_cast<double>(path.states.size()) - 1.0;
  if (t < 0.0 || t > K) throw Error(ErrorCode::DomainError, "interpolate: t outside [0, K]");
  const double fl = std::floor(t);
  const auto k = static_cast<std::size_t>(fl);
  if (fl == t) return path.states[k];
  const double frac = t - fl;
  return path.states[k] + frac * (path.states[k + 1] - path.states[k]);
}

std::vector<WalkPath> simulate_paths(const ScaleSolver& solver, std::size_t steps, std::size_t count,
                                     std::uint64_t seed, unsigned threads) {
  std::vector<WalkPath> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    RngStream rng(seed, i);
    out[i] = simulate_path(solver, steps, rng);
  });
  return out;
}

}  // namespace walkdiff
