#pragma once

#include <cstdint>
#include <vector>

#include "walkdiff/measure.hpp"
#include "walkdiff/rng.hpp"
#include "walkdiff/scale_factor.hpp"

namespace walkdiff {

/// b(t, x) = E[F^{-1}(Phi(W_1)) | W_t = x] and its x-derivative.
/// Atomic mu uses the closed form through the thresholds c_i = Phi^{-1}(C_i);
/// densities use Gauss-Hermite quadrature over W_1 | W_t = x.
class BridgeFunction {
 public:
  explicit BridgeFunction(const IncrementMeasure& mu, int gh_nodes = 64);

  /// t in [0, 1]; t = 1 gives F^{-1}(Phi(x)). DomainError for t > 1.
  double b(double t, double x) const;
  /// t in [0, 1). DomainError for t >= 1.
  double b_x(double t, double x) const;

  /// Same functions parameterized by r = 1 - t > 0, which keeps precision as t -> 1.
  double b_r(double r, double x) const;
  double b_x_r(double r, double x) const;

  /// F^{-1}(Phi(w)).
  double endpoint_value(double w) const;

  const IncrementMeasure& measure() const { return mu_; }
  const std::vector<double>& thresholds() const { return thresholds_; }
  /// Distance from w to the nearest threshold (atomic mu), +inf otherwise.
  double threshold_distance(double w) const;

 private:
  double h_prime(double w) const;
  static void load_rule(int n, std::vector<double>& x, std::vector<double>& w);

  IncrementMeasure mu_;
  std::vector<double> thresholds_;
  std::vector<double> jumps_;
  std::vector<double> gh_x_;
  std::vector<double> gh_w_;
  std::vector<double> gh_short_x_;
  std::vector<double> gh_short_w_;
};

struct EmbedOptions {
  /// Nodes of the uniform grid in v = -log(1 - s) over [0, v_max].
  int grid_nodes = 2048;
  double v_max = 36.0;
  /// Brownian-bridge doublings tried until xi changes by less than rel_change.
  int max_doublings = 2;
  double rel_change = 1e-4;
  /// Atomic mu: stop once W is this many sqrt(1 - s) away from every threshold.
  double separation = 12.0;
  /// Density mu: stop once 1 - s falls below this.
  double density_cutoff = 1e-10;
  bool record_trajectory = false;
};

struct TrajectoryPoint {
  double time;
  double value;
};

struct EmbeddedStep {
  double start_y = 0.0;
  double scale_a = 0.0;
  double endpoint = 0.0;
  double duration_xi = 0.0;
  double compensation_wait = 0.0;
  int doublings = 0;
  bool refinement_converged = true;
  /// (delta, L) pairs along the step when requested; delta is the running xi.
  std::vector<TrajectoryPoint> trajectory;
};

/// One embedded step from y with scale a: simulates W on the time grid and
/// returns the pair (xi, y + a F^{-1}(Phi(W_1))) drawn jointly.
EmbeddedStep sample_embedded_step(const QFunction& qf, const BridgeFunction& bf, double y, double a, RngStream& rng,
                                  const EmbedOptions& opt = {});

/// (1/w)(1/N - Q_y) when the step ended on the boundary, else 0.
/// InvalidCase when compensation is requested with w = 0 or at an inaccessible end.
double compensate_boundary(double w, bool q_at_boundary_finite, double Q_y, std::uint64_t N, bool endpoint_at_boundary);

struct EmbeddedPath {
  std::uint64_t N = 1;
  std::vector<double> taus;
  std::vector<double> states;
  std::vector<EmbeddedStep> per_step;
};

/// Chains embedded steps with a_N from the solver and boundary compensation.
/// A step that starts on an absorbing end has xi = 0 and waits exactly 1/N.
EmbeddedPath simulate_embedded_walk(const QFunction& qf, const BridgeFunction& bf, const ScaleSolver& solver,
                                    std::size_t steps, RngStream& rng, const EmbedOptions& opt = {});

}  // namespace walkdiff
