#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "walkdiff/common.hpp"

namespace walkdiff {

/// Growth bounds of |eta| near the ends of the interval, when known analytically.
/// `linear_left`: limsup_{x->l} |eta(x)|/(x-l) < inf.
/// `linear_right`: limsup |eta(x)|/x < inf as x->inf, or |eta(x)|/(r-x) < inf at a finite r.
struct BoundaryAsymptotics {
  bool linear_left = false;
  bool linear_right = false;
};

/// One piece of a user-defined coefficient:
/// eta(x) = c * |x - shift|^power * exp(rate * x) * |log|x - shift||^log_power.
struct PieceSpec {
  double c = 1.0;
  double shift = 0.0;
  double power = 0.0;
  double rate = 0.0;
  double log_power = 0.0;

  double operator()(double x) const;
  bool operator==(const PieceSpec&) const = default;
};

/// The driftless diffusion dM = eta(M) dW on an open interval (l, r).
struct DiffusionSpec {
  std::string name;
  std::map<std::string, double> params;
  Interval interval;
  /// eta restricted to the interval; only ever called with l < x < r.
  std::function<double(double)> eta_inside;
  /// Exact q(y, x) for y in (l,r) and x in [l,r], when known.
  std::function<double(double, double)> q_closed_form;
  /// Points where eta may jump; quadrature splits there.
  std::vector<double> breakpoints;
  double start = 0.0;
  BoundaryAsymptotics asymptotics;
  /// sup |eta| over the interval when bounded.
  std::optional<double> eta_bound;
  bool eta_constant = false;
};

/// eta(x), zero outside the open interval.
double eta_eval(const DiffusionSpec& spec, double x);

/// Checks start point, non-vanishing eta on a probe grid and closed-form sanity.
/// Throws ValidationError.
void validate_spec(const DiffusionSpec& spec);

// Catalog. Every factory validates its output.
DiffusionSpec make_bm(double m = 0.0, Interval interval = {});
DiffusionSpec make_two_media(double A, double m = 0.0);
DiffusionSpec make_gbm(double m = 1.0);
DiffusionSpec make_cev(double alpha, double m = 1.0);
/// eta(x) = exp(-x/2) on the real line.
DiffusionSpec make_exp_half(double m = 0.0);
/// Coefficient on (0, inf) whose left boundary is inaccessible yet
/// G_y(abar(y)) -> 0 as y -> 0.
DiffusionSpec make_log_example(double m = 0.5);
/// User-defined piecewise coefficient: pieces[i] applies on
/// [breaks[i-1], breaks[i]) with breaks extended by the interval ends.
DiffusionSpec make_piecewise(Interval interval, std::vector<double> breaks, std::vector<PieceSpec> pieces,
                             double m);

/// Model by catalog name and parameters (`l`, `r` override the interval of `bm`).
DiffusionSpec make_model(const std::string& name, const std::map<std::string, double>& params,
                         std::optional<double> m = std::nullopt);

/// The model of -M: eta(-x) on (-r, -l), started at -m.
DiffusionSpec reflect(const DiffusionSpec& spec);

struct QOptions {
  double rel_tol = 1e-9;
  bool use_closed_form = true;
  double divergence_cap = 1e12;
  int probe_budget = 60;
};

struct BoundaryReport {
  Side side = Side::left;
  double limit_value = kInf;
  bool accessible = false;
  bool inconclusive = false;
  /// True when the verdict rests on probes alone (no exact endpoint value).
  bool heuristic = true;
  std::vector<std::pair<double, double>> probe_trace;
};

/// Evaluator of q(y,x) = int_y^x int_y^u 2/eta^2(z) dz du and its x-derivative.
/// Immutable after construction apart from lazily computed boundary reports,
/// which are guarded so concurrent readers see one consistent value.
class QFunction {
 public:
  explicit QFunction(DiffusionSpec spec, QOptions options = {});

  const DiffusionSpec& spec() const { return spec_; }
  const QOptions& options() const { return options_; }
  const Interval& interval() const { return spec_.interval; }
  double reference_point() const { return spec_.start; }

  /// q(y, x); +inf for x outside [l, r]. Throws DomainError / QuadratureDivergence.
  double q(double y, double x) const;
  /// q_x(y, x) = int_y^x 2/eta^2(z) dz.
  double q_x(double y, double x) const;

  /// Boundary report for one side, computed on first use.
  const BoundaryReport& boundary(Side side) const;

  /// q by nested quadrature, ignoring any closed form.
  double q_quadrature(double y, double x) const;

 private:
  double q_at_endpoint(double y, Side side) const;

  DiffusionSpec spec_;
  QOptions options_;
  struct LazyBoundary {
    std::once_flag once;
    BoundaryReport report;
  };
  std::unique_ptr<LazyBoundary[]> boundaries_;
};

/// Feller-type accessibility test along a geometric probe sequence toward the
/// boundary. Never guesses: `inconclusive` is set when neither the divergence
/// cap nor the Cauchy criterion triggers within the probe budget.
BoundaryReport classify_boundary(const QFunction& qf, Side side);

}  // namespace walkdiff
