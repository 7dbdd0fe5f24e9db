#include "walkdiff/embedding.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "walkdiff/numerics.hpp"
#include "walkdiff/walk.hpp"

namespace walkdiff {

namespace {

// Past this v, 1 - s has left the normal double range.
constexpr double kVLimit = 700.0;
constexpr int kShortRule = 20;
// 1 - t below which the short rule is used.
constexpr double kShortBridge = 0.04;

}  // namespace

BridgeFunction::BridgeFunction(const IncrementMeasure& mu, int gh_nodes) : mu_(mu) {
  if (mu_.kind() == MeasureKind::atoms) {
    const auto& at = mu_.atoms();
    const auto& cum = mu_.cumulative();
    for (std::size_t i = 0; i + 1 < at.size(); ++i) {
      thresholds_.push_back(normal_quantile(std::min(cum[i], 1.0)));
      jumps_.push_back(at[i + 1].x - at[i].x);
    }
    return;
  }
  if (gh_nodes < 2) throw Error(ErrorCode::DomainError, "need at least 2 Gauss-Hermite nodes");
  load_rule(gh_nodes, gh_x_, gh_w_);
  // Short bridges see a nearly linear h; a small rule is plenty there.
  load_rule(std::min(gh_nodes, kShortRule), gh_short_x_, gh_short_w_);
}

void BridgeFunction::load_rule(int n, std::vector<double>& x, std::vector<double>& w) {
  // Weight exp(-x^2/2): GSL's hermite rule with b = 1/2.
  std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, static_cast<std::size_t>(n), 0.0, 0.5, 0.0, 0.0),
      &gsl_integration_fixed_free);
  if (!ws) throw Error(ErrorCode::DomainError, "Gauss-Hermite allocation failed");
  const double* nodes = gsl_integration_fixed_nodes(ws.get());
  const double* weights = gsl_integration_fixed_weights(ws.get());
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += weights[i];
  for (int i = 0; i < n; ++i) {
    x.push_back(nodes[i]);
    w.push_back(weights[i] / total);
  }
}

double BridgeFunction::endpoint_value(double w) const {
  if (mu_.kind() == MeasureKind::atoms) {
    const auto k = static_cast<std::size_t>(std::upper_bound(thresholds_.begin(), thresholds_.end(), w) - thresholds_.begin());
    return mu_.atoms()[k].x;
  }
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  const double p = std::clamp(normal_cdf(w), std::numeric_limits<double>::min(), hi);
  return mu_.quantile(p);
}

double BridgeFunction::h_prime(double w) const {
  const double f = mu_.pdf(endpoint_value(w));
  if (!(f > 0.0)) return 0.0;
  return normal_pdf(w) / f;
}

double BridgeFunction::threshold_distance(double w) const {
  if (thresholds_.empty()) return kInf;
  auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), w);
  double d = kInf;
  if (it != thresholds_.end()) d = *it - w;
  if (it != thresholds_.begin()) d = std::min(d, w - *(it - 1));
  return d;
}

double BridgeFunction::b_r(double r, double x) const {
  if (r == 0.0) return endpoint_value(x);
  const double s = std::sqrt(r);
  if (mu_.kind() == MeasureKind::atoms) {
    const auto& at = mu_.atoms();
    if (thresholds_.empty()) return at.front().x;
    // Sum from whichever end keeps the Phi terms small.
    if (x <= thresholds_[thresholds_.size() / 2]) {
      double v = at.front().x;
      for (std::size_t i = 0; i < thresholds_.size(); ++i) v += jumps_[i] * normal_cdf((x - thresholds_[i]) / s);
      return v;
    }
    double v = at.back().x;
    for (std::size_t i = 0; i < thresholds_.size(); ++i) v -= jumps_[i] * normal_cdf((thresholds_[i] - x) / s);
    return v;
  }
  const bool short_rule = r < kShortBridge;
  const auto& nx = short_rule ? gh_short_x_ : gh_x_;
  const auto& nw = short_rule ? gh_short_w_ : gh_w_;
  double v = 0.0;
  for (std::size_t k = 0; k < nx.size(); ++k) v += nw[k] * endpoint_value(x + s * nx[k]);
  return v;
}

double BridgeFunction::b_x_r(double r, double x) const {
  if (!(r > 0.0)) throw Error(ErrorCode::DomainError, "b_x needs t < 1");
  const double s = std::sqrt(r);
  if (mu_.kind() == MeasureKind::atoms) {
    double v = 0.0;
    for (std::size_t i = 0; i < thresholds_.size(); ++i) v += jumps_[i] * normal_pdf((x - thresholds_[i]) / s);
    return v / s;
  }
  const bool short_rule = r < kShortBridge;
  const auto& nx = short_rule ? gh_short_x_ : gh_x_;
  const auto& nw = short_rule ? gh_short_w_ : gh_w_;
  double v = 0.0;
  for (std::size_t k = 0; k < nx.size(); ++k) v += nw[k] * h_prime(x + s * nx[k]);
  return v;
}

double BridgeFunction::b(double t, double x) const {
  require_finite(t, "t");
  require_finite(x, "x");
  if (t < 0.0 || t > 1.0) throw Error(ErrorCode::DomainError, "b needs t in [0, 1]");
  return b_r(1.0 - t, x);
}

double BridgeFunction::b_x(double t, double x) const {
  require_finite(t, "t");
  require_finite(x, "x");
  if (t < 0.0 || t >= 1.0) throw Error(ErrorCode::DomainError, "b_x needs t in [0, 1)");
  return b_x_r(1.0 - t, x);
}

namespace {

struct StepIntegrand {
  const QFunction& qf;
  const BridgeFunction& bf;
  double y;
  double a;
  bool need_state;
  double eta_const;

  // Integrand in v = -log(1 - s); also reports L_s.
  double operator()(double r, double w, double& state) const {
    const double bx = bf.b_x_r(r, w);
    const double num = a * a * bx * bx * r;
    if (!need_state) {
      state = y;
      return num / (eta_const * eta_const);
    }
    state = y + a * bf.b_r(r, w);
    const Interval& iv = qf.interval();
    if (!iv.contains_open(state)) {
      state = std::clamp(state, iv.lower, iv.upper);
      if (num < 1e-200) return 0.0;
      throw Error(ErrorCode::GridUnderflow, "bridge state reached the boundary with non-negligible rate");
    }
    const double e = qf.spec().eta_inside(state);
    return num / (e * e);
  }
};

double trapezoid(const std::vector<double>& g, double h) {
  double s = 0.0;
  for (std::size_t j = 1; j < g.size(); ++j) s += 0.5 * h * (g[j - 1] + g[j]);
  return s;
}

}  // namespace

EmbeddedStep sample_embedded_step(const QFunction& qf, const BridgeFunction& bf, double y, double a, RngStream& rng,
                                  const EmbedOptions& opt) {
  require_finite(y, "y");
  require_finite(a, "a");
  const Interval& iv = qf.interval();
  if (!iv.contains_closed(y)) throw Error(ErrorCode::DomainError, "embedded step: y outside [l, r]");
  if (a < 0.0) throw Error(ErrorCode::DomainError, "embedded step: negative scale");
  if (opt.grid_nodes < 2 || !(opt.v_max > 0.0)) throw Error(ErrorCode::DomainError, "embedded step: bad grid");

  EmbeddedStep out;
  out.start_y = y;
  out.scale_a = a;
  out.endpoint = y;
  if (a == 0.0) {
    if (opt.record_trajectory) out.trajectory.push_back({0.0, y});
    return out;
  }

  const bool atoms = bf.measure().kind() == MeasureKind::atoms;
  const DiffusionSpec& spec = qf.spec();
  StepIntegrand f{qf, bf, y, a, !spec.eta_constant || opt.record_trajectory,
                  spec.eta_constant ? spec.eta_inside(y) : 1.0};

  double h = opt.v_max / opt.grid_nodes;
  const auto stop = [&](double r, double w) {
    if (atoms) return bf.threshold_distance(w) > opt.separation * std::sqrt(r);
    return r < opt.density_cutoff;
  };

  // Coarse pass: exact Gaussian increments in s = 1 - r.
  std::vector<double> W{0.0};
  std::vector<double> g;
  std::vector<double> L;
  double state = y;
  g.push_back(f(1.0, 0.0, state));
  L.push_back(state);
  const double shrink = -std::expm1(-h);
  for (std::size_t j = 0;; ++j) {
    const double r = std::exp(-static_cast<double>(j) * h);
    if (stop(r, W[j])) break;
    if (static_cast<double>(j + 1) * h > kVLimit) {
      if (atoms) throw Error(ErrorCode::GridUnderflow, "bridge did not separate from the thresholds");
      break;
    }
    const double w = W[j] + std::sqrt(r * shrink) * rng.normal();
    W.push_back(w);
    g.push_back(f(std::exp(-static_cast<double>(j + 1) * h), w, state));
    L.push_back(state);
  }
  const double r_end = std::exp(-static_cast<double>(W.size() - 1) * h);
  const double w1 = W.back() + std::sqrt(r_end) * rng.normal();
  out.endpoint = land(iv, y, a * bf.endpoint_value(w1));

  double xi = trapezoid(g, h);
  out.refinement_converged = opt.max_doublings == 0;
  for (int d = 0; d < opt.max_doublings; ++d) {
    // Brownian-bridge midpoints between consecutive nodes.
    const double half = h / 2;
    const double e_half = -std::expm1(-half);
    const double e_full = -std::expm1(-h);
    std::vector<double> W2, g2, L2;
    W2.reserve(2 * W.size());
    g2.reserve(2 * W.size());
    for (std::size_t j = 0; j + 1 < W.size(); ++j) {
      const double r = std::exp(-static_cast<double>(j) * h);
      const double rm = r * std::exp(-half);
      const double d1 = r * e_half, d2 = rm * e_half, dt = r * e_full;
      const double mean = W[j] + d1 / dt * (W[j + 1] - W[j]);
      const double wm = mean + std::sqrt(d1 * d2 / dt) * rng.normal();
      W2.push_back(W[j]);
      g2.push_back(g[j]);
      L2.push_back(L[j]);
      W2.push_back(wm);
      g2.push_back(f(rm, wm, state));
      L2.push_back(state);
    }
    W2.push_back(W.back());
    g2.push_back(g.back());
    L2.push_back(L.back());
    W.swap(W2);
    g.swap(g2);
    L.swap(L2);
    h = half;
    const double fine = trapezoid(g, h);
    out.doublings = d + 1;
    const bool done = std::abs(fine - xi) <= opt.rel_change * std::abs(fine);
    xi = fine;
    if (done) {
      out.refinement_converged = true;
      break;
    }
  }
  out.duration_xi = xi;

  if (opt.record_trajectory) {
    out.trajectory.reserve(L.size() + 1);
    double acc = 0.0;
    out.trajectory.push_back({0.0, L[0]});
    for (std::size_t j = 1; j < L.size(); ++j) {
      acc += 0.5 * h * (g[j - 1] + g[j]);
      out.trajectory.push_back({acc, L[j]});
    }
    out.trajectory.push_back({xi, out.endpoint});
  }
  return out;
}

double compensate_boundary(double w, bool q_at_boundary_finite, double Q_y, std::uint64_t N, bool endpoint_at_boundary) {
  if (!endpoint_at_boundary) return 0.0;
  if (N == 0) throw Error(ErrorCode::DomainError, "N must be positive");
  if (!q_at_boundary_finite) throw Error(ErrorCode::InvalidCase, "compensation at an inaccessible boundary");
  if (!(w > 0.0)) throw Error(ErrorCode::InvalidCase, "compensation needs an atom at the binding end of supp mu");
  require_finite(Q_y, "Q_y");
  return std::max(0.0, (1.0 / static_cast<double>(N) - Q_y) / w);
}

EmbeddedPath simulate_embedded_walk(const QFunction& qf, const BridgeFunction& bf, const ScaleSolver& solver,
                                    std::size_t steps, RngStream& rng, const EmbedOptions& opt) {
  const Interval& iv = qf.interval();
  const IncrementMeasure& mu = solver.measure();
  EmbeddedPath p;
  p.N = solver.N();
  const double dt = 1.0 / static_cast<double>(p.N);
  p.taus.reserve(steps + 1);
  p.states.reserve(steps + 1);
  p.per_step.reserve(steps);
  double y = qf.reference_point();
  double tau = 0.0;
  p.taus.push_back(tau);
  p.states.push_back(y);
  for (std::size_t k = 0; k < steps; ++k) {
    EmbeddedStep st;
    if (!iv.contains_open(y)) {
      st.start_y = y;
      st.endpoint = y;
      st.compensation_wait = dt;
      if (opt.record_trajectory) st.trajectory.push_back({0.0, y});
    } else {
      const ScaleEquationResult res = solver.solve(y);
      st = sample_embedded_step(qf, bf, y, res.a, rng, opt);
      const double e = st.endpoint;
      const bool at_left = iv.lower_finite() && e == iv.lower;
      const bool at_right = iv.upper_finite() && e == iv.upper;
      if (at_left || at_right) {
        const bool left_binds = iv.lower_finite() && land(iv, y, res.a * mu.inf_supp()) == iv.lower;
        const bool right_binds = iv.upper_finite() && land(iv, y, res.a * mu.sup_supp()) == iv.upper;
        double w = 0.0;
        if (left_binds) w += mu.mass_at_inf_supp();
        if (right_binds) w += mu.mass_at_sup_supp();
        const bool finite = qf.boundary(at_left ? Side::left : Side::right).accessible;
        st.compensation_wait = compensate_boundary(w, finite, res.achieved_G, p.N, true);
      }
    }
    tau += st.duration_xi + st.compensation_wait;
    y = st.endpoint;
    p.taus.push_back(tau);
    p.states.push_back(y);
    p.per_step.push_back(std::move(st));
  }
  return p;
}

}  // namespace walkdiff
