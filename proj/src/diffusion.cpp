#include "walkdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "walkdiff/numerics.hpp"

namespace walkdiff {

double PieceSpec::operator()(double x) const {
  double v = c;
  const double d = std::abs(x - shift);
  if (power != 0.0) v *= std::pow(d, power);
  if (rate != 0.0) v *= std::exp(rate * x);
  if (log_power != 0.0) v *= std::pow(std::abs(std::log(d)), log_power);
  return v;
}

double eta_eval(const DiffusionSpec& spec, double x) {
  require_finite(x, "x");
  if (!spec.interval.contains_open(x)) return 0.0;
  return spec.eta_inside(x);
}

void validate_spec(const DiffusionSpec& spec) {
  const Interval& iv = spec.interval;
  if (!(iv.lower < iv.upper)) throw Error(ErrorCode::ValidationError, spec.name + ": interval must satisfy l < r");
  if (!spec.eta_inside) throw Error(ErrorCode::ValidationError, spec.name + ": missing coefficient");
  if (!iv.contains_open(spec.start))
    throw Error(ErrorCode::ValidationError, spec.name + ": start point must lie in (l, r)");
  // Probe eta on a grid covering the interval; infinite ends are mapped by tan.
  constexpr int kProbes = 257;
  for (int i = 1; i < kProbes; ++i) {
    const double u = static_cast<double>(i) / kProbes;
    double x;
    if (iv.lower_finite() && iv.upper_finite()) x = iv.lower + u * (iv.upper - iv.lower);
    else if (iv.lower_finite()) x = iv.lower + u / (1.0 - u) * std::max(1.0, std::abs(spec.start - iv.lower));
    else if (iv.upper_finite()) x = iv.upper - (1.0 - u) / u * std::max(1.0, std::abs(iv.upper - spec.start));
    else x = std::tan(std::numbers::pi * (u - 0.5));
    if (!iv.contains_open(x)) continue;
    const double e = spec.eta_inside(x);
    if (!std::isfinite(e) || e == 0.0)
      throw Error(ErrorCode::ValidationError,
                  spec.name + ": eta must be finite and nonzero inside the interval (x = " + std::to_string(x) + ")");
  }
  if (spec.q_closed_form && spec.q_closed_form(spec.start, spec.start) != 0.0)
    throw Error(ErrorCode::ValidationError, spec.name + ": closed-form q(m, m) must vanish");
}

DiffusionSpec make_bm(double m, Interval interval) {
  DiffusionSpec s;
  s.name = "bm";
  if (interval.lower_finite()) s.params["l"] = interval.lower;
  if (interval.upper_finite()) s.params["r"] = interval.upper;
  s.interval = interval;
  s.eta_inside = [](double) { return 1.0; };
  s.q_closed_form = [](double y, double x) { return (x - y) * (x - y); };
  s.start = m;
  s.asymptotics = {.linear_left = false, .linear_right = !interval.upper_finite()};
  s.eta_bound = 1.0;
  s.eta_constant = true;
  validate_spec(s);
  return s;
}

DiffusionSpec make_two_media(double A, double m) {
  if (A == 0.0 || !std::isfinite(A)) throw Error(ErrorCode::ValidationError, "two_media: A must be finite and nonzero");
  DiffusionSpec s;
  s.name = "two_media";
  s.params["A"] = A;
  s.eta_inside = [A](double x) { return x > 0.0 ? 1.0 : A; };
  const double a2 = A * A;
  s.q_closed_form = [a2](double y, double x) {
    if (y >= 0.0) {
      if (x >= 0.0) return (x - y) * (x - y);
      return y * y - 2.0 * x * y + x * x / a2;
    }
    if (x < 0.0) return (x - y) * (x - y) / a2;
    return (y * y - 2.0 * x * y) / a2 + x * x;
  };
  s.breakpoints = {0.0};
  s.start = m;
  s.eta_bound = std::max(1.0, std::abs(A));
  validate_spec(s);
  return s;
}

DiffusionSpec make_gbm(double m) {
  DiffusionSpec s;
  s.name = "gbm";
  s.interval = {0.0, kInf};
  s.eta_inside = [](double x) { return x; };
  s.q_closed_form = [](double y, double x) {
    if (x <= 0.0) return kInf;
    const double eps = (x - y) / y;
    return 2.0 * (eps - std::log1p(eps));
  };
  s.start = m;
  s.asymptotics = {.linear_left = true, .linear_right = true};
  validate_spec(s);
  return s;
}

DiffusionSpec make_cev(double alpha, double m) {
  if (alpha == 1.0) {
    DiffusionSpec s = make_gbm(m);
    s.name = "cev";
    s.params["alpha"] = 1.0;
    return s;
  }
  DiffusionSpec s;
  s.name = "cev";
  s.params["alpha"] = alpha;
  s.interval = {0.0, kInf};
  s.eta_inside = [alpha](double x) { return std::pow(x, alpha); };
  if (alpha == 0.5) {
    s.q_closed_form = [](double y, double x) {
      if (x < 0.0) return kInf;
      if (x == 0.0) return 2.0 * y;
      const double eps = (x - y) / y;
      return 2.0 * x * std::log1p(eps) - 2.0 * y * eps;
    };
  } else {
    const double p = 2.0 * alpha - 2.0;
    const double pre = 2.0 / (2.0 * alpha - 1.0);
    s.q_closed_form = [p, pre](double y, double x) {
      if (x < 0.0) return kInf;
      const double eps = (x - y) / y;
      const double e = std::expm1(-p * std::log1p(eps));
      if (std::isinf(e)) return kInf;
      return pre * std::pow(y, -p) * (e / p + eps);
    };
  }
  s.start = m;
  s.asymptotics = {.linear_left = alpha >= 1.0, .linear_right = alpha <= 1.0};
  validate_spec(s);
  return s;
}

DiffusionSpec make_exp_half(double m) {
  DiffusionSpec s;
  s.name = "exp_half";
  s.eta_inside = [](double x) { return std::exp(-0.5 * x); };
  s.q_closed_form = [](double y, double x) {
    const double d = x - y;
    return 2.0 * std::exp(y) * (std::expm1(d) - d);
  };
  s.start = m;
  validate_spec(s);
  return s;
}

DiffusionSpec make_log_example(double m) {
  DiffusionSpec s;
  s.name = "log_example";
  s.interval = {0.0, kInf};
  s.eta_inside = [](double x) {
    if (x >= 0.5) return 1.0;
    const double L = -std::log(x);
    return 2.0 * std::numbers::sqrt2 * x * std::pow(L, 0.75) / std::sqrt(-1.0 - 2.0 * std::log(x));
  };
  // q and q_x based at 1/2; other base points follow from the translation identity.
  const double sl2 = std::sqrt(std::numbers::ln2);
  auto q_half = [sl2](double x) {
    if (x <= 0.0) return kInf;
    if (x >= 0.5) return (x - 0.5) * (x - 0.5);
    return std::sqrt(-std::log(x)) + (x - 0.5) / sl2 - sl2;
  };
  auto qx_half = [sl2](double x) {
    if (x >= 0.5) return 2.0 * (x - 0.5);
    return -1.0 / (2.0 * x * std::sqrt(-std::log(x))) + 1.0 / sl2;
  };
  s.q_closed_form = [q_half, qx_half](double y, double x) {
    if (x == y) return 0.0;
    const double v = q_half(x) - q_half(y) - qx_half(y) * (x - y);
    return std::isinf(v) ? v : std::max(v, 0.0);
  };
  s.breakpoints = {0.5};
  s.start = m;
  s.asymptotics = {.linear_left = false, .linear_right = true};
  validate_spec(s);
  return s;
}

DiffusionSpec make_piecewise(Interval interval, std::vector<double> breaks, std::vector<PieceSpec> pieces, double m) {
  if (pieces.size() != breaks.size() + 1)
    throw Error(ErrorCode::ValidationError, "piecewise: need exactly one more piece than breakpoints");
  if (!std::is_sorted(breaks.begin(), breaks.end()) ||
      std::adjacent_find(breaks.begin(), breaks.end()) != breaks.end())
    throw Error(ErrorCode::ValidationError, "piecewise: breakpoints must be strictly increasing");
  for (double b : breaks)
    if (!interval.contains_open(b)) throw Error(ErrorCode::ValidationError, "piecewise: breakpoint outside interval");
  for (const PieceSpec& p : pieces)
    if (p.c == 0.0) throw Error(ErrorCode::ValidationError, "piecewise: eta vanishes on a whole piece");
  DiffusionSpec s;
  s.name = "piecewise";
  s.interval = interval;
  s.eta_inside = [breaks, pieces](double x) {
    const auto idx = std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin();
    return pieces[static_cast<std::size_t>(idx)](x);
  };
  s.breakpoints = std::move(breaks);
  s.start = m;
  bool bounded = true;
  double bound = 0.0;
  for (const PieceSpec& p : pieces) {
    if (p.power != 0.0 || p.rate != 0.0 || p.log_power != 0.0) bounded = false;
    bound = std::max(bound, std::abs(p.c));
  }
  if (bounded) {
    s.eta_bound = bound;
    s.asymptotics = {.linear_left = false, .linear_right = !interval.upper_finite()};
  }
  validate_spec(s);
  return s;
}

DiffusionSpec make_model(const std::string& name, const std::map<std::string, double>& params,
                         std::optional<double> m) {
  auto param = [&](const char* key, std::optional<double> fallback = std::nullopt) {
    auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw Error(ErrorCode::ValidationError, name + ": missing parameter '" + key + "'");
  };
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : params) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
        throw Error(ErrorCode::ValidationError, name + ": unknown parameter '" + k + "'");
    }
  };
  if (name == "bm") {
    allow({"l", "r"});
    Interval iv{param("l", -kInf), param("r", kInf)};
    double start = m.value_or(0.0);
    if (!m && !iv.contains_open(start)) start = iv.lower_finite() && iv.upper_finite() ? 0.5 * (iv.lower + iv.upper)
                                          : iv.lower_finite()                        ? iv.lower + 1.0
                                                                                      : iv.upper - 1.0;
    return make_bm(start, iv);
  }
  if (name == "two_media") {
    allow({"A"});
    return make_two_media(param("A"), m.value_or(0.0));
  }
  if (name == "gbm") {
    allow({});
    return make_gbm(m.value_or(1.0));
  }
  if (name == "cev") {
    allow({"alpha"});
    return make_cev(param("alpha"), m.value_or(1.0));
  }
  if (name == "exp_half") {
    allow({});
    return make_exp_half(m.value_or(0.0));
  }
  if (name == "log_example") {
    allow({});
    return make_log_example(m.value_or(0.5));
  }
  throw Error(ErrorCode::UnsupportedModel, "unknown model '" + name + "'");
}

DiffusionSpec reflect(const DiffusionSpec& spec) {
  DiffusionSpec s = spec;
  s.name = spec.name;
  s.interval = {-spec.interval.upper, -spec.interval.lower};
  s.eta_inside = [eta = spec.eta_inside](double x) { return eta(-x); };
  if (spec.q_closed_form) s.q_closed_form = [q = spec.q_closed_form](double y, double x) { return q(-y, -x); };
  s.breakpoints.clear();
  for (auto it = spec.breakpoints.rbegin(); it != spec.breakpoints.rend(); ++it) s.breakpoints.push_back(-*it);
  s.start = -spec.start;
  s.asymptotics = {.linear_left = spec.asymptotics.linear_right, .linear_right = spec.asymptotics.linear_left};
  return s;
}

// ---------------------------------------------------------------------------


QFunction::QFunction(DiffusionSpec spec, QOptions options)
    : spec_(std::move(spec)), options_(options), boundaries_(std::make_unique<LazyBoundary[]>(2)) {}

double QFunction::q(double y, double x) const {
  require_finite(y, "y");
  if (std::isnan(x)) throw Error(ErrorCode::NonFiniteInput, "x is NaN");
  const Interval& iv = spec_.interval;
  if (!iv.contains_open(y)) throw Error(ErrorCode::DomainError, "q: base point outside (l, r)");
  if (!std::isfinite(x) || x < iv.lower || x > iv.upper) return kInf;
  if (x == y) return 0.0;
  if (options_.use_closed_form && spec_.q_closed_form) return spec_.q_closed_form(y, x);
  if (x == iv.lower) return q_at_endpoint(y, Side::left);
  if (x == iv.upper) return q_at_endpoint(y, Side::right);
  return q_quadrature(y, x);
}

double QFunction::q_quadrature(double y, double x) const {
  const auto& eta = spec_.eta_inside;
  auto integrand = [&](double z) {
    const double e = eta(z);
    return (x - z) * 2.0 / (e * e);
  };
  const QuadResult r = quad_breaks(integrand, y, x, spec_.breakpoints, options_.rel_tol);
  if (!r.converged) throw Error(ErrorCode::QuadratureDivergence, "q(" + std::to_string(y) + ", " + std::to_string(x) + ")");
  return std::max(r.value, 0.0);
}

double QFunction::q_x(double y, double x) const {
  require_finite(y, "y");
  require_finite(x, "x");
  const Interval& iv = spec_.interval;
  if (!iv.contains_open(y) || !iv.contains_open(x)) throw Error(ErrorCode::DomainError, "q_x: arguments outside (l, r)");
  if (x == y) return 0.0;
  const auto& eta = spec_.eta_inside;
  auto integrand = [&](double z) {
    const double e = eta(z);
    return 2.0 / (e * e);
  };
  const QuadResult r = quad_breaks(integrand, y, x, spec_.breakpoints, options_.rel_tol);
  if (!r.converged) throw Error(ErrorCode::QuadratureDivergence, "q_x(" + std::to_string(y) + ", " + std::to_string(x) + ")");
  return r.value;
}

double QFunction::q_at_endpoint(double y, Side side) const {
  const BoundaryReport& rep = boundary(side);
  if (!rep.accessible && !rep.inconclusive) return kInf;
  const double e = spec_.interval.endpoint(side);
  const auto& eta = spec_.eta_inside;
  auto integrand = [&](double z) {
    const double h = eta(z);
    return (e - z) * 2.0 / (h * h);
  };
  const QuadResult r = quad_breaks(integrand, y, e, spec_.breakpoints, options_.rel_tol);
  if (r.converged) return std::max(r.value, 0.0);
  if (rep.inconclusive) throw Error(ErrorCode::QuadratureDivergence, "q at an undecided boundary");
  // Shift the probed limit at the reference point to base y.
  const double m = spec_.start;
  return rep.limit_value - q(m, y) - q_x(m, y) * (e - y);
}

const BoundaryReport& QFunction::boundary(Side side) const {
  LazyBoundary& slot = boundaries_[side == Side::left ? 0 : 1];
  std::call_once(slot.once, [&] { slot.report = classify_boundary(*this, side); });
  return slot.report;
}

BoundaryReport classify_boundary(const QFunction& qf, Side side) {
  BoundaryReport rep;
  rep.side = side;
  const DiffusionSpec& spec = qf.spec();
  const double e = spec.interval.endpoint(side);
  if (!std::isfinite(e)) {
    rep.limit_value = kInf;
    rep.accessible = false;
    rep.heuristic = false;
    return rep;
  }
  const double m = spec.start;
  const QOptions& opt = qf.options();
  double prev_x = m;
  double prev_v = 0.0;
  std::vector<double> incs;
  std::optional<bool> verdict;  // true = finite limit
  double limit = kInf;
  for (int k = 1; k <= opt.probe_budget && !verdict; ++k) {
    const double x = e + (m - e) * std::ldexp(1.0, -k);
    if (x == prev_x || x == e) break;
    double v;
    try {
      v = qf.q(m, x);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::QuadratureDivergence) throw;
      break;
    }
    rep.probe_trace.emplace_back(x, v);
    if (!(v < opt.divergence_cap)) {
      verdict = false;
      break;
    }
    const double inc = v - prev_v;
    incs.push_back(inc);
    const std::size_t n = incs.size();
    if (n >= 4) {
      bool contracting = true;
      double ratio = 0.0;
      for (std::size_t j = n - 3; j < n; ++j) {
        const double rj = incs[j - 1] != 0.0 ? incs[j] / incs[j - 1] : 0.0;
        if (!(std::abs(rj) <= 0.75)) contracting = false;
        ratio = std::max(ratio, std::abs(rj));
      }
      const double tail = std::abs(inc) * ratio / (1.0 - ratio);
      if (contracting && tail <= 1e-10 * (1.0 + std::abs(v))) {
        verdict = true;
        limit = v + inc * ratio / (1.0 - ratio);
      }
    }
    if (!verdict && n >= 8) {
      bool stalled = true;
      for (std::size_t j = n - 6; j < n; ++j) {
        if (!(incs[j] > 0.0 && incs[j - 1] > 0.0 && incs[j] / incs[j - 1] >= 0.97)) stalled = false;
      }
      if (stalled) verdict = false;
    }
    prev_x = x;
    prev_v = v;
  }
  if (opt.use_closed_form && spec.q_closed_form) {
    const double exact = spec.q_closed_form(m, e);
    rep.limit_value = exact;
    rep.accessible = std::isfinite(exact);
    rep.heuristic = false;
    rep.inconclusive = false;
    return rep;
  }
  if (!verdict && incs.size() >= 6) {
    // Probing stopped early (quadrature limit or no progress): accept a clean
    // geometric contraction with a smaller tail budget.
    const std::size_t n = incs.size();
    double ratio = 0.0;
    bool contracting = true;
    for (std::size_t j = n - 4; j < n; ++j) {
      const double rj = incs[j - 1] != 0.0 ? incs[j] / incs[j - 1] : 0.0;
      if (!(rj >= 0.0 && rj <= 0.75)) contracting = false;
      ratio = std::max(ratio, rj);
    }
    const double v = rep.probe_trace.back().second;
    const double tail = incs.back() * ratio / (1.0 - ratio);
    if (contracting && tail <= 1e-6 * (1.0 + std::abs(v))) {
      verdict = true;
      limit = v + tail;
    }
  }
  if (!verdict) {
    rep.inconclusive = true;
    rep.accessible = false;
    rep.limit_value = kInf;
    return rep;
  }
  rep.accessible = *verdict;
  rep.limit_value = *verdict ? limit : kInf;
  return rep;
}

}  // namespace walkdiff
