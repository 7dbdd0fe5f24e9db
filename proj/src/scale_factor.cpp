#include "walkdiff/scale_factor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>

#include "walkdiff/numerics.hpp"
#include "walkdiff/parallel.hpp"

namespace walkdiff {

namespace {

constexpr double kGCap = 1e12;
constexpr double kDensityTol = 1e-10;

// abar without the UnsupportedCase check: 0 when an unbounded support meets a finite end.
double feasible_bound(const IncrementMeasure& mu, const Interval& iv, double y) {
  double b = kInf;
  if (iv.lower_finite()) b = std::min(b, std::isfinite(mu.inf_supp()) ? (iv.lower - y) / mu.inf_supp() : 0.0);
  if (iv.upper_finite()) b = std::min(b, std::isfinite(mu.sup_supp()) ? (iv.upper - y) / mu.sup_supp() : 0.0);
  return b;
}

// Expected q(y, y + a X) restricted to X in [lo, hi] for a density mu.
GValue density_cost(const QFunction& qf, const IncrementMeasure& mu, double y, double a, double lo, double hi) {
  const Interval& iv = qf.interval();
  bool diverged = false;
  auto integrand = [&](double x) {
    const double f = mu.pdf(x);
    if (f < std::numeric_limits<double>::min()) return 0.0;
    const double target = std::clamp(y + a * x, iv.lower, iv.upper);
    double q;
    try {
      q = qf.q(y, target);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::QuadratureDivergence) throw;
      diverged = true;
      return kInf;
    }
    return q * f;
  };
  std::vector<double> cuts{0.0};
  for (double b : qf.spec().breakpoints) cuts.push_back((b - y) / a);
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<double> pts;
  for (double c : cuts)
    if (c >= lo && c <= hi) pts.push_back(c);
  GValue total;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const QuadResult piece = quad(integrand, pts[i], pts[i + 1], kDensityTol);
    if (!piece.converged || diverged) return {kInf, true};
    total.value += piece.value;
  }
  if (!(total.value <= kGCap)) return {kInf, false};
  return total;
}

}  // namespace

GValue g_eval_detail(const QFunction& qf, const IncrementMeasure& mu, double y, double a) {
  require_finite(y, "y");
  require_finite(a, "a");
  const Interval& iv = qf.interval();
  if (!iv.contains_open(y)) throw Error(ErrorCode::DomainError, "g_eval: y outside (l, r)");
  if (a < 0.0) throw Error(ErrorCode::DomainError, "g_eval: a must be nonnegative");
  if (a == 0.0) return {};
  if (a > feasible_bound(mu, iv, y)) return {kInf, false};
  if (mu.kind() == MeasureKind::density) return density_cost(qf, mu, y, a, mu.inf_supp(), mu.sup_supp());
  GValue g;
  for (const Atom& at : mu.atoms()) {
    // a <= abar here, so a landing outside [l, r] is rounding only.
    const double target = std::clamp(y + a * at.x, iv.lower, iv.upper);
    try {
      g.value += at.w * qf.q(y, target);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::QuadratureDivergence) throw;
      return {kInf, true};
    }
  }
  if (!(g.value <= kGCap)) g.value = kInf;
  return g;
}

double a_bar(const IncrementMeasure& mu, const Interval& interval, double y) {
  require_finite(y, "y");
  if (!interval.contains_open(y)) throw Error(ErrorCode::DomainError, "a_bar: y outside (l, r)");
  if (interval.lower_finite() && !std::isfinite(mu.inf_supp()))
    throw Error(ErrorCode::UnsupportedCase, "finite left end needs a finite lower support bound");
  if (interval.upper_finite() && !std::isfinite(mu.sup_supp()))
    throw Error(ErrorCode::UnsupportedCase, "finite right end needs a finite upper support bound");
  return feasible_bound(mu, interval, y);
}

ScaleEquationResult solve_scale(const QFunction& qf, const IncrementMeasure& mu, double y, std::uint64_t N,
                                const SolveOptions& opt) {
  if (N == 0) throw Error(ErrorCode::DomainError, "N must be positive");
  const Interval& iv = qf.interval();
  require_finite(y, "y");
  if (!iv.contains_open(y)) throw Error(ErrorCode::DomainError, "solve_scale: y outside (l, r)");
  const double target = 1.0 / static_cast<double>(N);
  auto G = [&](double a) { return g_eval(qf, mu, y, a); };

  ScaleEquationResult res;
  res.y = y;
  const double abar = a_bar(mu, iv, y);
  double lo = 0.0;
  double hi;
  if (std::isfinite(abar)) {
    res.a_inf = abar;
    const double gb = G(abar);
    if (gb <= target) {
      res.a = abar;
      res.achieved_G = gb;
      res.exact_equality = std::abs(gb - target) <= opt.equality_tol * target;
      if (res.exact_equality) return res;
      // Strict inequality at abar: only admissible when the step can end on an
      // accessible boundary carrying an atom, which the waiting time then pays for.
      bool compensable = false;
      for (Side s : {Side::left, Side::right}) {
        if (!std::isfinite(iv.endpoint(s))) continue;
        const double support = s == Side::left ? mu.inf_supp() : mu.sup_supp();
        if (std::abs(y + abar * support - iv.endpoint(s)) > 1e-12 * (1.0 + std::abs(iv.endpoint(s)))) continue;
        const double w = s == Side::left ? mu.mass_at_inf_supp() : mu.mass_at_sup_supp();
        if (w > 0.0 && qf.boundary(s).accessible) compensable = true;
      }
      if (compensable) return res;
      const double n0 = gb > 0.0 ? std::floor(1.0 / gb) + 1.0 : kInf;
      throw Error(ErrorCode::NoSolution, "G_y(abar) = " + std::to_string(gb) + " < 1/N at y = " + std::to_string(y) +
                                             "; need N >= " + (std::isfinite(n0) ? std::to_string(static_cast<std::uint64_t>(n0)) : "inf"));
    }
    hi = abar;
  } else {
    const double sigma2 = mu.second_moment();
    const double e = std::abs(eta_eval(qf.spec(), y));
    double a0 = std::isfinite(sigma2) && sigma2 > 0.0 ? e / std::sqrt(static_cast<double>(N) * sigma2) : 1.0;
    if (!(a0 > 0.0) || !std::isfinite(a0)) a0 = 1.0;
    hi = a0;
    int expansions = 0;
    while (G(hi) <= target) {
      lo = hi;
      hi *= 2.0;
      if (++expansions > opt.max_iter || !std::isfinite(hi))
        throw Error(ErrorCode::NoSolution, "G_y stays below 1/N on the expansion bracket at y = " + std::to_string(y));
    }
  }
  for (int it = 0; it < opt.max_iter && hi - lo > opt.rel_tol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (G(mid) <= target) lo = mid;
    else hi = mid;
  }
  res.a = lo;
  res.achieved_G = G(lo);
  res.exact_equality = std::abs(res.achieved_G - target) <= opt.equality_tol * target;
  if (!std::isfinite(abar) && std::isinf(G(hi))) res.a_inf = hi;
  return res;
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::holds: return "holds";
    case Status::fails: return "fails";
    case Status::heuristic_holds: return "heuristic-holds";
    case Status::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

namespace {

struct ProbeResult {
  Status status = Status::inconclusive;
  double min_value = kInf;
};

// G_y(abar(y)) along a geometric sequence of y toward one end of the interval.
ProbeResult probe_liminf(const QFunction& qf, const IncrementMeasure& mu, Side toward, int points,
                         std::vector<std::string>& notes) {
  const Interval& iv = qf.interval();
  const double m = qf.reference_point();
  const double e = iv.endpoint(toward);
  const double sign = toward == Side::left ? -1.0 : 1.0;
  // Distance unit: from m to the opposite finite end (or 1).
  const Side other = toward == Side::left ? Side::right : Side::left;
  const double unit = std::isfinite(iv.endpoint(other)) ? std::abs(m - iv.endpoint(other)) : 1.0;
  std::vector<double> vals;
  for (int k = 1; k <= points; ++k) {
    double y;
    if (std::isfinite(e)) y = e - sign * std::abs(e - m) * std::exp2(-0.5 * k);
    else y = std::isfinite(iv.endpoint(other)) ? iv.endpoint(other) + sign * unit * std::exp2(0.5 * k)
                                               : m + sign * unit * std::expm1(0.5 * k * std::numbers::ln2);
    if (!iv.contains_open(y)) break;
    vals.push_back(g_eval(qf, mu, y, a_bar(mu, iv, y)));
  }
  ProbeResult pr;
  std::string trace = "G(abar) probes toward " + std::string(to_string(toward)) + ":";
  for (double v : vals) {
    pr.min_value = std::min(pr.min_value, v);
    trace += " " + std::to_string(v);
  }
  notes.push_back(trace);
  if (vals.size() < 12 || pr.min_value <= 0.0) return pr;
  const std::size_t n = vals.size();
  bool decaying = vals[n - 1] < 0.9 * vals[n - 10];
  for (std::size_t j = n - 9; j < n && decaying; ++j)
    if (!(vals[j] < vals[j - 1])) decaying = false;
  pr.status = decaying ? Status::inconclusive : Status::heuristic_holds;
  if (decaying) notes.push_back("G(abar) probes decay toward " + std::string(to_string(toward)) + " end");
  return pr;
}

Status a1_status(const QFunction& qf, const IncrementMeasure& mu, std::vector<std::string>& notes) {
  if (mu.kind() == MeasureKind::atoms) return Status::holds;
  if (qf.spec().eta_constant) return std::isfinite(mu.second_moment()) ? Status::holds : Status::fails;
  const double m = qf.reference_point();
  for (int k = -4; k <= 8; ++k) {
    const double a = std::exp2(k);
    if (std::isinf(g_eval(qf, mu, m, a))) {
      notes.push_back("G_m(a) = inf at a = " + std::to_string(a));
      return Status::fails;
    }
  }
  return std::isfinite(mu.inf_supp()) && std::isfinite(mu.sup_supp()) ? Status::holds : Status::heuristic_holds;
}

// The part of the A2 condition on the unbounded side: E[q(y, y + aX); X beyond 0] finite for all a.
Status a2_tail_status(const QFunction& qf, const IncrementMeasure& mu, Side unbounded, std::vector<std::string>& notes) {
  const double bound = unbounded == Side::right ? mu.sup_supp() : mu.inf_supp();
  if (mu.kind() == MeasureKind::atoms || std::isfinite(bound)) return Status::holds;
  const double m = qf.reference_point();
  for (int k = -4; k <= 8; ++k) {
    const double a = std::exp2(k);
    const GValue g = unbounded == Side::right ? density_cost(qf, mu, m, a, 0.0, kInf)
                                              : density_cost(qf, mu, m, a, -kInf, 0.0);
    if (std::isinf(g.value)) {
      notes.push_back("tail cost infinite at a = " + std::to_string(a));
      return Status::fails;
    }
  }
  return Status::heuristic_holds;
}

}  // namespace

CaseReport classify_case(const QFunction& qf, const IncrementMeasure& mu, const ClassifyOptions& opt) {
  CaseReport rep;
  const Interval& iv = qf.interval();
  rep.case_id = boundary_case(iv);
  auto& st = rep.assumption_status;
  if (rep.case_id == 1) {
    st["A1"] = a1_status(qf, mu, rep.notes);
    rep.N0_estimate = 1;
    return rep;
  }
  if (rep.case_id == 4) {
    st["A3"] = std::isfinite(mu.inf_supp()) && std::isfinite(mu.sup_supp()) ? Status::holds : Status::fails;
    if (st["A3"] == Status::fails) return rep;
  } else {
    const Side finite_side = rep.case_id == 2 ? Side::left : Side::right;
    const double bound = finite_side == Side::left ? mu.inf_supp() : mu.sup_supp();
    Status a2 = std::isfinite(bound) ? Status::holds : Status::fails;
    if (a2 != Status::fails)
      a2 = a2_tail_status(qf, mu, finite_side == Side::left ? Side::right : Side::left, rep.notes);
    st["A2"] = a2;
    if (a2 == Status::fails) return rep;
  }

  const BoundaryAsymptotics& as = qf.spec().asymptotics;
  bool n0_is_one = true;
  double probe_min = kInf;
  auto side_conditions = [&](Side s, const char* atom_key, const char* liminf_key, std::vector<Side> probe_dirs,
                             bool linear) {
    const BoundaryReport& b = qf.boundary(s);
    const double w = s == Side::left ? mu.mass_at_inf_supp() : mu.mass_at_sup_supp();
    rep.notes.push_back(std::string(to_string(s)) + " boundary: q limit " + std::to_string(b.limit_value) +
                        (b.inconclusive ? " (inconclusive)" : b.heuristic ? " (probe verdict)" : " (exact)"));
    if (b.inconclusive) st[atom_key] = w > 0.0 ? Status::holds : Status::inconclusive;
    else if (b.accessible) st[atom_key] = w > 0.0 ? Status::holds : Status::fails;
    else st[atom_key] = Status::holds;

    Status lim = Status::inconclusive;
    bool proven = false;
    if (b.accessible && !b.inconclusive) {
      lim = Status::holds;
      proven = true;
    } else if (w > 0.0) {
      lim = Status::holds;
      proven = true;
      rep.notes.push_back(std::string(liminf_key) + ": atom at the support end");
    }
    if (!proven) n0_is_one = false;
    bool probes_ok = true;
    for (Side d : probe_dirs) {
      const ProbeResult pr = probe_liminf(qf, mu, d, opt.probe_points, rep.notes);
      probe_min = std::min(probe_min, pr.min_value);
      if (pr.status != Status::heuristic_holds) probes_ok = false;
    }
    if (!proven) {
      if (linear) {
        lim = Status::holds;
        rep.notes.push_back(std::string(liminf_key) + ": eta grows at most linearly at the boundary");
      } else {
        lim = probes_ok ? Status::heuristic_holds : Status::inconclusive;
      }
    }
    st[liminf_key] = lim;
  };

  if (rep.case_id == 2) {
    side_conditions(Side::left, "cond_7", "cond_8", {Side::left, Side::right}, as.linear_left && as.linear_right);
  } else if (rep.case_id == 3) {
    side_conditions(Side::right, "cond_7", "cond_8", {Side::right, Side::left}, as.linear_left && as.linear_right);
  } else {
    side_conditions(Side::left, "cond_12", "cond_13", {Side::left}, as.linear_left);
    side_conditions(Side::right, "cond_14", "cond_15", {Side::right}, as.linear_right);
  }
  if (n0_is_one) {
    rep.N0_estimate = 1;
  } else {
    probe_min = std::min(probe_min, g_eval(qf, mu, qf.reference_point(), a_bar(mu, iv, qf.reference_point())));
    if (probe_min > 0.0 && 1.0 / probe_min < 1e18) rep.N0_estimate = static_cast<std::uint64_t>(std::floor(1.0 / probe_min)) + 1;
    else {
      rep.N0_estimate = std::numeric_limits<std::uint64_t>::max();
      rep.notes.push_back("no finite N0: G(abar) probes reach 0");
    }
  }
  return rep;
}

double ScaleFactorTable::value_at(double y) const {
  require_finite(y, "y");
  if ((interval.lower_finite() && y == interval.lower) || (interval.upper_finite() && y == interval.upper)) return 0.0;
  if (grid.empty() || y < grid.front() || y > grid.back())
    throw Error(ErrorCode::DomainError, "value_at: y outside the table grid; rebuild the table");
  auto it = std::lower_bound(grid.begin(), grid.end(), y);
  const auto i = static_cast<std::size_t>(it - grid.begin());
  if (*it == y) return values[i];
  const double t = (y - grid[i - 1]) / (grid[i] - grid[i - 1]);
  return values[i - 1] + t * (values[i] - values[i - 1]);
}

ScaleFactorTable build_table(const QFunction& qf, const IncrementMeasure& mu, std::uint64_t N,
                             const std::vector<double>& grid, unsigned threads, const SolveOptions& opt) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw Error(ErrorCode::DomainError, "table grid must be strictly increasing");
  ScaleFactorTable t;
  t.N = N;
  t.grid = grid;
  t.interval = qf.interval();
  const std::size_t n = grid.size();
  t.values.resize(n);
  t.achieved_G.resize(n);
  std::vector<char> exact(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    const ScaleEquationResult r = solve_scale(qf, mu, grid[i], N, opt);
    t.values[i] = r.a;
    t.achieved_G[i] = r.achieved_G;
    exact[i] = r.exact_equality;
  });
  t.exact_equality.assign(exact.begin(), exact.end());
  return t;
}

ScaleSolver::ScaleSolver(const QFunction& qf, const IncrementMeasure& mu, std::uint64_t N, SolveOptions opt,
                         std::size_t memo_capacity)
    : qf_(qf), mu_(mu), N_(N), opt_(opt), capacity_(memo_capacity) {}

ScaleEquationResult ScaleSolver::solve(double y) const {
  require_finite(y, "y");
  const Interval& iv = qf_.interval();
  if (y < iv.lower || y > iv.upper) throw Error(ErrorCode::DomainError, "state outside [l, r]");
  if (!iv.contains_open(y)) {
    ScaleEquationResult r;
    r.y = y;
    r.a_inf = 0.0;
    return r;
  }
  const auto key = std::bit_cast<std::uint64_t>(y);
  {
    std::shared_lock lock(mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  ScaleEquationResult r = solve_scale(qf_, mu_, y, N_, opt_);
  std::unique_lock lock(mutex_);
  if (memo_.size() >= capacity_) memo_.clear();
  memo_.emplace(key, r);
  return r;
}

}  // namespace walkdiff
