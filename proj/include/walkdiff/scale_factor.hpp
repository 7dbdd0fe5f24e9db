#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "walkdiff/diffusion.hpp"
#include "walkdiff/measure.hpp"

namespace walkdiff {

struct GValue {
  double value = 0.0;
  /// Set when a quadrature failure was reported as +inf.
  bool divergence = false;
};

/// Embedding cost G_y(a): expected q(y, y + a X) for X ~ mu.
GValue g_eval_detail(const QFunction& qf, const IncrementMeasure& mu, double y, double a);
inline double g_eval(const QFunction& qf, const IncrementMeasure& mu, double y, double a) {
  return g_eval_detail(qf, mu, y, a).value;
}

/// Largest a with y + a supp(mu) inside [l, r]; +inf on the real line.
double a_bar(const IncrementMeasure& mu, const Interval& interval, double y);

struct SolveOptions {
  double rel_tol = 1e-12;
  int max_iter = 200;
  /// Relative gap to 1/N below which G_y(a) = 1/N counts as exact.
  double equality_tol = 1e-8;
};

struct ScaleEquationResult {
  double y = 0.0;
  double a = 0.0;
  double achieved_G = 0.0;
  bool exact_equality = false;
  /// Where G_y jumps to +inf (abar in bounded-support cases), +inf if nowhere found.
  double a_inf = kInf;
};

/// a_N(y) = sup{a >= 0 : G_y(a) <= 1/N} by bisection on the feasible set.
ScaleEquationResult solve_scale(const QFunction& qf, const IncrementMeasure& mu, double y, std::uint64_t N,
                                const SolveOptions& opt = {});

enum class Status { holds, fails, heuristic_holds, inconclusive };
std::string_view to_string(Status s);

struct CaseReport {
  int case_id = 1;
  std::map<std::string, Status> assumption_status;
  std::uint64_t N0_estimate = 1;
  std::vector<std::string> notes;
};

struct ClassifyOptions {
  int probe_points = 40;
};

CaseReport classify_case(const QFunction& qf, const IncrementMeasure& mu, const ClassifyOptions& opt = {});

struct ScaleFactorTable {
  std::uint64_t N = 1;
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> achieved_G;
  std::vector<bool> exact_equality;
  Interval interval;

  /// Piecewise linear in the grid hull, 0 at a finite endpoint of the
  /// interval; DomainError elsewhere.
  double value_at(double y) const;
};

ScaleFactorTable build_table(const QFunction& qf, const IncrementMeasure& mu, std::uint64_t N,
                             const std::vector<double>& grid, unsigned threads = 1, const SolveOptions& opt = {});

/// On-demand a_N(y) with a memo keyed by the exact bits of y. Safe for
/// concurrent use; every entry is a pure function of y, so results do not
/// depend on access order or eviction.
class ScaleSolver {
 public:
  ScaleSolver(const QFunction& qf, const IncrementMeasure& mu, std::uint64_t N, SolveOptions opt = {},
              std::size_t memo_capacity = 1 << 16);

  /// a_N(y), 0 at a finite endpoint; DomainError outside [l, r].
  double a(double y) const { return solve(y).a; }
  ScaleEquationResult solve(double y) const;

  const QFunction& qfunction() const { return qf_; }
  const IncrementMeasure& measure() const { return mu_; }
  std::uint64_t N() const { return N_; }

 private:
  const QFunction& qf_;
  const IncrementMeasure& mu_;
  std::uint64_t N_;
  SolveOptions opt_;
  std::size_t capacity_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::uint64_t, ScaleEquationResult> memo_;
};

}  // namespace walkdiff
