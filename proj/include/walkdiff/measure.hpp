#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "walkdiff/common.hpp"
#include "walkdiff/rng.hpp"

namespace walkdiff {

struct Atom {
  double x = 0.0;
  double w = 0.0;
  bool operator==(const Atom&) const = default;
};

enum class MeasureKind { atoms, density };

/// Centered increment law mu: either finitely many atoms or one of a few
/// named densities (`uniform{a}`, `triangular{a}`, `normal{sigma}`, and
/// `exp_rational`, proportional to exp(-|x|)/(1+x^2)).
class IncrementMeasure {
 public:
  /// Atoms are sorted and equal locations merged; no validation happens here.
  static IncrementMeasure from_atoms(std::vector<Atom> atoms);
  static IncrementMeasure rademacher();
  static IncrementMeasure from_density(const std::string& name, const std::map<std::string, double>& params);

  MeasureKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::map<std::string, double>& params() const { return params_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  /// Cumulative weights C_1..C_n of the sorted atoms (C_n = 1 when weights sum to 1).
  const std::vector<double>& cumulative() const { return cumulative_; }

  double inf_supp() const { return inf_supp_; }
  double sup_supp() const { return sup_supp_; }
  double mean() const { return mean_; }
  double second_moment() const { return second_moment_; }
  /// Total weight (atoms) or total mass (density).
  double total_mass() const { return total_mass_; }
  double mass_at_inf_supp() const;
  double mass_at_sup_supp() const;

  double cdf(double x) const;
  /// Density f(x); DomainError for atomic measures.
  double pdf(double x) const;
  /// F^{-1}(r) = inf{x : F(x) > r}. DomainError unless 0 < r < 1.
  double quantile(double r) const;
  double sample(RngStream& rng) const { return quantile(rng.uniform()); }

  bool operator==(const IncrementMeasure& o) const {
    return kind_ == o.kind_ && name_ == o.name_ && params_ == o.params_ && atoms_ == o.atoms_;
  }

 private:
  struct Table;
  void finish_atoms();

  MeasureKind kind_ = MeasureKind::atoms;
  std::string name_;
  std::map<std::string, double> params_;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
  double inf_supp_ = 0.0;
  double sup_supp_ = 0.0;
  double mean_ = 0.0;
  double second_moment_ = 0.0;
  double total_mass_ = 1.0;
  std::shared_ptr<const Table> table_;
};

struct MeasureReport {
  bool valid = true;
  std::vector<std::string> failures;
};

/// Checks normalization, centering, non-degeneracy and, when a boundary case
/// is given, the support bounds that case needs.
MeasureReport validate_measure(const IncrementMeasure& mu, std::optional<int> boundary_case = std::nullopt);

}  // namespace walkdiff
