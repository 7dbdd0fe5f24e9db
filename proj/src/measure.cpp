#include "walkdiff/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "walkdiff/numerics.hpp"

namespace walkdiff {

namespace {

double rational_kernel(double x) { return std::exp(-std::abs(x)) / (1.0 + x * x); }

// Fixed 10-point Gauss-Legendre integral of rational_kernel over [a, b].
double panel_integral(double a, double b) {
  static const gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(10);
  gsl_function g{[](double x, void*) { return rational_kernel(x); }, nullptr};
  return gsl_integration_glfixed(&g, a, b, table);
}

}  // namespace

// Cumulative integrals of exp(-x)/(1+x^2) on a uniform grid over [0, kMax].
struct IncrementMeasure::Table {
  static constexpr double kStep = 0.01;
  static constexpr double kMax = 60.0;
  double c = 0.0;
  std::vector<double> cum;

  Table() {
    const auto n = static_cast<std::size_t>(kMax / kStep);
    cum.resize(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = static_cast<double>(k) * kStep;
      cum[k + 1] = cum[k] + panel_integral(a, a + kStep);
    }
    c = 0.5 / cum.back();
  }

  // Mass of [0, x] for x >= 0.
  double half_cdf(double x) const {
    if (x >= kMax) return 0.5;
    const auto k = static_cast<std::size_t>(x / kStep);
    const double a = static_cast<double>(k) * kStep;
    return c * (cum[k] + panel_integral(a, x));
  }

  // x >= 0 with half_cdf(x) = t, for 0 <= t < 0.5.
  double invert(double t) const {
    const double target = t / c;
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    if (it == cum.end()) return kMax;
    const auto k = static_cast<std::size_t>(it - cum.begin()) - 1;
    double lo = static_cast<double>(k) * kStep;
    double hi = lo + kStep;
    double x = lo + (target - cum[k]) / (cum[k + 1] - cum[k]) * kStep;
    for (int iter = 0; iter < 60; ++iter) {
      const double g = half_cdf(x) - t;
      if (g > 0.0) hi = x;
      else lo = x;
      double next = x - g / (c * rational_kernel(x));
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) <= 1e-15 * (1.0 + x)) return next;
      x = next;
    }
    return x;
  }
};

IncrementMeasure IncrementMeasure::from_atoms(std::vector<Atom> atoms) {
  IncrementMeasure mu;
  mu.kind_ = MeasureKind::atoms;
  mu.name_ = "atoms";
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  for (const Atom& a : atoms) {
    if (!mu.atoms_.empty() && mu.atoms_.back().x == a.x) mu.atoms_.back().w += a.w;
    else mu.atoms_.push_back(a);
  }
  mu.finish_atoms();
  return mu;
}

IncrementMeasure IncrementMeasure::rademacher() {
  IncrementMeasure mu = from_atoms({{-1.0, 0.5}, {1.0, 0.5}});
  mu.name_ = "rademacher";
  return mu;
}

void IncrementMeasure::finish_atoms() {
  if (atoms_.empty()) throw Error(ErrorCode::ValidationError, "measure has no atoms");
  cumulative_.clear();
  double acc = 0.0;
  mean_ = 0.0;
  second_moment_ = 0.0;
  for (const Atom& a : atoms_) {
    require_finite(a.x, "atom location");
    require_finite(a.w, "atom weight");
    if (!std::isfinite(a.x)) throw Error(ErrorCode::NonFiniteInput, "atom location must be finite");
    acc += a.w;
    cumulative_.push_back(acc);
    mean_ += a.w * a.x;
    second_moment_ += a.w * a.x * a.x;
  }
  total_mass_ = acc;
  inf_supp_ = atoms_.front().x;
  sup_supp_ = atoms_.back().x;
}

IncrementMeasure IncrementMeasure::from_density(const std::string& name, const std::map<std::string, double>& params) {
  IncrementMeasure mu;
  mu.kind_ = MeasureKind::density;
  mu.name_ = name;
  mu.params_ = params;
  auto only = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : params)
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
        throw Error(ErrorCode::ValidationError, name + ": unknown parameter '" + k + "'");
  };
  auto positive = [&](const char* key, double fallback) {
    auto it = params.find(key);
    const double v = it == params.end() ? fallback : it->second;
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::ValidationError, name + ": parameter '" + key + "' must be positive");
    mu.params_[key] = v;
    return v;
  };
  if (name == "uniform") {
    only({"a"});
    const double a = positive("a", 1.0);
    mu.inf_supp_ = -a;
    mu.sup_supp_ = a;
    mu.second_moment_ = a * a / 3.0;
  } else if (name == "triangular") {
    only({"a"});
    const double a = positive("a", 1.0);
    mu.inf_supp_ = -a;
    mu.sup_supp_ = a;
    mu.second_moment_ = a * a / 6.0;
  } else if (name == "normal") {
    only({"sigma"});
    const double s = positive("sigma", 1.0);
    mu.inf_supp_ = -kInf;
    mu.sup_supp_ = kInf;
    mu.second_moment_ = s * s;
  } else if (name == "exp_rational") {
    only({});
    static const std::shared_ptr<const Table> table = std::make_shared<Table>();
    mu.table_ = table;
    mu.inf_supp_ = -kInf;
    mu.sup_supp_ = kInf;
    auto m2 = [](double x) { return x * x * rational_kernel(x); };
    mu.second_moment_ = 2.0 * table->c * quad(m2, 0.0, kInf, 1e-12).value;
  } else {
    throw Error(ErrorCode::ValidationError, "unknown density '" + name + "'");
  }
  return mu;
}

double IncrementMeasure::mass_at_inf_supp() const {
  return kind_ == MeasureKind::atoms ? atoms_.front().w : 0.0;
}

double IncrementMeasure::mass_at_sup_supp() const {
  return kind_ == MeasureKind::atoms ? atoms_.back().w : 0.0;
}

double IncrementMeasure::cdf(double x) const {
  require_finite(x, "x");
  if (kind_ == MeasureKind::atoms) {
    auto it = std::upper_bound(atoms_.begin(), atoms_.end(), x, [](double v, const Atom& a) { return v < a.x; });
    return it == atoms_.begin() ? 0.0 : cumulative_[static_cast<std::size_t>(it - atoms_.begin()) - 1];
  }
  if (name_ == "uniform") {
    const double a = params_.at("a");
    return std::clamp((x + a) / (2.0 * a), 0.0, 1.0);
  }
  if (name_ == "triangular") {
    const double a = params_.at("a");
    if (x <= -a) return 0.0;
    if (x >= a) return 1.0;
    const double u = (a - std::abs(x)) / a;
    return x <= 0.0 ? 0.5 * u * u : 1.0 - 0.5 * u * u;
  }
  if (name_ == "normal") return normal_cdf(x / params_.at("sigma"));
  const double h = table_->half_cdf(std::abs(x));
  return x >= 0.0 ? 0.5 + h : 0.5 - h;
}

double IncrementMeasure::pdf(double x) const {
  if (kind_ == MeasureKind::atoms) throw Error(ErrorCode::DomainError, "atomic measure has no density");
  if (name_ == "uniform") {
    const double a = params_.at("a");
    return std::abs(x) <= a ? 0.5 / a : 0.0;
  }
  if (name_ == "triangular") {
    const double a = params_.at("a");
    return std::abs(x) <= a ? (a - std::abs(x)) / (a * a) : 0.0;
  }
  if (name_ == "normal") {
    const double s = params_.at("sigma");
    return normal_pdf(x / s) / s;
  }
  return table_->c * rational_kernel(x);
}

double IncrementMeasure::quantile(double r) const {
  if (!(r > 0.0 && r < 1.0)) throw Error(ErrorCode::DomainError, "quantile level must lie in (0, 1)");
  if (kind_ == MeasureKind::atoms) {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    if (it == cumulative_.end()) return atoms_.back().x;
    return atoms_[static_cast<std::size_t>(it - cumulative_.begin())].x;
  }
  if (name_ == "uniform") {
    const double a = params_.at("a");
    return -a + 2.0 * a * r;
  }
  if (name_ == "triangular") {
    const double a = params_.at("a");
    return r <= 0.5 ? -a + a * std::sqrt(2.0 * r) : a - a * std::sqrt(2.0 * (1.0 - r));
  }
  if (name_ == "normal") return params_.at("sigma") * normal_quantile(r);
  return r >= 0.5 ? table_->invert(r - 0.5) : -table_->invert(0.5 - r);
}

MeasureReport validate_measure(const IncrementMeasure& mu, std::optional<int> boundary_case) {
  MeasureReport rep;
  auto fail = [&](std::string msg) {
    rep.valid = false;
    rep.failures.push_back(std::move(msg));
  };
  if (mu.kind() == MeasureKind::atoms) {
    for (const Atom& a : mu.atoms())
      if (!(a.w > 0.0 && a.w <= 1.0)) fail("weights: every atom weight must lie in (0, 1]");
    if (std::abs(mu.total_mass() - 1.0) > 1e-9) fail("normalization: weights sum to " + std::to_string(mu.total_mass()));
    if (std::abs(mu.mean()) > 1e-12) fail("centering: mean is " + std::to_string(mu.mean()) + ", expected 0");
    if (mu.second_moment() == 0.0) fail("non-degeneracy: measure is the point mass at 0");
  }
  if (boundary_case) {
    const bool need_inf = *boundary_case == 2 || *boundary_case == 4;
    const bool need_sup = *boundary_case == 3 || *boundary_case == 4;
    if (need_inf && !std::isfinite(mu.inf_supp())) fail("support: finite lower support bound required for this interval");
    if (need_sup && !std::isfinite(mu.sup_supp())) fail("support: finite upper support bound required for this interval");
  }
  return rep;
}

}  // namespace walkdiff
