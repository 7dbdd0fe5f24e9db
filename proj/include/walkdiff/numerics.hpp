#pragma once

// Small numerical building blocks shared by the modules: the standard normal
// law and adaptive QUADPACK quadrature (GSL) that reports divergence instead
// of guessing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_integration.h>

namespace walkdiff {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse of normal_cdf on (0,1); returns -inf/+inf at 0/1.
inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return p < 0.5 ? gsl_cdf_ugaussian_Pinv(p) : -gsl_cdf_ugaussian_Pinv(1.0 - p);
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

namespace detail {

/// Borrows a GSL workspace for the current nesting level on this thread
/// (integrands may themselves integrate).
class Workspace {
 public:
  Workspace();
  ~Workspace();
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  gsl_integration_workspace* get() const { return ws_; }
  static constexpr std::size_t kLimit = 2000;

 private:
  gsl_integration_workspace* ws_;
};

template <class F>
double trampoline(double x, void* p) {
  return (*static_cast<F*>(p))(x);
}

QuadResult finish(int status, double value, double error, double rel_tol);

}  // namespace detail

/// Adaptive Gauss-Kronrod with extrapolation (QAGS family); either limit may
/// be infinite and `a > b` flips the sign. Non-finite results or an unmet
/// error target mark the result as not converged; the caller decides whether
/// that means divergence.
template <class F>
QuadResult quad(F&& f, double a, double b, double rel_tol) {
  if (a == b) return {};
  using Fn = std::remove_reference_t<F>;
  gsl_function g{&detail::trampoline<Fn>, const_cast<void*>(static_cast<const void*>(&f))};
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  detail::Workspace ws;
  double v = 0.0, err = 0.0;
  int status;
  if (std::isfinite(lo) && std::isfinite(hi))
    status = gsl_integration_qags(&g, lo, hi, 0.0, rel_tol, ws.kLimit, ws.get(), &v, &err);
  else if (std::isfinite(lo))
    status = gsl_integration_qagiu(&g, lo, 0.0, rel_tol, ws.kLimit, ws.get(), &v, &err);
  else if (std::isfinite(hi))
    status = gsl_integration_qagil(&g, hi, 0.0, rel_tol, ws.kLimit, ws.get(), &v, &err);
  else
    status = gsl_integration_qagi(&g, 0.0, rel_tol, ws.kLimit, ws.get(), &v, &err);
  QuadResult r = detail::finish(status, v, err, rel_tol);
  if (a > b) r.value = -r.value;
  return r;
}

/// quad over a finite range with known interior breakpoints (QAGP).
template <class F>
QuadResult quad_breaks(F&& f, double a, double b, std::span<const double> breaks, double rel_tol) {
  if (a == b) return {};
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  std::vector<double> pts{lo};
  for (double c : breaks)
    if (c > lo && c < hi) pts.push_back(c);
  if (pts.size() == 1) return quad(f, a, b, rel_tol);
  std::sort(pts.begin() + 1, pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  pts.push_back(hi);
  using Fn = std::remove_reference_t<F>;
  gsl_function g{&detail::trampoline<Fn>, const_cast<void*>(static_cast<const void*>(&f))};
  detail::Workspace ws;
  double v = 0.0, err = 0.0;
  const int status = gsl_integration_qagp(&g, pts.data(), pts.size(), 0.0, rel_tol, ws.kLimit, ws.get(), &v, &err);
  QuadResult r = detail::finish(status, v, err, rel_tol);
  if (a > b) r.value = -r.value;
  return r;
}

}  // namespace walkdiff
