#include "walkdiff/numerics.hpp"

#include <gsl/gsl_errno.h>

namespace walkdiff::detail {

namespace {

struct Pool {
  std::vector<gsl_integration_workspace*> free;
  std::size_t depth = 0;
  Pool() { gsl_set_error_handler_off(); }
  ~Pool() {
    for (auto* w : free) gsl_integration_workspace_free(w);
  }
};

thread_local Pool pool;

}  // namespace

Workspace::Workspace() {
  if (pool.depth == pool.free.size()) pool.free.push_back(gsl_integration_workspace_alloc(kLimit));
  ws_ = pool.free[pool.depth++];
}

Workspace::~Workspace() { --pool.depth; }

QuadResult finish(int status, double value, double error, double rel_tol) {
  QuadResult r{value, error, true};
  if (!std::isfinite(value) || !std::isfinite(error)) r.converged = false;
  else if (status != GSL_SUCCESS && error > 50.0 * rel_tol * std::abs(value) && error > 1e-300) r.converged = false;
  return r;
}

}  // namespace walkdiff::detail
