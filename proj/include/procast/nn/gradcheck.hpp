#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "procast/nn/common.hpp"
#include "procast/nn/parameter.hpp"

namespace procast::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = 0;
};

// Central-difference verification. f() must recompute the scalar loss from
// current parameter values AND refresh every parameter's grad field; it must
// be deterministic across calls (dropout off or frozen, batch norm pure).
// Coordinates where both gradients sit below abs_tol count as matching: the
// difference quotient there is cancellation roundoff (~|loss|*eps_mach/eps),
// not signal. Gradients can be exactly 0, e.g. a batch-norm shift feeding a
// mean absolute error whose per-example signs cancel.
inline GradCheckResult grad_check(const std::function<double()>& f,
                                  const std::vector<Parameter*>& params, double eps = 1e-5,
                                  double abs_tol = 1e-7) {
  f();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + eps;
      const double up = f();
      p->value.data()[i] = saved - eps;
      const double down = f();
      p->value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi].data()[i];
      if (std::abs(a) <= abs_tol && std::abs(numeric) <= abs_tol) continue;
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p->name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace procast::nn
