#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "banet/nn/param_store.hpp"

namespace banet::nn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  std::string worst_param;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check of every parameter against the analytic gradient.
// compute_grads must fill store's gradients for a fixed input; loss_fn must
// evaluate the same loss at the current parameters (identical rng/masks).
// Relative error: |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckResult grad_check(ParamStore& store,
                                  const std::function<void()>& compute_grads,
                                  const std::function<double()>& loss_fn,
                                  double h = 1e-5) {
  store.zero_grads();
  compute_grads();
  const std::vector<double> analytic(store.all_grads().begin(), store.all_grads().end());
  auto values = store.all_values();
  GradCheckResult res;
  for (size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double lp = loss_fn();
    values[i] = saved - h;
    const double lm = loss_fn();
    values[i] = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double a = analytic[i];
    const double rel =
        std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
      res.analytic = a;
      res.numeric = numeric;
    }
  }
  res.worst_param = store.param_name(res.worst_index);
  return res;
}

} // namespace banet::nn
