#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tavp/tape.hpp"

namespace tavp::testing {

// Central finite-difference check of d(loss)/d(param) for every parameter
// coordinate (or a seeded subset of up to max_coords per tensor). The loss
// builder must construct a fresh tape from the store each call and return the
// scalar loss value; the same builder is used for the analytic gradient.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_coord = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int64_t checked = 0;
};

inline GradCheckResult gradcheck(net::ParamStore& store,
                                 const std::function<double(bool)>& run,
                                 const std::vector<std::string>& param_names, uint64_t seed,
                                 double step = 1e-5, int64_t max_coords = 24) {
  // run(true) must do forward+backward and leave gradients in the store;
  // run(false) is forward-only and returns the loss.
  store.zero_grads();
  run(true);

  GradCheckResult res;
  Rng rng(derive_seed(seed, "gradcheck"));
  for (const auto& name : param_names) {
    net::Tensor& value = store.value(name);
    const net::Tensor grad = store.grad(name);  // copy; perturbed runs re-accumulate
    std::vector<int64_t> coords;
    if (value.numel() <= max_coords) {
      for (int64_t i = 0; i < value.numel(); ++i) coords.push_back(i);
    } else {
      for (int64_t i = 0; i < max_coords; ++i)
        coords.push_back(static_cast<int64_t>(rng.bounded(value.numel())));
    }
    for (int64_t c : coords) {
      const double saved = value.data[c];
      value.data[c] = saved + step;
      const double up = run(false);
      value.data[c] = saved - step;
      const double down = run(false);
      value.data[c] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grad.data[c];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-2});
      const double rel = std::abs(numeric - analytic) / denom;
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = name;
        res.worst_coord = c;
        res.analytic = analytic;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace tavp::testing
