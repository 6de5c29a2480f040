#pragma once

// Central finite-difference checking. The forward callable rebuilds its graph
// from the leaf tensors' current values on every call, so perturbing a leaf
// coordinate and re-evaluating gives an independent numeric derivative.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bioee/autodiff.hpp"

namespace bioee::ad {

struct GradCheckResult {
  double max_rel_err = 0.0;
  bool ok = true;
  std::string worst;

  void merge(const GradCheckResult& other) {
    if (other.max_rel_err > max_rel_err) {
      max_rel_err = other.max_rel_err;
      worst = other.worst;
    }
    ok = ok && other.ok;
  }
};

inline GradCheckResult grad_check(std::vector<Tensor> leaves, const std::function<Tensor()>& forward,
                                  double eps = 1e-5, double tol = 1e-4, const std::string& tag = "") {
  GradCheckResult result;
  for (Tensor& leaf : leaves) leaf.clear_grad();
  backward(forward());

  std::vector<std::vector<double>> analytic;
  for (Tensor& leaf : leaves) {
    leaf.node()->ensure_grad();
    analytic.push_back(leaf.grad());
  }

  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& values = leaves[li].mutable_values();
    for (size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double f_plus = forward().scalar_value();
      values[i] = saved - eps;
      const double f_minus = forward().scalar_value();
      values[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[li][i];
      const double rel = std::abs(a - numeric) / std::max(1e-3, std::abs(a) + std::abs(numeric));
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = tag + " leaf " + std::to_string(li) + " index " + std::to_string(i) + " analytic " +
                       std::to_string(a) + " numeric " + std::to_string(numeric);
      }
    }
  }
  result.ok = result.max_rel_err < tol;
  return result;
}

}  // namespace bioee::ad
