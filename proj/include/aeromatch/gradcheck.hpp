#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aeromatch/tensor.hpp"

namespace aeromatch {

/// Central finite differences of `forward` against the recorded gradients of
/// `leaves`. `forward` must rebuild the graph from the leaves on every call;
/// it runs once under a tape for the analytic gradients and twice per leaf
/// element for the numeric ones. Relative error uses max(1,|ad|,|fd|).
double finite_diff_max_rel_err(const std::function<Tensor()>& forward,
                               std::span<const Tensor> leaves, double h = 1e-5);

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  bool all_pass = true;
  double seconds = 0.0;
};

struct GradCheckOptions {
  /// Harness self-test: added to one analytic conv2d gradient entry so the
  /// check must report conv2d as failing.
  double conv_grad_perturbation = 0.0;
};

/// Runs the finite-difference suite over every differentiable op plus the
/// loss terms and an end-to-end pass on a small model.
GradCheckReport run_gradcheck(uint64_t seed, const GradCheckOptions& opts = {});

}  // namespace aeromatch
