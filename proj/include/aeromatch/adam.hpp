#pragma once

#include <span>
#include <vector>

#include "aeromatch/tensor.hpp"

namespace aeromatch {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment state, aligned with one fixed parameter order.
struct AdamState {
  AdamConfig config;
  long t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState init(std::span<const Tensor> params, AdamConfig config = {});
};

/// Standard Adam update with bias correction, reading each parameter's
/// accumulated gradient. Increments state.t.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace aeromatch
