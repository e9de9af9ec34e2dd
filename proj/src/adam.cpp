#include "aeromatch/adam.hpp"

#include <cmath>

namespace aeromatch {

AdamState AdamState::init(std::span<const Tensor> params, AdamConfig config) {
  AdamState st;
  st.config = config;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor& p : params) {
    st.m.emplace_back(static_cast<size_t>(p.size()), 0.0);
    st.v.emplace_back(static_cast<size_t>(p.size()), 0.0);
  }
  return st;
}

void adam_step(std::span<Tensor> params, AdamState& st) {
  if (params.size() != st.m.size() || params.size() != st.v.size())
    throw ShapeMismatch("adam_step: state tracks " + std::to_string(st.m.size()) +
                        " parameters, got " + std::to_string(params.size()));
  st.t += 1;
  const AdamConfig& c = st.config;
  const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (static_cast<size_t>(p.size()) != st.m[i].size())
      throw ShapeMismatch("adam_step: parameter " + std::to_string(i) +
                          " size changed");
    const double* g = p.grad();
    if (!g) throw ShapeMismatch("adam_step: parameter has no gradient buffer");
    double* w = p.data();
    double* m = st.m[i].data();
    double* v = st.v[i].data();
    for (int64_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      w[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace aeromatch
