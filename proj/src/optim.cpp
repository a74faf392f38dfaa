// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/optim.hpp"

#include <cmath>

#include "cmgan/error.hpp"

namespace cmgan {

template <typename T>
void adam_update(const std::vector<Parameter<T>*>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const Parameter<T>* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw UsageError("adam state does not match the parameter list");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.value.size() || p.grad.size() != p.value.size())
      throw UsageError("adam state shape mismatch for " + p.name);
    for (size_t i = 0; i < m.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double step = cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
      p.value[i] = static_cast<T>(p.value[i] - step);
    }
  }
}

template <typename T>
double grad_norm(const std::vector<Parameter<T>*>& params) {
  double s = 0;
  for (const Parameter<T>* p : params)
    for (T g : p->grad.data()) s += double(g) * g;
  return std::sqrt(s);
}

template void adam_update(const std::vector<Parameter<float>*>&, AdamState&, const AdamConfig&);
template void adam_update(const std::vector<Parameter<double>*>&, AdamState&, const AdamConfig&);
template double grad_norm(const std::vector<Parameter<float>*>&);
template double grad_norm(const std::vector<Parameter<double>*>&);

}  // namespace cmgan
