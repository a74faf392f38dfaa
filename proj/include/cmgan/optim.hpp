// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cmgan/graph.hpp"

namespace cmgan {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments are stored in double regardless of the parameter precision.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  int64_t step = 0;
};

// Bias-corrected Adam step over `params` using their accumulated `grad`.
// Grads are left untouched. The state is sized on first use.
template <typename T>
void adam_update(const std::vector<Parameter<T>*>& params, AdamState& state, const AdamConfig& cfg);

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (Parameter<T>* p : params) p->zero_grad();
}

// Euclidean norm over all gradients.
template <typename T>
double grad_norm(const std::vector<Parameter<T>*>& params);

}  // namespace cmgan
