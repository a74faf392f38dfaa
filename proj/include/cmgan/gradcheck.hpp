// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cmgan/graph.hpp"

namespace cmgan {

struct GradcheckOptions {
  double eps = 1e-4;
  double tol = 1e-5;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  // Elements checked per tensor; 0 checks every element.
  size_t max_elements = 0;
  uint64_t seed = 0;
  // Skip elements whose perturbation straddles a relu/abs kink. For smooth f
  // the second difference scales as e^2, so sd(e) ~= 4 sd(e/2) ~= 16 sd(e/4);
  // a crossing breaks those ratios. Elements where the discrepancy, or the
  // central difference's own h^2 truncation error, could exceed the tolerance
  // are retried with a step ten times smaller, `kink_retries` times, then
  // skipped and the next sampled element is checked instead. The decision
  // only uses function values, never the analytic gradient.
  bool skip_kinks = false;
  int kink_retries = 2;
};

struct GradcheckEntry {
  std::string tensor;
  size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0;
  size_t kinks_skipped = 0;
  // Tensors in which every sampled element was skipped.
  std::vector<std::string> unchecked;
  // False when an entry fails or nothing could be checked.
  bool passed = true;
  std::string summary() const;
};

// Scalar-valued function of one input tensor, built on a fresh graph.
using GradFn = std::function<Var<double>(Graph<double>&, const Var<double>&)>;

// Central differences w.r.t. the entries of `point`.
GradcheckReport gradcheck(const GradFn& f, const Tensor<double>& point,
                          const GradcheckOptions& opt = {});

// Central differences w.r.t. parameters that `loss` binds with Graph::param.
// Values are perturbed in place and restored afterwards.
using ParamLossFn = std::function<Var<double>(Graph<double>&)>;
GradcheckReport gradcheck_params(const ParamLossFn& loss, const std::vector<Parameter<double>*>& params,
                                 const GradcheckOptions& opt = {});

}  // namespace cmgan
