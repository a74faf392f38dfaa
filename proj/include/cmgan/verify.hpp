// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace cmgan {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;
  double seconds = 0;

  bool passed() const;
  // One "PASS|FAIL name: detail" line per check.
  std::string report() const;
};

// Central differences (double, e = 1e-4, tol 1e-5) for every differentiable
// op and for the full generator objective at (1, 1, 16, 16), over `seeds` seeds.
SuiteResult verify_gradcheck(int seeds = 10);

// Metrics and the differentiable MS-SSIM against the brute-force oracles on
// `pairs` random 64x64 pairs, within 1e-6.
SuiteResult verify_metrics(int pairs = 20);

// Spectrally normalised weights after `iterations` power iterations have a
// top singular value in [0.99, 1.01] against a dense SVD (up to 256x256).
SuiteResult verify_spectral(int iterations = 20, int trials = 20);

// gamma = 0 is the bit-exact identity; attention rows sum to 1 within 1e-6.
SuiteResult verify_attention();

// "gradcheck", "metrics", "spectral" or "attention"; ConfigError otherwise.
SuiteResult run_suite(const std::string& name);

}  // namespace cmgan
