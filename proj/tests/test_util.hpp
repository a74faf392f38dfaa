// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "cmgan/rng.hpp"
#include "cmgan/tensor.hpp"

namespace cmgan::testing {

template <typename T = double>
Tensor<T> random_tensor(Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<T> t(s);
  for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Values bounded away from zero, for gradchecks of ops with a kink at 0.
inline Tensor<double> random_away_from_zero(Shape s, uint64_t seed, double margin = 0.05) {
  Rng rng(seed);
  Tensor<double> t(s);
  for (size_t i = 0; i < t.size(); ++i) {
    double v = rng.uniform(margin, 1.0);
    t[i] = rng.uniform() < 0.5 ? -v : v;
  }
  return t;
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("cmgan_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

}  // namespace cmgan::testing
