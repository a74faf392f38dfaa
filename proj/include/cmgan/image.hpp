// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cmgan/tensor.hpp"

namespace cmgan {

// Row-major grayscale image. Pixel range depends on context: [0, 1] for
// simulation, [0, 255] for metrics.
struct Image {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int64_t h, int64_t w, double fill = 0) : height(h), width(w), pixels(static_cast<size_t>(h * w), fill) {}

  double& at(int64_t y, int64_t x) { return pixels[static_cast<size_t>(y * width + x)]; }
  double at(int64_t y, int64_t x) const { return pixels[static_cast<size_t>(y * width + x)]; }
  size_t size() const { return pixels.size(); }
};

// 8-bit grayscale PNG. Values are stored as round(clamp(v, 0, 1) * 255).
void write_png(const std::string& path, const Image& img);
// Loads an 8-bit (or 16-bit, reduced) grayscale or colour PNG as luma in [0, 1].
Image read_png(const std::string& path);

// [0, 1] image <-> (1, 1, h, w) tensor in [-1, 1].
template <typename T>
Tensor<T> to_tensor(const Image& img);
template <typename T>
Image from_tensor(const Tensor<T>& t, int64_t index = 0);

// [0, 1] -> [0, 255] after 8-bit quantisation, as used by the metrics.
Image to_255(const Image& img);

}  // namespace cmgan
