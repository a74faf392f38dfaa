// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cmgan/image.hpp"

// Deliberately naive implementations (direct window loops, no separable
// filtering or running sums) used to cross-check the production code.
namespace cmgan::reference {

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b, double peak = 255.0);

// Mean of the Gaussian-windowed SSIM map over valid window positions.
double ssim(const Image& a, const Image& b, double c1, double c2, int window = 11, double sigma = 1.5);

// Mean over all 8x8 windows (stride 1) of the universal quality index.
// A window where both patches are constant scores 1 if they are equal, else 0.
double uqi(const Image& a, const Image& b, int window = 8);

// Product over scales of mean(cs)^(1/M), with mean(l * cs) at the coarsest
// scale; 2x2 mean downsampling, odd sizes padded by reflection.
double ms_ssim(const Image& a, const Image& b, int scales, double c1, double c2, int window = 11,
               double sigma = 1.5);

}  // namespace cmgan::reference
