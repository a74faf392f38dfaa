// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "cmgan/image.hpp"

namespace cmgan {

// All metrics take [0, 255] images.
constexpr double kPeak = 255.0;

double mse(const Image& a, const Image& b);
// +inf for identical images.
double psnr(const Image& a, const Image& b);
// Mean Gaussian-windowed (11, sigma 1.5) SSIM over valid window positions.
double ssim(const Image& a, const Image& b);
// Mean universal quality index over all 8x8 windows, stride 1. Windows in
// which both patches are constant score 1 when equal and 0 otherwise.
double uqi(const Image& a, const Image& b);
// Diagnostic MS-SSIM with as many scales (up to 5) as the size allows.
double ms_ssim(const Image& a, const Image& b);

struct MetricsRow {
  std::string image;
  double ssim = 0;
  double psnr_db = 0;
  double mse = 0;
  double uqi = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  // Means over rows; NaN when there are none.
  MetricsRow aggregate;
  std::vector<std::string> errors;
  std::map<std::string, std::string> metadata;
};

// Pairs PNG files with equal names in the two directories, in filename order.
// Unmatched or unreadable files are listed in `errors` and left out.
MetricsReport evaluate_dataset(const std::string& corrected_dir, const std::string& reference_dir,
                               unsigned threads = 0);

MetricsRow aggregate_rows(const std::vector<MetricsRow>& rows);

// `image,ssim,psnr_db,mse,uqi` rows then `AGGREGATE`; infinity as `inf`.
std::string metrics_csv(const MetricsReport& report);
std::string metrics_json(const MetricsReport& report);
// Formats a value the way the CSV does.
std::string format_metric(double v);

}  // namespace cmgan
