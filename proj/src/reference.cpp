// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/reference.hpp"

#include <cmath>
#include <limits>

#include "cmgan/error.hpp"

namespace cmgan::reference {
namespace {

void same_shape(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width) throw DimensionError("reference: image shapes differ");
}

std::vector<double> window_2d(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size * size));
  const double c = (size - 1) / 2.0;
  double total = 0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double r2 = (i - c) * (i - c) + (j - c) * (j - c);
      w[static_cast<size_t>(i * size + j)] = std::exp(-r2 / (2 * sigma * sigma));
      total += w[static_cast<size_t>(i * size + j)];
    }
  for (double& v : w) v /= total;
  return w;
}

struct WindowStats {
  double mu_a, mu_b, var_a, var_b, cov;
};

WindowStats stats_at(const Image& a, const Image& b, const std::vector<double>& w, int size, int64_t y0,
                     int64_t x0) {
  WindowStats s{0, 0, 0, 0, 0};
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double k = w[static_cast<size_t>(i * size + j)];
      s.mu_a += k * a.at(y0 + i, x0 + j);
      s.mu_b += k * b.at(y0 + i, x0 + j);
    }
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double k = w[static_cast<size_t>(i * size + j)];
      const double da = a.at(y0 + i, x0 + j) - s.mu_a, db = b.at(y0 + i, x0 + j) - s.mu_b;
      s.var_a += k * da * da;
      s.var_b += k * db * db;
      s.cov += k * da * db;
    }
  return s;
}

Image halve(const Image& img) {
  Image out((img.height + 1) / 2, (img.width + 1) / 2);
  auto px = [&](int64_t y, int64_t x) {
    if (y >= img.height) y = img.height - 2;
    if (x >= img.width) x = img.width - 2;
    return img.at(y, x);
  };
  for (int64_t y = 0; y < out.height; ++y)
    for (int64_t x = 0; x < out.width; ++x)
      out.at(y, x) = (px(2 * y, 2 * x) + px(2 * y, 2 * x + 1) + px(2 * y + 1, 2 * x) + px(2 * y + 1, 2 * x + 1)) / 4;
  return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  same_shape(a, b);
  double s = 0;
  for (int64_t y = 0; y < a.height; ++y)
    for (int64_t x = 0; x < a.width; ++x) {
      const double d = a.at(y, x) - b.at(y, x);
      s += d * d;
    }
  return s / static_cast<double>(a.height * a.width);
}

double psnr(const Image& a, const Image& b, double peak) {
  const double m = mse(a, b);
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Image& a, const Image& b, double c1, double c2, int window, double sigma) {
  same_shape(a, b);
  if (a.height < window || a.width < window) throw DimensionError("reference ssim: image smaller than window");
  const auto w = window_2d(window, sigma);
  double total = 0;
  int64_t count = 0;
  for (int64_t y = 0; y + window <= a.height; ++y)
    for (int64_t x = 0; x + window <= a.width; ++x) {
      const WindowStats s = stats_at(a, b, w, window, y, x);
      total += ((2 * s.mu_a * s.mu_b + c1) * (2 * s.cov + c2)) /
               ((s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) * (s.var_a + s.var_b + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

double uqi(const Image& a, const Image& b, int window) {
  same_shape(a, b);
  if (a.height < window || a.width < window) throw DimensionError("reference uqi: image smaller than window");
  const double n = static_cast<double>(window * window);
  double total = 0;
  int64_t count = 0;
  for (int64_t y = 0; y + window <= a.height; ++y)
    for (int64_t x = 0; x + window <= a.width; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j) {
          ma += a.at(y + i, x + j);
          mb += b.at(y + i, x + j);
        }
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cov = 0;
      bool equal = true, const_a = true, const_b = true;
      for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j) {
          const double pa = a.at(y + i, x + j), pb = b.at(y + i, x + j);
          va += (pa - ma) * (pa - ma);
          vb += (pb - mb) * (pb - mb);
          cov += (pa - ma) * (pb - mb);
          equal = equal && pa == pb;
          const_a = const_a && pa == a.at(y, x);
          const_b = const_b && pb == b.at(y, x);
        }
      va /= n - 1;
      vb /= n - 1;
      cov /= n - 1;
      double q;
      if (const_a && const_b) {
        q = equal ? 1.0 : 0.0;
      } else {
        const double den = (va + vb) * (ma * ma + mb * mb);
        q = den == 0 ? 0.0 : 4 * cov * ma * mb / den;
      }
      total += q;
      ++count;
    }
  return total / static_cast<double>(count);
}

double ms_ssim(const Image& a0, const Image& b0, int scales, double c1, double c2, int window, double sigma) {
  same_shape(a0, b0);
  const auto w = window_2d(window, sigma);
  Image a = a0, b = b0;
  double result = 1;
  for (int j = 0; j < scales; ++j) {
    if (a.height < window || a.width < window) throw ConfigError("reference ms_ssim: too many scales");
    double total = 0;
    int64_t count = 0;
    for (int64_t y = 0; y + window <= a.height; ++y)
      for (int64_t x = 0; x + window <= a.width; ++x) {
        const WindowStats s = stats_at(a, b, w, window, y, x);
        double v = (2 * s.cov + c2) / (s.var_a + s.var_b + c2);
        if (j + 1 == scales) v *= (2 * s.mu_a * s.mu_b + c1) / (s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1);
        total += v;
        ++count;
      }
    const double m = total / static_cast<double>(count);
    result *= m > 0 ? std::pow(m, 1.0 / scales) : 0.0;
    a = halve(a);
    b = halve(b);
  }
  return result;
}

}  // namespace cmgan::reference
