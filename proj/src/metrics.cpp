// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>

#include "cmgan/error.hpp"
#include "cmgan/parallel.hpp"
#include "json.hpp"

namespace cmgan {
namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr int kUqiWindow = 8;
constexpr double kC1 = (0.01 * kPeak) * (0.01 * kPeak);
constexpr double kC2 = (0.03 * kPeak) * (0.03 * kPeak);

void check_pair(const Image& a, const Image& b, int min_side, const char* what) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError(std::string(what) + ": image sizes differ (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width) + ")");
  if (a.height < min_side || a.width < min_side)
    throw DimensionError(std::string(what) + ": image smaller than the " + std::to_string(min_side) + " px window");
}

std::vector<double> gaussian_1d() {
  std::vector<double> g(kSsimWindow);
  double total = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - (kSsimWindow - 1) / 2.0;
    g[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-mode separable Gaussian filter.
Image filter_valid(const Image& img, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  Image rows(img.height, img.width - k + 1);
  for (int64_t y = 0; y < rows.height; ++y)
    for (int64_t x = 0; x < rows.width; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += g[i] * img.at(y, x + i);
      rows.at(y, x) = acc;
    }
  Image out(img.height - k + 1, rows.width);
  for (int64_t y = 0; y < out.height; ++y)
    for (int64_t x = 0; x < out.width; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += g[i] * rows.at(y + i, x);
      out.at(y, x) = acc;
    }
  return out;
}

Image product(const Image& a, const Image& b) {
  Image out(a.height, a.width);
  for (size_t i = 0; i < a.size(); ++i) out.pixels[i] = a.pixels[i] * b.pixels[i];
  return out;
}

// Mean cs and mean l*cs over the valid SSIM map.
std::pair<double, double> ssim_terms(const Image& a, const Image& b) {
  static const std::vector<double> g = gaussian_1d();
  Image mu_a = filter_valid(a, g), mu_b = filter_valid(b, g);
  Image aa = filter_valid(product(a, a), g), bb = filter_valid(product(b, b), g);
  Image ab = filter_valid(product(a, b), g);
  double cs_sum = 0, ssim_sum = 0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.pixels[i], mb = mu_b.pixels[i];
    const double va = aa.pixels[i] - ma * ma, vb = bb.pixels[i] - mb * mb, cov = ab.pixels[i] - ma * mb;
    const double cs = (2 * cov + kC2) / (va + vb + kC2);
    cs_sum += cs;
    ssim_sum += cs * (2 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
  }
  const double n = static_cast<double>(mu_a.size());
  return {cs_sum / n, ssim_sum / n};
}

Image halve(const Image& img) {
  Image out((img.height + 1) / 2, (img.width + 1) / 2);
  for (int64_t y = 0; y < out.height; ++y) {
    const int64_t y0 = 2 * y, y1 = 2 * y + 1 < img.height ? 2 * y + 1 : img.height - 2;
    for (int64_t x = 0; x < out.width; ++x) {
      const int64_t x0 = 2 * x, x1 = 2 * x + 1 < img.width ? 2 * x + 1 : img.width - 2;
      out.at(y, x) = 0.25 * (img.at(y0, x0) + img.at(y0, x1) + img.at(y1, x0) + img.at(y1, x1));
    }
  }
  return out;
}

// Summed-area table with a zero first row and column.
class Integral {
 public:
  template <typename F>
  Integral(int64_t h, int64_t w, F value) : w_(w + 1), s_(static_cast<size_t>((h + 1) * (w + 1)), 0.0) {
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        s_[idx(y + 1, x + 1)] = value(y, x) + s_[idx(y, x + 1)] + s_[idx(y + 1, x)] - s_[idx(y, x)];
  }
  // Sum over rows [y, y + hh), cols [x, x + ww).
  double box(int64_t y, int64_t x, int64_t hh, int64_t ww) const {
    return s_[idx(y + hh, x + ww)] - s_[idx(y, x + ww)] - s_[idx(y + hh, x)] + s_[idx(y, x)];
  }

 private:
  size_t idx(int64_t y, int64_t x) const { return static_cast<size_t>(y * w_ + x); }
  int64_t w_;
  std::vector<double> s_;
};

double mean_of(const Image& img) {
  double s = 0;
  for (double v : img.pixels) s += v;
  return s / static_cast<double>(img.size());
}

}  // namespace

double mse(const Image& a, const Image& b) {
  check_pair(a, b, 1, "mse");
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / m);
}

double ssim(const Image& a, const Image& b) {
  check_pair(a, b, kSsimWindow, "ssim");
  return ssim_terms(a, b).second;
}

double uqi(const Image& a, const Image& b) {
  check_pair(a, b, kUqiWindow, "uqi");
  const int64_t h = a.height, w = a.width, k = kUqiWindow;
  // Second moments from mean-shifted data to limit cancellation.
  const double sa = mean_of(a), sb = mean_of(b);
  auto ca = [&](int64_t y, int64_t x) { return a.at(y, x) - sa; };
  auto cb = [&](int64_t y, int64_t x) { return b.at(y, x) - sb; };
  Integral ia(h, w, ca), ib(h, w, cb);
  Integral iaa(h, w, [&](int64_t y, int64_t x) { return ca(y, x) * ca(y, x); });
  Integral ibb(h, w, [&](int64_t y, int64_t x) { return cb(y, x) * cb(y, x); });
  Integral iab(h, w, [&](int64_t y, int64_t x) { return ca(y, x) * cb(y, x); });
  // Counts of unequal neighbours decide constancy and equality exactly.
  auto count = [&](auto pred) { return Integral(h, w, [&](int64_t y, int64_t x) { return pred(y, x) ? 1.0 : 0.0; }); };
  Integral ha = count([&](int64_t y, int64_t x) { return x + 1 < w && a.at(y, x) != a.at(y, x + 1); });
  Integral va = count([&](int64_t y, int64_t x) { return y + 1 < h && a.at(y, x) != a.at(y + 1, x); });
  Integral hb = count([&](int64_t y, int64_t x) { return x + 1 < w && b.at(y, x) != b.at(y, x + 1); });
  Integral vb = count([&](int64_t y, int64_t x) { return y + 1 < h && b.at(y, x) != b.at(y + 1, x); });

  const double n = static_cast<double>(k * k);
  double total = 0;
  for (int64_t y = 0; y + k <= h; ++y)
    for (int64_t x = 0; x + k <= w; ++x) {
      const bool const_a = ha.box(y, x, k, k - 1) == 0 && va.box(y, x, k - 1, k) == 0;
      const bool const_b = hb.box(y, x, k, k - 1) == 0 && vb.box(y, x, k - 1, k) == 0;
      if (const_a && const_b) {
        total += a.at(y, x) == b.at(y, x) ? 1.0 : 0.0;
        continue;
      }
      const double suma = ia.box(y, x, k, k), sumb = ib.box(y, x, k, k);
      const double ma = suma / n + sa, mb = sumb / n + sb;
      const double var_a = iaa.box(y, x, k, k) - suma * suma / n;
      const double var_b = ibb.box(y, x, k, k) - sumb * sumb / n;
      const double cov = iab.box(y, x, k, k) - suma * sumb / n;
      const double den = (var_a + var_b) * (ma * ma + mb * mb);
      total += den == 0 ? 0.0 : 4 * cov * ma * mb / den;
    }
  return total / static_cast<double>((h - k + 1) * (w - k + 1));
}

double ms_ssim(const Image& a0, const Image& b0) {
  check_pair(a0, b0, kSsimWindow, "ms_ssim");
  int scales = 0;
  for (int64_t h = a0.height, w = a0.width; h >= kSsimWindow && w >= kSsimWindow && scales < 5;
       h = (h + 1) / 2, w = (w + 1) / 2)
    ++scales;
  Image a = a0, b = b0;
  double result = 1;
  for (int j = 0; j < scales; ++j) {
    auto [cs, full] = ssim_terms(a, b);
    const double m = j + 1 == scales ? full : cs;
    result *= m > 0 ? std::pow(m, 1.0 / scales) : 0.0;
    if (j + 1 < scales) {
      a = halve(a);
      b = halve(b);
    }
  }
  return result;
}

MetricsRow aggregate_rows(const std::vector<MetricsRow>& rows) {
  MetricsRow agg;
  agg.image = "AGGREGATE";
  if (rows.empty()) {
    agg.ssim = agg.psnr_db = agg.mse = agg.uqi = std::numeric_limits<double>::quiet_NaN();
    return agg;
  }
  for (const MetricsRow& r : rows) {
    agg.ssim += r.ssim;
    agg.psnr_db += r.psnr_db;
    agg.mse += r.mse;
    agg.uqi += r.uqi;
  }
  const double n = static_cast<double>(rows.size());
  agg.ssim /= n;
  agg.psnr_db /= n;
  agg.mse /= n;
  agg.uqi /= n;
  return agg;
}

MetricsReport evaluate_dataset(const std::string& corrected_dir, const std::string& reference_dir,
                               unsigned threads) {
  namespace fs = std::filesystem;
  auto list = [](const std::string& dir) {
    std::set<std::string> names;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") names.insert(e.path().filename().string());
    return names;
  };
  const std::set<std::string> corrected = list(corrected_dir), reference = list(reference_dir);
  MetricsReport report;
  report.metadata["corrected_dir"] = corrected_dir;
  report.metadata["reference_dir"] = reference_dir;
  std::vector<std::string> paired;
  for (const std::string& name : corrected) {
    if (reference.count(name))
      paired.push_back(name);
    else
      report.errors.push_back(name + ": no counterpart in " + reference_dir);
  }
  for (const std::string& name : reference)
    if (!corrected.count(name)) report.errors.push_back(name + ": no counterpart in " + corrected_dir);

  std::vector<MetricsRow> rows(paired.size());
  std::vector<std::string> failures(paired.size());
  parallel_for(paired.size(), [&](size_t i) {
    try {
      const Image a = to_255(read_png((fs::path(corrected_dir) / paired[i]).string()));
      const Image b = to_255(read_png((fs::path(reference_dir) / paired[i]).string()));
      rows[i] = MetricsRow{paired[i], ssim(a, b), psnr(a, b), mse(a, b), uqi(a, b)};
    } catch (const Error& e) {
      failures[i] = paired[i] + ": " + e.what();
    }
  }, threads);
  for (size_t i = 0; i < paired.size(); ++i) {
    if (failures[i].empty())
      report.rows.push_back(rows[i]);
    else
      report.errors.push_back(failures[i]);
  }
  report.aggregate = aggregate_rows(report.rows);
  return report;
}

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string metrics_csv(const MetricsReport& report) {
  std::string out = "image,ssim,psnr_db,mse,uqi\n";
  auto line = [&](const MetricsRow& r) {
    out += r.image + "," + format_metric(r.ssim) + "," + format_metric(r.psnr_db) + "," + format_metric(r.mse) +
           "," + format_metric(r.uqi) + "\n";
  };
  for (const MetricsRow& r : report.rows) line(r);
  line(report.aggregate);
  return out;
}

std::string metrics_json(const MetricsReport& report) {
  using nlohmann::json;
  auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return format_metric(v);
  };
  auto row = [&](const MetricsRow& r) {
    return json{{"image", r.image}, {"ssim", num(r.ssim)}, {"psnr_db", num(r.psnr_db)}, {"mse", num(r.mse)},
                {"uqi", num(r.uqi)}};
  };
  json j;
  j["rows"] = json::array();
  for (const MetricsRow& r : report.rows) j["rows"].push_back(row(r));
  j["aggregate"] = row(report.aggregate);
  j["errors"] = report.errors;
  j["metadata"] = report.metadata;
  return j.dump(2) + "\n";
}

}  // namespace cmgan
