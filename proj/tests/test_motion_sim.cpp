// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cmgan/error.hpp"
#include "cmgan/metrics.hpp"
#include "cmgan/motion_sim.hpp"
#include "cmgan/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cmgan;
namespace fs = std::filesystem;
using cmgan::testing::TempDir;

namespace {

Image noise_image(int64_t n, uint64_t seed) {
  Rng rng(seed);
  Image img(n, n);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

// Direct O(n^4) DFT, independent of the FFT backend.
std::vector<std::complex<double>> naive_dft(const Image& img) {
  const int64_t n = img.height;
  std::vector<std::complex<double>> k(static_cast<size_t>(n * n));
  for (int64_t u = 0; u < n; ++u)
    for (int64_t v = 0; v < n; ++v) {
      std::complex<double> acc = 0;
      for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x < n; ++x)
          acc += img.at(y, x) * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(u * y + v * x) /
                                                    static_cast<double>(n));
      k[static_cast<size_t>(u * n + v)] = acc;
    }
  return k;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
  return m;
}

double mean(const Image& a) {
  double s = 0;
  for (double v : a.pixels) s += v;
  return s / static_cast<double>(a.size());
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

std::vector<std::string> source_names(size_t n) {
  std::vector<std::string> names;
  for (size_t i = 0; i < n; ++i) names.push_back("src" + std::to_string(i));
  return names;
}

}  // namespace

TEST_CASE("fft round trip against a direct DFT") {
  const Image img = noise_image(16, 3);
  const auto fast = fft2(img);
  const auto slow = naive_dft(img);
  for (size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast[i] - slow[i]) < 1e-9);
  CHECK(max_abs_diff(ifft2_magnitude(fast, 16), img) < 1e-12);
}

TEST_CASE("zero-severity specs are the identity") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Image img = seed % 2 ? noise_image(64, seed) : make_phantoms(1, 64, seed)[0];
    MotionSpec none;
    none.num_events = 0;
    none.seed = seed;
    CHECK(max_abs_diff(corrupt_image(img, none), img) < 1e-5);
    MotionSpec no_lines;
    no_lines.corrupted_line_fraction = 0;
    no_lines.seed = seed;
    CHECK(max_abs_diff(corrupt_image(img, no_lines), img) < 1e-5);
  }
}

TEST_CASE("trajectory structure") {
  MotionSpec spec;
  spec.seed = 11;
  for (int64_t n : {16, 64, 128}) {
    const Trajectory t = make_trajectory(n, spec);
    const int64_t protect = protected_line_count(n);
    CHECK(protect == std::max<int64_t>(1, static_cast<int64_t>(std::ceil(0.04 * static_cast<double>(n)))));
    int64_t protected_seen = 0;
    for (bool p : t.is_protected) protected_seen += p;
    CHECK(protected_seen == protect);
    CHECK(t.is_protected[static_cast<size_t>(n / 2)]);  // DC

    CHECK(t.segment_start.front() == 0);
    CHECK(t.line_pose.front().identity());
    CHECK(static_cast<int>(t.segment_start.size()) - 1 == spec.num_events);
    // Piecewise constant between change points.
    for (size_t s = 0; s < t.segment_start.size(); ++s) {
      const int64_t end = s + 1 < t.segment_start.size() ? t.segment_start[s + 1] : n;
      for (int64_t r = t.segment_start[s]; r < end; ++r) {
        CHECK(t.line_pose[static_cast<size_t>(r)].rotation_deg == t.line_pose[static_cast<size_t>(t.segment_start[s])].rotation_deg);
        CHECK(t.line_pose[static_cast<size_t>(r)].dx == t.line_pose[static_cast<size_t>(t.segment_start[s])].dx);
      }
    }
    for (const Pose& p : t.line_pose) {
      CHECK(std::abs(p.rotation_deg) <= spec.max_rotation_deg);
      CHECK(std::abs(p.dx) <= spec.max_translation_px);
      CHECK(std::abs(p.dy) <= spec.max_translation_px);
    }
    CHECK(t.substituted_lines() == std::llround(0.5 * static_cast<double>(n - protect)));
  }
}

TEST_CASE("pure translation keeps the magnitude of every substituted line") {
  const int64_t n = 32;
  const Image img = make_phantoms(1, n, 5)[0];
  MotionSpec spec;
  spec.max_rotation_deg = 0;
  spec.num_events = 4;
  spec.corrupted_line_fraction = 0.8;
  spec.seed = 21;
  const Trajectory t = make_trajectory(n, spec);
  REQUIRE(t.substituted_lines() > 0);
  const auto k = corrupt_kspace(img, t);
  const auto clean = naive_dft(img);
  int64_t lines_checked = 0;
  bool phase_changed = false;
  for (int64_t r = 0; r < n; ++r) {
    if (t.is_protected[static_cast<size_t>(r)] || t.line_pose[static_cast<size_t>(r)].identity()) continue;
    const int64_t row = ((r - n / 2) % n + n) % n;
    for (int64_t c = 0; c < n; ++c) {
      const size_t i = static_cast<size_t>(row * n + c);
      CHECK(std::abs(std::abs(k[i]) - std::abs(clean[i])) < 1e-9 * std::max(1.0, std::abs(clean[i])));
      phase_changed |= std::abs(k[i] - clean[i]) > 1e-6;
    }
    ++lines_checked;
  }
  CHECK(lines_checked == t.substituted_lines());
  CHECK(phase_changed);
}

TEST_CASE("protected and pre-onset lines match the clean k-space") {
  const int64_t n = 64;
  const Image img = make_phantoms(1, n, 8)[0];
  MotionSpec spec;
  spec.seed = 4;
  const Trajectory t = make_trajectory(n, spec);
  const auto k = corrupt_kspace(img, t);
  const auto clean = fft2(img);
  for (int64_t r = 0; r < n; ++r) {
    const int64_t row = ((r - n / 2) % n + n) % n;
    const bool kept = t.is_protected[static_cast<size_t>(r)] || t.line_pose[static_cast<size_t>(r)].identity();
    double diff = 0;
    for (int64_t c = 0; c < n; ++c) diff += std::abs(k[static_cast<size_t>(row * n + c)] - clean[static_cast<size_t>(row * n + c)]);
    if (kept) CHECK(diff == 0);
  }
}

TEST_CASE("corruption is deterministic given the seed") {
  const Image img = make_phantoms(1, 64, 2)[0];
  MotionSpec spec;
  spec.seed = 99;
  const Image a = corrupt_image(img, spec), b = corrupt_image(img, spec);
  CHECK(a.pixels == b.pixels);
  spec.seed = 100;
  CHECK(corrupt_image(img, spec).pixels != a.pixels);
}

TEST_CASE("non power-of-two or non-square input is rejected") {
  MotionSpec spec;
  CHECK_THROWS_AS(corrupt_image(Image(48, 48), spec), ConfigError);
  CHECK_THROWS_AS(corrupt_image(Image(64, 32), spec), ConfigError);
  CHECK_THROWS_AS(make_phantoms(1, 50, 0), ConfigError);
  MotionSpec bad;
  bad.corrupted_line_fraction = 1.5;
  CHECK_THROWS_AS(corrupt_image(Image(16, 16), bad), ConfigError);
}

TEST_CASE("right-angle rotation permutes pixels") {
  const Image img = noise_image(16, 9);
  const Image r = rotate_bilinear(img, 90);
  // Destination (y, x) samples source row n-1-x, column y.
  for (int64_t y = 0; y < 16; ++y)
    for (int64_t x = 0; x < 16; ++x) CHECK(std::abs(r.at(y, x) - img.at(15 - x, y)) < 1e-9);
  CHECK(max_abs_diff(rotate_bilinear(img, 0), img) == 0);
}

TEST_CASE("severe motion lowers SSIM and keeps mean intensity") {
  const auto phantoms = make_phantoms(8, 64, 123);
  for (double fraction : {0.3, 0.5, 1.0})
    for (double rotation : {5.0, 10.0}) {
      for (size_t i = 0; i < phantoms.size(); ++i) {
        MotionSpec spec;
        spec.corrupted_line_fraction = fraction;
        spec.max_rotation_deg = rotation;
        spec.seed = 1000 + i;
        const Image c = corrupt_image(phantoms[i], spec);
        const double s = ssim(to_255(c), to_255(phantoms[i]));
        CHECK(s < 1.0);
        const double m0 = mean(phantoms[i]), m1 = mean(c);
        CHECK(std::abs(m1 - m0) <= 0.3 * m0);
        for (double v : c.pixels) CHECK((v >= 0 && v <= 1));
      }
    }
}

TEST_CASE("phantoms are deterministic, bounded and distinct") {
  const auto a = make_phantoms(6, 64, 17);
  const auto b = make_phantoms(6, 64, 17);
  REQUIRE(a.size() == 6);
  double total = 0;
  int pairs = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixels == b[i].pixels);
    for (double v : a[i].pixels) CHECK((v >= 0 && v <= 1));
    for (size_t j = i + 1; j < a.size(); ++j) {
      double m = 0;
      for (size_t p = 0; p < a[i].size(); ++p) m += std::pow(a[i].pixels[p] - a[j].pixels[p], 2);
      m /= static_cast<double>(a[i].size());
      CHECK(m > 0);
      total += m;
      ++pairs;
    }
  }
  CHECK(total / pairs > 0);
  CHECK(make_phantoms(1, 64, 18)[0].pixels != a[0].pixels);
}

TEST_CASE("dataset split arithmetic") {
  auto c = plan_dataset(32, {1.0, 0.0}, true);
  CHECK(c.clean_train == 16);
  CHECK(c.corrupted_train == 16);
  CHECK(c.val_pairs == 0);
  c = plan_dataset(32, {0.75, 0.25}, false);
  CHECK(c.clean_train == 24);
  CHECK(c.corrupted_train == 24);
  CHECK(c.val_pairs == 8);
  c = plan_dataset(32, {0.75, 0.25}, true);
  CHECK(c.clean_train + c.corrupted_train == 24);
  try {
    plan_dataset(1, {1.0, 0.0}, true);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("at least 2") != std::string::npos);
  }
  try {
    plan_dataset(2, {0.5, 0.5}, true);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("at least 4") != std::string::npos);
  }
  CHECK_THROWS_AS(plan_dataset(0, {1.0, 0.0}, false), ConfigError);
}

TEST_CASE("unpaired dataset draws clean and corrupted training sets from disjoint sources") {
  TempDir dir("motion_unpaired");
  const auto clean = make_phantoms(32, 32, 3);
  MotionSpec spec;
  spec.seed = 7;
  const auto manifest = generate_dataset(clean, source_names(32), spec, dir.str(), true, {1.0, 0.0}, 2);
  std::set<std::string> clean_src, corrupted_src;
  for (const auto& e : manifest) {
    CHECK(e.split == "train");
    (e.domain == "clean" ? clean_src : corrupted_src).insert(e.source);
  }
  CHECK(clean_src.size() == 16);
  CHECK(corrupted_src.size() == 16);
  for (const auto& s : clean_src) CHECK(corrupted_src.count(s) == 0);

  size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path))
    if (e.path().extension() == ".png") ++files;
  const auto lines = read_lines(dir.str("manifest.csv"));
  CHECK(lines.front() == "filename,split,domain,source,pose");
  CHECK(lines.size() - 1 == files);
  CHECK(files == 32);
}

TEST_CASE("paired dataset aligns corrupted/i with clean/i") {
  TempDir dir("motion_paired");
  const auto clean = make_phantoms(10, 32, 4);
  const auto names = source_names(10);
  MotionSpec spec;
  spec.seed = 12;
  const auto manifest = generate_dataset(clean, names, spec, dir.str(), false, {0.8, 0.2}, 3);
  CHECK(manifest.size() == 20);
  std::map<std::string, std::string> source_of;
  for (const auto& e : manifest) source_of[e.filename] = e.source;
  for (const char* split : {"train", "val"})
    for (int i = 0; i < (std::string(split) == "train" ? 8 : 2); ++i) {
      char name[16];
      std::snprintf(name, sizeof name, "%04d.png", i);
      const std::string c = std::string(split) + "/clean/" + name, k = std::string(split) + "/corrupted/" + name;
      REQUIRE(source_of.count(c));
      REQUIRE(source_of.count(k));
      CHECK(source_of[c] == source_of[k]);
      // The file is the source corrupted with its per-image seed.
      const size_t src = static_cast<size_t>(std::stoi(source_of[k].substr(3)));
      MotionSpec s = spec;
      s.seed = splitmix64(spec.seed ^ src);
      const Image expect = to_255(corrupt_image(clean[src], s));
      const Image got = to_255(read_png(dir.str(k)));
      CHECK(got.pixels == expect.pixels);
    }
  const auto lines = read_lines(dir.str("manifest.csv"));
  CHECK(lines.size() == 21);
  CHECK(split_csv(lines[1]).size() == 5);

  // Same inputs, different thread count: identical files.
  TempDir again("motion_paired_again");
  generate_dataset(clean, names, spec, again.str(), false, {0.8, 0.2}, 1);
  for (const auto& e : manifest) CHECK(read_png(dir.str(e.filename)).pixels == read_png(again.str(e.filename)).pixels);
  CHECK(read_lines(again.str("manifest.csv")) == lines);
}

TEST_CASE("png directory loading") {
  TempDir dir("motion_load");
  const auto clean = make_phantoms(3, 16, 1);
  for (int i = 2; i >= 0; --i) write_png(dir.str("img" + std::to_string(i) + ".png"), clean[static_cast<size_t>(i)]);
  std::ofstream(dir.str("notes.txt")) << "x";
  std::vector<std::string> names;
  const auto loaded = load_png_dir(dir.str(), &names);
  CHECK(names == std::vector<std::string>{"img0.png", "img1.png", "img2.png"});
  CHECK(loaded.size() == 3);
  CHECK_THROWS_AS(load_png_dir(dir.str("missing")), IoError);
}
