// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/motion_sim.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cmgan/error.hpp"
#include "cmgan/parallel.hpp"
#include "cmgan/rng.hpp"

namespace cmgan {

namespace fs = std::filesystem;
using cd = std::complex<double>;

namespace {

// The FFTW planner is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

void dft2(std::vector<cd>& data, int64_t n, int sign) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

bool power_of_two(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

void check_square_pow2(const Image& img, const char* what) {
  if (img.height != img.width || !power_of_two(img.height)) {
    throw ConfigError(std::string(what) + ": image must be square with a power-of-two side, got " +
                      std::to_string(img.height) + "x" + std::to_string(img.width));
  }
}

// Signed frequency of DFT index i.
double freq(int64_t i, int64_t n) { return static_cast<double>(i < n / 2 ? i : i - n); }

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string index_name(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld.png", static_cast<long long>(i));
  return buf;
}

}  // namespace

void MotionSpec::validate() const {
  if (num_events < 0) throw ConfigError("motion: num_events must be >= 0");
  if (!(max_rotation_deg >= 0)) throw ConfigError("motion: max_rotation_deg must be >= 0");
  if (!(max_translation_px >= 0)) throw ConfigError("motion: max_translation_px must be >= 0");
  if (!(corrupted_line_fraction >= 0 && corrupted_line_fraction <= 1))
    throw ConfigError("motion: corrupted_line_fraction must lie in [0, 1]");
}

int64_t Trajectory::substituted_lines() const {
  int64_t count = 0;
  for (int64_t r = 0; r < lines(); ++r)
    if (!is_protected[static_cast<size_t>(r)] && !line_pose[static_cast<size_t>(r)].identity()) ++count;
  return count;
}

std::string Trajectory::summary() const {
  double rot = 0, shift = 0;
  for (int64_t r = 0; r < lines(); ++r) {
    if (is_protected[static_cast<size_t>(r)]) continue;
    const Pose& p = line_pose[static_cast<size_t>(r)];
    rot = std::max(rot, std::abs(p.rotation_deg));
    shift = std::max(shift, std::hypot(p.dx, p.dy));
  }
  std::ostringstream os;
  os << "events=" << segment_start.size() - 1 << " lines=" << substituted_lines() << " max_rot=" << fmt2(rot)
     << " max_shift=" << fmt2(shift);
  return os.str();
}

int64_t protected_line_count(int64_t n) {
  return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(0.04 * static_cast<double>(n) - 1e-9)));
}

Trajectory make_trajectory(int64_t n, const MotionSpec& spec) {
  spec.validate();
  Trajectory t;
  t.line_pose.assign(static_cast<size_t>(n), Pose{});
  t.is_protected.assign(static_cast<size_t>(n), false);
  t.segment_start = {0};

  // DC first, then alternating -1, +1, -2, +2, ...
  const int64_t protect = std::min(n, protected_line_count(n));
  for (int64_t i = 0; i < protect; ++i) {
    const int64_t ky = (i + 1) / 2 * (i % 2 == 1 ? -1 : 1);
    t.is_protected[static_cast<size_t>(ky + n / 2)] = true;
  }

  const int64_t free_lines = n - protect;
  const auto corrupted = static_cast<int64_t>(std::llround(spec.corrupted_line_fraction * static_cast<double>(free_lines)));
  if (spec.num_events == 0 || corrupted == 0) return t;

  // Motion starts so that `corrupted` unprotected lines follow it.
  int64_t onset = n;
  for (int64_t seen = 0; seen < corrupted;)
    if (!t.is_protected[static_cast<size_t>(--onset)]) ++seen;

  Rng rng(spec.seed);
  const int64_t events = std::min<int64_t>(spec.num_events, corrupted);
  std::vector<int64_t> candidates(static_cast<size_t>(n - onset - 1));
  std::iota(candidates.begin(), candidates.end(), onset + 1);
  rng.shuffle(candidates.begin(), candidates.end());
  std::vector<int64_t> starts(candidates.begin(), candidates.begin() + (events - 1));
  starts.push_back(onset);
  std::sort(starts.begin(), starts.end());

  for (size_t e = 0; e < starts.size(); ++e) {
    Pose p;
    p.rotation_deg = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg);
    p.dx = rng.uniform(-spec.max_translation_px, spec.max_translation_px);
    p.dy = rng.uniform(-spec.max_translation_px, spec.max_translation_px);
    const int64_t end = e + 1 < starts.size() ? starts[e + 1] : n;
    for (int64_t r = starts[e]; r < end; ++r) t.line_pose[static_cast<size_t>(r)] = p;
    t.segment_start.push_back(starts[e]);
  }
  return t;
}

std::vector<cd> fft2(const Image& img) {
  check_square_pow2(img, "fft2");
  std::vector<cd> k(img.pixels.begin(), img.pixels.end());
  dft2(k, img.height, FFTW_FORWARD);
  return k;
}

Image ifft2_magnitude(const std::vector<cd>& k, int64_t n) {
  std::vector<cd> data = k;
  dft2(data, n, FFTW_BACKWARD);
  Image out(n, n);
  const double scale = 1.0 / static_cast<double>(n * n);
  for (size_t i = 0; i < data.size(); ++i) out.pixels[i] = std::abs(data[i]) * scale;
  return out;
}

Image rotate_bilinear(const Image& img, double degrees) {
  const double th = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double cy = (static_cast<double>(img.height) - 1) / 2, cx = (static_cast<double>(img.width) - 1) / 2;
  Image out(img.height, img.width);
  auto sample = [&](int64_t y, int64_t x) {
    return y < 0 || x < 0 || y >= img.height || x >= img.width ? 0.0 : img.at(y, x);
  };
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      // Inverse map: source = R(-theta) (dest - centre) + centre.
      const double u = static_cast<double>(x) - cx, v = static_cast<double>(y) - cy;
      const double sx = c * u + s * v + cx, sy = -s * u + c * v + cy;
      const auto x0 = static_cast<int64_t>(std::floor(sx)), y0 = static_cast<int64_t>(std::floor(sy));
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      out.at(y, x) = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                     fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
    }
  return out;
}

std::vector<cd> corrupt_kspace(const Image& clean, const Trajectory& traj) {
  check_square_pow2(clean, "corrupt_image");
  const int64_t n = clean.height;
  if (traj.lines() != n) throw ConfigError("corrupt_image: trajectory has " + std::to_string(traj.lines()) +
                                           " lines for a " + std::to_string(n) + "-line image");
  const std::vector<cd> reference = fft2(clean);
  std::vector<cd> out = reference;

  for (size_t s = 1; s < traj.segment_start.size(); ++s) {
    const int64_t begin = traj.segment_start[s];
    const int64_t end = s + 1 < traj.segment_start.size() ? traj.segment_start[s + 1] : n;
    if (begin >= end) continue;
    const Pose& p = traj.line_pose[static_cast<size_t>(begin)];
    const std::vector<cd> moved = p.rotation_deg == 0 ? reference : fft2(rotate_bilinear(clean, p.rotation_deg));
    for (int64_t r = begin; r < end; ++r) {
      if (traj.is_protected[static_cast<size_t>(r)]) continue;
      const int64_t row = ((r - n / 2) % n + n) % n;
      const double fy = freq(row, n);
      for (int64_t col = 0; col < n; ++col) {
        const double phase = -2 * std::numbers::pi * (freq(col, n) * p.dx + fy * p.dy) / static_cast<double>(n);
        const size_t i = static_cast<size_t>(row * n + col);
        out[i] = moved[i] * std::polar(1.0, phase);
      }
    }
  }
  return out;
}

Image corrupt_image(const Image& clean, const MotionSpec& spec, Trajectory* traj) {
  spec.validate();
  check_square_pow2(clean, "corrupt_image");
  Trajectory t = make_trajectory(clean.height, spec);
  Image out = ifft2_magnitude(corrupt_kspace(clean, t), clean.height);
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  if (traj) *traj = std::move(t);
  return out;
}

std::vector<Image> make_phantoms(int count, int64_t size, uint64_t seed) {
  if (count < 0) throw ConfigError("make_phantoms: count must be >= 0");
  if (!power_of_two(size)) throw ConfigError("make_phantoms: size must be a power of two");
  struct Ellipse {
    double cx, cy, a, b, angle, value;
  };
  const double half = static_cast<double>(size) / 2;
  // Soft membership with an edge of about one pixel.
  auto inside = [&](const Ellipse& e, double u, double v) {
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double du = u - e.cx, dv = v - e.cy;
    const double p = (c * du + s * dv) / e.a, q = (-s * du + c * dv) / e.b;
    const double dist_px = (1 - std::sqrt(p * p + q * q)) * std::min(e.a, e.b) * half;
    return 0.5 * (1 + std::tanh(dist_px));
  };

  std::vector<Image> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(splitmix64(seed ^ static_cast<uint64_t>(i)));
    const double hx = rng.uniform(-0.05, 0.05), hy = rng.uniform(-0.05, 0.05);
    const double ha = rng.uniform(0.68, 0.82), hb = rng.uniform(0.80, 0.92);
    const double hang = rng.uniform(-0.25, 0.25);
    const Ellipse skull{hx, hy, ha, hb, hang, rng.uniform(0.85, 1.0)};
    const Ellipse brain{hx, hy, ha * 0.88, hb * 0.9, hang, rng.uniform(0.45, 0.6)};
    std::vector<Ellipse> parts;
    const int n_parts = 3 + static_cast<int>(rng.below(4));
    for (int k = 0; k < n_parts; ++k) {
      const double r = rng.uniform(0, 0.45), phi = rng.uniform(0, 2 * std::numbers::pi);
      parts.push_back({hx + r * std::cos(phi) * ha, hy + r * std::sin(phi) * hb, rng.uniform(0.06, 0.28),
                       rng.uniform(0.06, 0.28), rng.uniform(0, std::numbers::pi), rng.uniform(-0.35, 0.35)});
    }
    struct Wave {
      double fu, fv, phase, amp;
    };
    std::vector<Wave> texture;
    for (int k = 0; k < 4; ++k)
      texture.push_back({rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(0, 2 * std::numbers::pi),
                         rng.uniform(0.01, 0.04)});

    Image img(size, size);
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x) {
        const double u = (static_cast<double>(x) + 0.5) / half - 1, v = (static_cast<double>(y) + 0.5) / half - 1;
        const double m_head = inside(skull, u, v), m_brain = inside(brain, u, v);
        double tissue = brain.value;
        for (const auto& e : parts) tissue += e.value * inside(e, u, v);
        for (const auto& w : texture) tissue += w.amp * std::cos(std::numbers::pi * (w.fu * u + w.fv * v) + w.phase);
        const double val = m_brain * tissue + (m_head - m_brain) * skull.value;
        img.at(y, x) = std::clamp(val, 0.0, 1.0);
      }
    out[static_cast<size_t>(i)] = std::move(img);
  }
  return out;
}

DatasetCounts plan_dataset(int64_t sources, const DatasetSplit& split, bool unpaired_shuffle) {
  if (!(split.train > 0) || !(split.val >= 0))
    throw ConfigError("dataset split needs a positive train share and a non-negative val share");
  auto counts = [&](int64_t n) {
    DatasetCounts c;
    c.val_pairs = std::llround(static_cast<double>(n) * split.val / (split.train + split.val));
    const int64_t train = n - c.val_pairs;
    c.clean_train = unpaired_shuffle ? (train + 1) / 2 : train;
    c.corrupted_train = unpaired_shuffle ? train - c.clean_train : train;
    return c;
  };
  auto feasible = [&](const DatasetCounts& c) {
    return c.clean_train >= 1 && c.corrupted_train >= 1 && (split.val == 0 || c.val_pairs >= 1);
  };
  DatasetCounts c = counts(sources);
  if (feasible(c)) return c;
  int64_t minimum = 1;
  while (!feasible(counts(minimum))) ++minimum;
  throw ConfigError("dataset needs at least " + std::to_string(minimum) + " clean images for this split" +
                    (unpaired_shuffle ? " with disjoint clean/corrupted training sources" : "") + ", got " +
                    std::to_string(sources));
}

std::vector<ManifestEntry> generate_dataset(const std::vector<Image>& clean,
                                            const std::vector<std::string>& source_names,
                                            const MotionSpec& spec, const std::string& out_dir,
                                            bool unpaired_shuffle, const DatasetSplit& split, unsigned threads) {
  spec.validate();
  if (source_names.size() != clean.size()) throw ConfigError("generate_dataset: one source name per image required");
  const auto n = static_cast<int64_t>(clean.size());
  const DatasetCounts counts = plan_dataset(n, split, unpaired_shuffle);
  for (const auto& img : clean) check_square_pow2(img, "generate_dataset");

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(order.begin(), order.end());

  struct Job {
    int64_t source;
    bool corrupt;
    ManifestEntry entry;
  };
  std::vector<Job> jobs;
  auto add = [&](int64_t source, const std::string& split_name, bool corrupt, int64_t index) {
    ManifestEntry e;
    e.split = split_name;
    e.domain = corrupt ? "corrupted" : "clean";
    e.filename = split_name + "/" + e.domain + "/" + index_name(index);
    e.source = source_names[static_cast<size_t>(source)];
    jobs.push_back({source, corrupt, e});
  };
  size_t next = 0;
  if (unpaired_shuffle) {
    for (int64_t i = 0; i < counts.clean_train; ++i) add(order[next++], "train", false, i);
    for (int64_t i = 0; i < counts.corrupted_train; ++i) add(order[next++], "train", true, i);
  } else {
    for (int64_t i = 0; i < counts.clean_train; ++i, ++next) {
      add(order[next], "train", false, i);
      add(order[next], "train", true, i);
    }
  }
  for (int64_t i = 0; i < counts.val_pairs; ++i, ++next) {
    add(order[next], "val", false, i);
    add(order[next], "val", true, i);
  }

  try {
    for (const char* s : {"train", "val"})
      for (const char* d : {"clean", "corrupted"}) fs::create_directories(fs::path(out_dir) / s / d);
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("generate_dataset: ") + e.what());
  }

  parallel_for(
      jobs.size(),
      [&](size_t j) {
        Job& job = jobs[j];
        const Image& src = clean[static_cast<size_t>(job.source)];
        if (!job.corrupt) {
          job.entry.pose = "reference";
          write_png((fs::path(out_dir) / job.entry.filename).string(), src);
          return;
        }
        MotionSpec s = spec;
        s.seed = splitmix64(spec.seed ^ static_cast<uint64_t>(job.source));
        Trajectory t;
        const Image img = corrupt_image(src, s, &t);
        job.entry.pose = t.summary();
        write_png((fs::path(out_dir) / job.entry.filename).string(), img);
      },
      threads);

  std::vector<ManifestEntry> manifest;
  for (auto& j : jobs) manifest.push_back(std::move(j.entry));
  const std::string path = (fs::path(out_dir) / "manifest.csv").string();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("generate_dataset: cannot write " + path);
  const std::string text = manifest_csv(manifest);
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw IoError("generate_dataset: failed writing " + path);
  return manifest;
}

std::vector<Image> load_png_dir(const std::string& dir, std::vector<std::string>* names) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  std::vector<Image> out;
  for (const auto& name : files) out.push_back(read_png((fs::path(dir) / name).string()));
  if (names) *names = files;
  return out;
}

std::string manifest_csv(const std::vector<ManifestEntry>& entries) {
  std::string out = "filename,split,domain,source,pose\n";
  for (const auto& e : entries)
    out += csv_field(e.filename) + "," + e.split + "," + e.domain + "," + csv_field(e.source) + "," +
           csv_field(e.pose) + "\n";
  return out;
}

}  // namespace cmgan
