// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "cmgan/image.hpp"

namespace cmgan {

struct MotionSpec {
  int num_events = 8;
  double max_rotation_deg = 10;
  double max_translation_px = 8;
  // Share of the unprotected phase-encode lines acquired after motion onset.
  double corrupted_line_fraction = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

struct Pose {
  double rotation_deg = 0;
  double dx = 0;
  double dy = 0;

  bool identity() const { return rotation_deg == 0 && dx == 0 && dy == 0; }
};

// One pose per phase-encode line in acquisition order. Line r holds the
// spatial frequency ky = r - n/2 (top-to-bottom in centred k-space).
struct Trajectory {
  std::vector<Pose> line_pose;
  // First line of every segment; segment 0 starts at line 0 with the identity.
  std::vector<int64_t> segment_start;
  // Lines near DC that always keep the reference pose.
  std::vector<bool> is_protected;

  int64_t lines() const { return static_cast<int64_t>(line_pose.size()); }
  // Lines whose k-space row is replaced by a moved acquisition.
  int64_t substituted_lines() const;
  // e.g. "events=3 lines=30 max_rot=7.21 max_shift=5.10".
  std::string summary() const;
};

// Number of protected lines for an n-line acquisition: DC plus the lowest 4%.
int64_t protected_line_count(int64_t n);

// Piecewise constant trajectory for an n-line acquisition.
Trajectory make_trajectory(int64_t n, const MotionSpec& spec);

// Unnormalised 2-D DFT of a square image (row-major, unshifted) and the
// magnitude of the normalised inverse.
std::vector<std::complex<double>> fft2(const Image& img);
Image ifft2_magnitude(const std::vector<std::complex<double>>& k, int64_t n);

// Bilinear rotation about the image centre; samples outside read as 0.
Image rotate_bilinear(const Image& img, double degrees);

// K-space of the corrupted acquisition. Throws ConfigError unless the image
// is square with a power-of-two side.
std::vector<std::complex<double>> corrupt_kspace(const Image& clean, const Trajectory& traj);

// [0, 1] in, [0, 1] out. `traj`, when given, receives the trajectory used.
Image corrupt_image(const Image& clean, const MotionSpec& spec, Trajectory* traj = nullptr);

// Ellipse compositions with smooth edges and low-frequency texture, in [0, 1].
std::vector<Image> make_phantoms(int count, int64_t size, uint64_t seed);

struct DatasetSplit {
  double train = 0.8;
  double val = 0.2;
};

struct ManifestEntry {
  std::string filename;  // relative to the dataset root
  std::string split;     // train | val
  std::string domain;    // clean | corrupted
  std::string source;
  std::string pose;      // trajectory summary, "reference" for clean images
};

struct DatasetCounts {
  int64_t clean_train = 0;
  int64_t corrupted_train = 0;
  int64_t val_pairs = 0;
};

// Per-split source counts; throws ConfigError naming the minimum number of
// images when a required subset would be empty.
DatasetCounts plan_dataset(int64_t sources, const DatasetSplit& split, bool unpaired_shuffle);

// Writes out_dir/{train,val}/{clean,corrupted}/NNNN.png and manifest.csv.
// Sources are shuffled with spec.seed before splitting. Unpaired mode draws
// the clean and corrupted training sets from disjoint halves of the training
// sources; validation always holds aligned pairs. Image i is corrupted with
// seed splitmix64(spec.seed ^ i).
std::vector<ManifestEntry> generate_dataset(const std::vector<Image>& clean,
                                            const std::vector<std::string>& source_names,
                                            const MotionSpec& spec, const std::string& out_dir,
                                            bool unpaired_shuffle, const DatasetSplit& split,
                                            unsigned threads = 0);

// Reads every *.png in `dir` in filename order.
std::vector<Image> load_png_dir(const std::string& dir, std::vector<std::string>* names = nullptr);

std::string manifest_csv(const std::vector<ManifestEntry>& entries);

}  // namespace cmgan
