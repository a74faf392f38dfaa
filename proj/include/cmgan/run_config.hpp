// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cmgan/motion_sim.hpp"
#include "cmgan/trainer.hpp"

namespace cmgan {

// Every knob of a run, settable from a flat `key = value` file.
struct RunConfig {
  TrainConfig train;
  MotionSpec motion;
  DatasetSplit split;
  bool unpaired_shuffle = false;
  // Worker cap for simulation and evaluation; 0 uses every core.
  unsigned threads = 0;

  // Throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // `#` starts a comment; blank lines are ignored; a key may appear once.
  // Errors name `origin` and the line number.
  void parse(std::string_view text, const std::string& origin = "config");
  // Throws IoError when the file cannot be read.
  void load(const std::string& path);
  // Every key with its resolved value, in keys() order.
  std::string dump() const;

  // "cyclegan" zeroes the MS-SSIM, perceptual and style weights;
  // "cyclemedgan" keeps the configured weights.
  void apply_ablation(const std::string& preset);

  void validate() const;
};

}  // namespace cmgan
