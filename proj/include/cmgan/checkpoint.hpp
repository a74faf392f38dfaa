// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmgan/graph.hpp"
#include "cmgan/tensor.hpp"

namespace cmgan {

// CKPT-V1 container: a text manifest followed by CMT1 blobs, float32 for
// `tensor` entries and float64 for `tensor64` entries (optimizer moments).
//
//   CKPT-V1
//   meta <key> <value...>
//   tensor <name> <offset> <n> <c> <h> <w>
//   tensor64 <name> <offset> <n> <c> <h> <w>
//   end
//   <blob bytes>
//
// Offsets count from the first byte after the "end" line. Entries keep
// insertion order, so serialising the same content is byte-stable.
class Checkpoint {
 public:
  static constexpr std::string_view kMagic = "CKPT-V1";

  void set_meta(const std::string& key, const std::string& value);
  bool has_meta(const std::string& key) const;
  const std::string& meta(const std::string& key) const;

  void add(const std::string& name, Tensor<float> t);
  bool has(const std::string& name) const;
  const Tensor<float>& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor<float>>>& tensors() const { return tensors_; }

  void add64(const std::string& name, Tensor<double> t);
  bool has64(const std::string& name) const;
  const Tensor<double>& get64(const std::string& name) const;

  std::string serialize() const;
  static Checkpoint parse(std::string_view bytes);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::pair<std::string, Tensor<float>>> tensors_;
  std::vector<std::pair<std::string, Tensor<double>>> tensors64_;
};

template <typename T>
void store_parameters(Checkpoint& ck, const std::vector<Parameter<T>*>& params);

// Throws IoError when a parameter is missing or has a different shape.
template <typename T>
void load_parameters(const Checkpoint& ck, const std::vector<Parameter<T>*>& params);

}  // namespace cmgan
