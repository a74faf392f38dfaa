// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "cmgan/error.hpp"

namespace cmgan {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  N out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty())
    throw ConfigError("invalid value '" + value + "' for " + key);
  if constexpr (std::is_floating_point_v<N>)
    if (!std::isfinite(out)) throw ConfigError("non-finite value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid value '" + value + "' for " + key + " (expected true or false)");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  if (trim(value).empty()) return out;
  std::string_view rest = value;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(parse_number<double>(key, std::string(trim(rest.substr(0, comma)))));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string format(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename N>
std::string format_int(N v) {
  return std::to_string(v);
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format(v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename N, typename Ref>
Field number(Ref ref) {
  return {[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_number<N>(k, v); },
          [ref](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<N>)
              return format(ref(c));
            else
              return format_int(ref(c));
          }};
}

template <typename Ref>
Field boolean(Ref ref) {
  return {[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_bool(k, v); },
          [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); }};
}

template <typename Ref>
Field list(Ref ref) {
  return {[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_list(k, v); },
          [ref](const RunConfig& c) { return format_list(ref(c)); }};
}

#define REF(expr) [](auto& c) -> auto& { return expr; }

const std::vector<std::pair<std::string, Field>>& table() {
  static const std::vector<std::pair<std::string, Field>> fields = {
      {"seed", number<uint64_t>(REF(c.train.seed))},
      {"epochs", number<int>(REF(c.train.epochs))},
      {"max_steps", number<int64_t>(REF(c.train.max_steps))},
      {"batch_size", number<int>(REF(c.train.batch_size))},
      {"image_size", number<int64_t>(REF(c.train.image_size))},
      {"replay_capacity", number<int>(REF(c.train.replay_capacity))},
      {"spectral_iterations", number<int>(REF(c.train.spectral_iterations))},
      {"init_stddev", number<double>(REF(c.train.init_stddev))},
      {"checkpoint_every", number<int64_t>(REF(c.train.checkpoint_every))},
      {"threads", number<unsigned>(REF(c.threads))},
      {"lr", number<double>(REF(c.train.adam.lr))},
      {"beta1", number<double>(REF(c.train.adam.beta1))},
      {"beta2", number<double>(REF(c.train.adam.beta2))},
      {"adam_eps", number<double>(REF(c.train.adam.eps))},
      {"lambda_l1", number<double>(REF(c.train.weights.l1))},
      {"lambda_msssim", number<double>(REF(c.train.weights.msssim))},
      {"lambda_cpercep", number<double>(REF(c.train.weights.cpercep))},
      {"lambda_cstyle", number<double>(REF(c.train.weights.cstyle))},
      {"lambda_layer_cp", list(REF(c.train.weights.layer_cp))},
      {"lambda_layer_cs", list(REF(c.train.weights.layer_cs))},
      {"msssim_scales", number<int>(REF(c.train.msssim.scales))},
      {"msssim_window", number<int>(REF(c.train.msssim.window))},
      {"msssim_sigma", number<double>(REF(c.train.msssim.sigma))},
      {"msssim_c1", number<double>(REF(c.train.msssim.c1))},
      {"msssim_c2", number<double>(REF(c.train.msssim.c2))},
      {"gen_base_channels", number<int64_t>(REF(c.train.generator.base_channels))},
      {"gen_residual_blocks", number<int>(REF(c.train.generator.residual_blocks))},
      {"gen_attention", boolean(REF(c.train.generator.attention))},
      {"disc_base_channels", number<int64_t>(REF(c.train.discriminator.base_channels))},
      {"disc_stages", number<int>(REF(c.train.discriminator.stages))},
      {"disc_attention", boolean(REF(c.train.discriminator.attention))},
      {"feature_mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "random")
            c.train.features.mode = FeatureMode::kRandomFixed;
          else if (v == "autoencoder")
            c.train.features.mode = FeatureMode::kAutoencoderPretrained;
          else
            throw ConfigError("invalid value '" + v + "' for " + k + " (expected random or autoencoder)");
        },
        [](const RunConfig& c) {
          return std::string(c.train.features.mode == FeatureMode::kRandomFixed ? "random" : "autoencoder");
        }}},
      {"feature_layers", number<int>(REF(c.train.features.layers))},
      {"feature_seed", number<uint64_t>(REF(c.train.features.seed))},
      {"feature_pretrain_steps", number<int>(REF(c.train.features.pretrain_steps))},
      {"feature_pretrain_batch", number<int>(REF(c.train.features.pretrain_batch))},
      {"feature_pretrain_lr", number<double>(REF(c.train.features.pretrain_lr))},
      {"motion_events", number<int>(REF(c.motion.num_events))},
      {"motion_max_rotation_deg", number<double>(REF(c.motion.max_rotation_deg))},
      {"motion_max_translation_px", number<double>(REF(c.motion.max_translation_px))},
      {"motion_corrupted_fraction", number<double>(REF(c.motion.corrupted_line_fraction))},
      {"motion_seed", number<uint64_t>(REF(c.motion.seed))},
      {"split_train", number<double>(REF(c.split.train))},
      {"split_val", number<double>(REF(c.split.val))},
      {"unpaired_shuffle", boolean(REF(c.unpaired_shuffle))},
  };
  return fields;
}

#undef REF

const Field& field(const std::string& key) {
  for (const auto& [name, f] : table())
    if (name == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : table()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::parse(std::string_view text, const std::string& origin) {
  std::set<std::string> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  parse(ss.str(), path);
}

std::string RunConfig::dump() const {
  std::string out = "# effective configuration\n";
  for (const auto& [name, f] : table()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::apply_ablation(const std::string& preset) {
  if (preset == "cyclegan") {
    train.weights.msssim = 0;
    train.weights.cpercep = 0;
    train.weights.cstyle = 0;
  } else if (preset != "cyclemedgan") {
    throw ConfigError("unknown ablation preset '" + preset + "' (expected cyclegan or cyclemedgan)");
  }
}

void RunConfig::validate() const {
  train.validate();
  motion.validate();
  if (!(split.train > 0) || !(split.val >= 0))
    throw ConfigError("split_train must be > 0 and split_val >= 0");
  const FeatureExtractorConfig& fe = train.features;
  if (fe.layers < 1 || fe.layers > FeatureExtractor<float>::kMaxLayers)
    throw ConfigError("feature_layers must lie in [1, " + std::to_string(FeatureExtractor<float>::kMaxLayers) + "]");
  if (fe.mode == FeatureMode::kAutoencoderPretrained &&
      (fe.pretrain_steps < 0 || fe.pretrain_batch < 1 || !(fe.pretrain_lr > 0)))
    throw ConfigError("feature pretraining needs steps >= 0, batch >= 1 and lr > 0");
  if (train.generator.base_channels < 1 || train.generator.residual_blocks < 0)
    throw ConfigError("generator needs base channels >= 1 and residual blocks >= 0");
  if (train.discriminator.base_channels < 1 || train.discriminator.stages < 1)
    throw ConfigError("discriminator needs base channels >= 1 and stages >= 1");
}

}  // namespace cmgan
