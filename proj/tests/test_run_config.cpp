// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "cmgan/error.hpp"
#include "cmgan/run_config.hpp"
#include "doctest.h"

using namespace cmgan;

TEST_CASE("dump and parse round-trip every key") {
  RunConfig a;
  a.set("lr", "0.000123");
  a.set("lambda_layer_cp", "0.5, 0.25,0.125");
  a.set("gen_attention", "false");
  a.set("feature_mode", "autoencoder");
  a.set("seed", "18446744073709551615");
  RunConfig b;
  b.parse(a.dump(), "dump");
  for (const auto& k : RunConfig::keys()) CHECK_MESSAGE(a.get(k) == b.get(k), k);
  CHECK(b.train.adam.lr == 0.000123);
  CHECK(b.train.weights.layer_cp == std::vector<double>{0.5, 0.25, 0.125});
  CHECK_FALSE(b.train.generator.attention);
  CHECK(b.train.seed == 18446744073709551615ull);
}

TEST_CASE("doubles print in shortest round-trip form") {
  RunConfig c;
  c.set("lr", "0.1");
  CHECK(c.get("lr") == "0.1");
  c.set("lambda_l1", "1e-300");
  CHECK(c.get("lambda_l1") == "1e-300");
}

TEST_CASE("comments and blank lines are ignored") {
  RunConfig c;
  c.parse("# header\n\n  batch_size = 3  # trailing\r\nepochs=7\n");
  CHECK(c.train.batch_size == 3);
  CHECK(c.train.epochs == 7);
}

TEST_CASE("parse errors name the origin and line") {
  RunConfig c;
  auto message = [&](const std::string& text) {
    try {
      c.parse(text, "run.cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("epochs = 2\nnope = 1\n").find("run.cfg:2: unknown config key 'nope'") != std::string::npos);
  CHECK(message("epochs 2\n").find("run.cfg:1: expected") != std::string::npos);
  CHECK(message("epochs = 2\nepochs = 3\n").find("run.cfg:2: duplicate key") != std::string::npos);
  CHECK(message("lr = abc\n").find("invalid value 'abc' for lr") != std::string::npos);
  CHECK(message("lr = 1e999\n").find("lr") != std::string::npos);
  CHECK(message("epochs = 2.5\n").find("epochs") != std::string::npos);
  CHECK(message("gen_attention = maybe\n").find("true or false") != std::string::npos);
  CHECK(message("feature_mode = vgg\n").find("random or autoencoder") != std::string::npos);
}

TEST_CASE("missing file is an io error") { CHECK_THROWS_AS(RunConfig().load("/nonexistent/run.cfg"), IoError); }

TEST_CASE("cyclegan preset zeroes the three medical cycle weights only") {
  RunConfig c;
  c.set("lambda_l1", "7");
  c.set("lambda_msssim", "2");
  c.apply_ablation("cyclegan");
  CHECK(c.train.weights.l1 == 7);
  CHECK(c.train.weights.msssim == 0);
  CHECK(c.train.weights.cpercep == 0);
  CHECK(c.train.weights.cstyle == 0);

  RunConfig d, e;
  d.apply_ablation("cyclemedgan");
  CHECK(d.dump() == e.dump());
  CHECK_THROWS_AS(d.apply_ablation("pix2pix"), ConfigError);
}

TEST_CASE("validate rejects inconsistent settings") {
  RunConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = [](const char* key, const char* value) {
    RunConfig c;
    c.set(key, value);
    return c;
  };
  CHECK_THROWS_AS(bad("split_train", "0").validate(), ConfigError);
  CHECK_THROWS_AS(bad("feature_layers", "0").validate(), ConfigError);
  CHECK_THROWS_AS(bad("feature_layers", "99").validate(), ConfigError);
  CHECK_THROWS_AS(bad("gen_base_channels", "0").validate(), ConfigError);
  CHECK_THROWS_AS(bad("disc_stages", "0").validate(), ConfigError);
  CHECK_THROWS_AS(bad("batch_size", "0").validate(), ConfigError);
}
