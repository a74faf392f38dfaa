// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the shared library through its C header only, and the command
// line through its exit codes.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cmgan/cmgan.h"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& tag)
      : path(fs::temp_directory_path() / ("cmgan_capi_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

struct Config {
  cmgan_config* c = nullptr;
  Config() { REQUIRE(cmgan_config_create(&c) == CMGAN_OK); }
  ~Config() { cmgan_config_destroy(c); }
  std::string get(const char* key) const {
    size_t needed = 0;
    REQUIRE(cmgan_config_get(c, key, nullptr, 0, &needed) == CMGAN_OK);
    std::string s(needed, '\0');
    REQUIRE(cmgan_config_get(c, key, s.data(), s.size(), nullptr) == CMGAN_OK);
    s.pop_back();
    return s;
  }
};

// A tiny but complete training setup.
void small_run(Config& cfg) {
  for (auto [k, v] : std::vector<std::pair<const char*, const char*>>{{"image_size", "16"},
                                                                      {"gen_base_channels", "4"},
                                                                      {"gen_residual_blocks", "1"},
                                                                      {"disc_base_channels", "4"},
                                                                      {"disc_stages", "2"},
                                                                      {"msssim_scales", "1"},
                                                                      {"feature_layers", "2"},
                                                                      {"batch_size", "2"},
                                                                      {"max_steps", "4"},
                                                                      {"checkpoint_every", "2"},
                                                                      {"motion_max_translation_px", "2"}})
    REQUIRE(cmgan_config_set(cfg.c, k, v) == CMGAN_OK);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CMGAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config accessors report status codes and messages") {
  Config cfg;
  CHECK(cmgan_config_set(cfg.c, "lr", "0.5") == CMGAN_OK);
  CHECK(cfg.get("lr") == "0.5");
  CHECK(cmgan_config_set(cfg.c, "no_such_key", "1") == CMGAN_ERR_CONFIG);
  CHECK(std::string(cmgan_last_error()).find("no_such_key") != std::string::npos);
  CHECK(cmgan_config_set(cfg.c, "lr", "fast") == CMGAN_ERR_CONFIG);
  CHECK(cmgan_config_set(nullptr, "lr", "1") == CMGAN_ERR_ARGUMENT);
  CHECK(cmgan_config_load(cfg.c, "/nonexistent/cfg") == CMGAN_ERR_IO);
  CHECK(cmgan_config_apply_ablation(cfg.c, "other") == CMGAN_ERR_CONFIG);
  CHECK(cmgan_config_set(cfg.c, "lr", "0") == CMGAN_OK);
  CHECK(cmgan_config_validate(cfg.c) == CMGAN_ERR_CONFIG);
}

TEST_CASE("config_get truncates and reports the needed size") {
  Config cfg;
  REQUIRE(cmgan_config_set(cfg.c, "feature_mode", "autoencoder") == CMGAN_OK);
  char buf[5];
  size_t needed = 0;
  REQUIRE(cmgan_config_get(cfg.c, "feature_mode", buf, sizeof buf, &needed) == CMGAN_OK);
  CHECK(needed == 12);
  CHECK(std::string(buf) == "auto");
}

TEST_CASE("written config loads back identically") {
  Scratch dir("cfg");
  Config a, b;
  small_run(a);
  REQUIRE(cmgan_config_write(a.c, dir.str("run.cfg").c_str()) == CMGAN_OK);
  REQUIRE(cmgan_config_load(b.c, dir.str("run.cfg").c_str()) == CMGAN_OK);
  REQUIRE(cmgan_config_write(b.c, dir.str("again.cfg").c_str()) == CMGAN_OK);
  CHECK(slurp(dir.str("run.cfg")) == slurp(dir.str("again.cfg")));
}

TEST_CASE("simulate, train, resume, correct and evaluate through the C API") {
  Scratch dir("flow");
  Config cfg;
  small_run(cfg);
  cmgan_dataset_counts counts{};
  REQUIRE(cmgan_simulate(cfg.c, nullptr, 10, dir.str("data").c_str(), &counts) == CMGAN_OK);
  CHECK(counts.clean_train == 8);
  CHECK(counts.corrupted_train == 8);
  CHECK(counts.val_pairs == 2);
  CHECK(fs::exists(dir.str("data/config.txt")));

  cmgan_trainer* tr = nullptr;
  REQUIRE(cmgan_trainer_create(cfg.c, dir.str("data").c_str(), &tr) == CMGAN_OK);
  CHECK(cmgan_trainer_total_steps(tr) == 4);
  int calls = 0;
  auto count = [](const cmgan_step_report*, void* user) { ++*static_cast<int*>(user); };
  REQUIRE(cmgan_trainer_fit(tr, dir.str("run").c_str(), count, &calls) == CMGAN_OK);
  CHECK(calls == 4);
  CHECK(cmgan_trainer_current_step(tr) == 4);
  for (const char* f : {"config.txt", "train_log.csv", "ckpt_000002.ckpt", "ckpt_000004.ckpt", "last.ckpt"})
    CHECK_MESSAGE(fs::exists(dir.str("run") + "/" + f), f);
  cmgan_trainer_destroy(tr);

  // Resuming from step 2 reproduces the final checkpoint byte for byte.
  REQUIRE(cmgan_trainer_create(cfg.c, dir.str("data").c_str(), &tr) == CMGAN_OK);
  REQUIRE(cmgan_trainer_restore(tr, dir.str("run/ckpt_000002.ckpt").c_str()) == CMGAN_OK);
  CHECK(cmgan_trainer_current_step(tr) == 2);
  cmgan_step_report r{};
  REQUIRE(cmgan_trainer_step(tr, &r) == CMGAN_OK);
  CHECK(r.step == 3);
  REQUIRE(cmgan_trainer_step(tr, &r) == CMGAN_OK);
  REQUIRE(cmgan_trainer_save(tr, dir.str("resumed.ckpt").c_str()) == CMGAN_OK);
  CHECK(slurp(dir.str("resumed.ckpt")) == slurp(dir.str("run/last.ckpt")));
  cmgan_trainer_destroy(tr);

  size_t written = 0, skipped = 0;
  REQUIRE(cmgan_correct(dir.str("run/last.ckpt").c_str(), dir.str("data/val/corrupted").c_str(),
                        dir.str("out").c_str(), &written, &skipped) == CMGAN_OK);
  CHECK(written == 2);
  CHECK(skipped == 0);

  cmgan_metrics m{};
  size_t rows = 0;
  REQUIRE(cmgan_evaluate(dir.str("out").c_str(), dir.str("data/val/clean").c_str(), dir.str("eval/m.csv").c_str(), 1,
                         &m, &rows) == CMGAN_OK);
  CHECK(rows == 2);
  CHECK(m.ssim <= 1.0);
  CHECK(m.mse >= 0.0);
  CHECK(fs::exists(dir.str("eval/m.csv")));
  char line[128];
  REQUIRE(cmgan_format_metrics(&m, line, sizeof line, nullptr) == CMGAN_OK);
  CHECK(std::string(line).rfind("ssim=", 0) == 0);
}

TEST_CASE("c api failure codes") {
  Scratch dir("fail");
  Config cfg;
  small_run(cfg);
  cmgan_trainer* tr = nullptr;
  CHECK(cmgan_trainer_create(cfg.c, dir.str("missing").c_str(), &tr) == CMGAN_ERR_IO);
  CHECK(tr == nullptr);
  CHECK(cmgan_correct(dir.str("none.ckpt").c_str(), dir.str().c_str(), dir.str("o").c_str(), nullptr, nullptr) ==
        CMGAN_ERR_IO);
  fs::create_directories(dir.str("a"));
  fs::create_directories(dir.str("b"));
  CHECK(cmgan_evaluate(dir.str("a").c_str(), dir.str("b").c_str(), nullptr, 0, nullptr, nullptr) == CMGAN_ERR_IO);
  CHECK(cmgan_verify("bogus", nullptr, nullptr) == CMGAN_ERR_CONFIG);
  std::ofstream(dir.str("bad.ckpt")) << "not a checkpoint";
  CHECK(cmgan_correct(dir.str("bad.ckpt").c_str(), dir.str().c_str(), dir.str("o").c_str(), nullptr, nullptr) ==
        CMGAN_ERR_IO);
}

TEST_CASE("verify streams one line per check") {
  std::vector<std::string> lines;
  auto collect = [](const char* l, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(l); };
  CHECK(cmgan_verify("attention", collect, &lines) == CMGAN_OK);
  REQUIRE(lines.size() >= 2);
  for (const auto& l : lines) CHECK(l.rfind("PASS ", 0) == 0);
}

TEST_CASE("warnings reach the installed callback") {
  Scratch dir("warn");
  Config cfg;
  small_run(cfg);
  REQUIRE(cmgan_simulate(cfg.c, nullptr, 3, dir.str("d").c_str(), nullptr) == CMGAN_OK);
  std::ofstream(dir.str("d/val/corrupted/junk.png")) << "junk";
  std::vector<std::string> warnings;
  cmgan_set_warning_callback(
      [](const char* l, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(l); }, &warnings);
  cmgan_metrics m{};
  CHECK(cmgan_evaluate(dir.str("d/val/corrupted").c_str(), dir.str("d/val/clean").c_str(), nullptr, 1, &m,
                       nullptr) == CMGAN_OK);
  cmgan_set_warning_callback(nullptr, nullptr);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("command line exit codes") {
  Scratch dir("cli");
  const std::string small = " --set image_size=16 --set msssim_scales=1 --set feature_layers=2";
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("simulate --phantoms 3") == 2);
  CHECK(run_cli("simulate --out " + dir.str("x")) == 2);
  CHECK(run_cli("simulate --phantoms 3 --clean-dir " + dir.str() + " --out " + dir.str("x")) == 2);
  CHECK(run_cli("simulate --phantoms 3 --set nope=1 --out " + dir.str("x")) == 2);
  CHECK(run_cli("simulate --phantoms 3" + small + " --out " + dir.str("d")) == 0);
  CHECK(fs::exists(dir.str("d/manifest.csv")));
  CHECK(run_cli("train --data " + dir.str("d") + " --out " + dir.str("r") + " --set lr=0") == 2);
  CHECK(run_cli("train --data " + dir.str("d") + " --out " + dir.str("r") + " --ablation pix2pix") == 2);
  CHECK(run_cli("train --data " + dir.str("d") + " --out " + dir.str("r") + small + " --resume") == 3);
  CHECK(run_cli("correct --ckpt " + dir.str("none.ckpt") + " --in " + dir.str("d") + " --out " + dir.str("c")) == 3);
  CHECK(run_cli("evaluate --corrected " + dir.str("d/val/corrupted") + " --reference " + dir.str("d/val/clean")) ==
        0);
  CHECK(run_cli("verify --suite nothing") == 2);
  CHECK(run_cli("verify --suite attention") == 0);
}
