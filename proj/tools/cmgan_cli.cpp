// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C API: simulate, train, correct, evaluate
// and verify. Exit codes: 0 ok, 1 internal or verification failure, 2
// configuration or usage error, 3 I/O error, 4 numerical abort.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmgan/cmgan.h"

namespace fs = std::filesystem;

namespace {

struct ConfigDeleter {
  void operator()(cmgan_config* c) const { cmgan_config_destroy(c); }
};
struct TrainerDeleter {
  void operator()(cmgan_trainer* t) const { cmgan_trainer_destroy(t); }
};
using ConfigPtr = std::unique_ptr<cmgan_config, ConfigDeleter>;
using TrainerPtr = std::unique_ptr<cmgan_trainer, TrainerDeleter>;

// Carries a status out of a subcommand once its message has been printed.
struct Exit {
  int code;
};

void check(cmgan_status s) {
  if (s == CMGAN_OK) return;
  std::fprintf(stderr, "cmgan: %s\n", cmgan_last_error());
  throw Exit{s == CMGAN_ERR_ARGUMENT ? 2 : s == CMGAN_ERR_VERIFY ? 1 : static_cast<int>(s)};
}

struct ConfigFlags {
  std::string path;
  std::vector<std::string> overrides;
  unsigned threads = 0;
  bool threads_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "Key-value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a configuration key (key=value, repeatable)");
    cmd->add_option_function<unsigned>(
        "--threads",
        [this](unsigned t) {
          threads = t;
          threads_set = true;
        },
        "Worker cap (1 gives bit-reproducible output)");
  }

  ConfigPtr build() const {
    cmgan_config* raw = nullptr;
    check(cmgan_config_create(&raw));
    ConfigPtr cfg(raw);
    if (!path.empty()) check(cmgan_config_load(cfg.get(), path.c_str()));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "cmgan: --set expects key=value, got '%s'\n", kv.c_str());
        throw Exit{2};
      }
      check(cmgan_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    if (threads_set) check(cmgan_config_set(cfg.get(), "threads", std::to_string(threads).c_str()));
    return cfg;
  }
};

void print_step(const cmgan_step_report* r, void* user) {
  const int64_t total = *static_cast<const int64_t*>(user);
  if (r->step % 100 != 0 && r->step != total) return;
  std::printf("step %lld/%lld loss_d1=%.4f loss_d2=%.4f loss_g_adv=%.4f total=%.4f\n",
              static_cast<long long>(r->step), static_cast<long long>(total), r->loss_d1, r->loss_d2,
              r->loss_g_adv, r->total);
  std::fflush(stdout);
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }

void print_warning(const char* line, void*) { std::fprintf(stderr, "warning: %s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised MR motion-artifact correction with a self-attention cycle GAN"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cmgan_version());

  // simulate
  auto* sim = app.add_subcommand("simulate", "Synthesize a motion-corrupted dataset");
  ConfigFlags sim_cfg;
  sim_cfg.attach(sim);
  std::string clean_dir, sim_out;
  int phantoms = 0;
  uint64_t sim_seed = 0;
  bool unpaired = false;
  auto* clean_opt = sim->add_option("--clean-dir", clean_dir, "Directory of clean PNG sources")
                        ->check(CLI::ExistingDirectory);
  auto* phantom_opt = sim->add_option("--phantoms", phantoms, "Generate N synthetic phantoms instead");
  clean_opt->excludes(phantom_opt);
  sim->add_option("--out", sim_out, "Output directory")->required();
  auto* seed_opt = sim->add_option("--seed", sim_seed, "Motion and phantom seed (overrides motion_seed)");
  sim->add_flag("--unpaired-shuffle", unpaired, "Draw clean and corrupted training images from disjoint sources");

  // train
  auto* train = app.add_subcommand("train", "Train the cycle model");
  ConfigFlags train_cfg;
  train_cfg.attach(train);
  std::string data_dir, train_out, ablation;
  bool resume = false;
  train->add_option("--data", data_dir, "Dataset directory written by simulate")->required();
  train->add_option("--out", train_out, "Run directory for checkpoints and the training log")->required();
  train->add_flag("--resume", resume, "Continue from <out>/last.ckpt");
  train->add_option("--ablation", ablation, "Loss preset")->check(CLI::IsMember({"cyclegan", "cyclemedgan"}));

  // correct
  auto* corr = app.add_subcommand("correct", "Apply a trained corrector to a directory of PNGs");
  std::string ckpt, corr_in, corr_out;
  corr->add_option("--ckpt", ckpt, "Training checkpoint")->required();
  corr->add_option("--in", corr_in, "Input directory")->required();
  corr->add_option("--out", corr_out, "Output directory")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Compare corrected images against references");
  std::string corrected, reference, report;
  unsigned eval_threads = 0;
  eval->add_option("--corrected", corrected, "Directory of corrected PNGs")->required();
  eval->add_option("--reference", reference, "Directory of reference PNGs")->required();
  eval->add_option("--out", report, "Per-image CSV report");
  eval->add_option("--threads", eval_threads, "Worker cap");

  // verify
  auto* ver = app.add_subcommand("verify", "Run a built-in property suite");
  std::string suite;
  ver->add_option("--suite", suite, "Suite to run")
      ->required()
      ->check(CLI::IsMember({"gradcheck", "metrics", "spectral", "attention"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "cmgan: %s\n\n", e.what());
    CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::fprintf(stderr, "%s", failing->help().c_str());
    return 2;
  }

  cmgan_set_warning_callback(print_warning, nullptr);
  try {
    if (sim->parsed()) {
      if (clean_opt->count() == 0 && phantom_opt->count() == 0) {
        std::fprintf(stderr, "cmgan: simulate needs --clean-dir or --phantoms\n\n%s", sim->help().c_str());
        return 2;
      }
      ConfigPtr cfg = sim_cfg.build();
      if (seed_opt->count()) check(cmgan_config_set(cfg.get(), "motion_seed", std::to_string(sim_seed).c_str()));
      if (unpaired) check(cmgan_config_set(cfg.get(), "unpaired_shuffle", "true"));
      cmgan_dataset_counts counts{};
      check(cmgan_simulate(cfg.get(), clean_opt->count() ? clean_dir.c_str() : nullptr, phantoms, sim_out.c_str(),
                           &counts));
      std::printf("wrote %s: train %lld clean, %lld corrupted; val %lld pairs\n", sim_out.c_str(),
                  static_cast<long long>(counts.clean_train), static_cast<long long>(counts.corrupted_train),
                  static_cast<long long>(counts.val_pairs));
    } else if (train->parsed()) {
      ConfigPtr cfg = train_cfg.build();
      if (!ablation.empty()) check(cmgan_config_apply_ablation(cfg.get(), ablation.c_str()));
      check(cmgan_config_validate(cfg.get()));
      cmgan_trainer* raw = nullptr;
      check(cmgan_trainer_create(cfg.get(), data_dir.c_str(), &raw));
      TrainerPtr tr(raw);
      if (resume) {
        const std::string last = (fs::path(train_out) / "last.ckpt").string();
        check(cmgan_trainer_restore(tr.get(), last.c_str()));
        std::printf("resumed from %s at step %lld\n", last.c_str(),
                    static_cast<long long>(cmgan_trainer_current_step(tr.get())));
      }
      int64_t total = cmgan_trainer_total_steps(tr.get());
      check(cmgan_trainer_fit(tr.get(), train_out.c_str(), print_step, &total));
    } else if (corr->parsed()) {
      size_t written = 0, skipped = 0;
      check(cmgan_correct(ckpt.c_str(), corr_in.c_str(), corr_out.c_str(), &written, &skipped));
      std::printf("corrected %zu image(s), skipped %zu\n", written, skipped);
    } else if (eval->parsed()) {
      cmgan_metrics agg{};
      size_t rows = 0;
      check(cmgan_evaluate(corrected.c_str(), reference.c_str(), report.empty() ? nullptr : report.c_str(),
                           eval_threads, &agg, &rows));
      char line[256];
      check(cmgan_format_metrics(&agg, line, sizeof line, nullptr));
      std::printf("AGGREGATE over %zu image(s): %s\n", rows, line);
    } else if (ver->parsed()) {
      check(cmgan_verify(suite.c_str(), print_line, nullptr));
    }
  } catch (const Exit& e) {
    return e.code;
  }
  return 0;
}
