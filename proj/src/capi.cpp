// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/cmgan.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "cmgan/checkpoint.hpp"
#include "cmgan/error.hpp"
#include "cmgan/image.hpp"
#include "cmgan/log.hpp"
#include "cmgan/metrics.hpp"
#include "cmgan/motion_sim.hpp"
#include "cmgan/run_config.hpp"
#include "cmgan/trainer.hpp"
#include "cmgan/verify.hpp"

namespace fs = std::filesystem;
using namespace cmgan;

struct cmgan_config {
  RunConfig run;
};

struct cmgan_trainer {
  RunConfig run;
  Dataset<float> data;
  std::unique_ptr<Trainer<float>> trainer;
};

namespace {

thread_local std::string last_error;

cmgan_status fail(cmgan_status s, const std::string& message) {
  last_error = message;
  return s;
}

cmgan_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kVersion:
      return CMGAN_ERR_IO;
    case ErrorKind::kNumerical:
      return CMGAN_ERR_NUMERICAL;
    default:
      return CMGAN_ERR_CONFIG;
  }
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
cmgan_status guard(F body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    return fail(CMGAN_ERR_NUMERICAL, "numerical failure in " + e.component() + ": " + e.what());
  } catch (const Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(CMGAN_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CMGAN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CMGAN_ERR_INTERNAL, e.what());
  }
}

cmgan_status null_argument(const char* what) { return fail(CMGAN_ERR_ARGUMENT, std::string(what) + " is null"); }

cmgan_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && cap > 0) {
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return CMGAN_OK;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

std::vector<Tensor<float>> load_domain(const fs::path& dir, int64_t size) {
  std::vector<std::string> names;
  const std::vector<Image> images = load_png_dir(dir.string(), &names);
  std::vector<Tensor<float>> out;
  out.reserve(images.size());
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].height != size || images[i].width != size)
      throw ConfigError((dir / names[i]).string() + " is " + std::to_string(images[i].height) + "x" +
                        std::to_string(images[i].width) + ", expected image_size " + std::to_string(size));
    out.push_back(to_tensor<float>(images[i]));
  }
  return out;
}

cmgan_step_report to_c(const StepReport& r) {
  return {r.step, r.loss_d1, r.loss_d2, r.loss_g_adv, r.l_cyc, r.l_msssim, r.l_cpercep, r.l_cstyle, r.total};
}

}  // namespace

extern "C" {

const char* cmgan_version(void) { return "2.0.0"; }

const char* cmgan_last_error(void) { return last_error.c_str(); }

void cmgan_set_warning_callback(cmgan_line_fn fn, void* user) {
  if (!fn) {
    set_warning_sink([](const std::string& m) { std::fprintf(stderr, "warning: %s\n", m.c_str()); });
    return;
  }
  set_warning_sink([fn, user](const std::string& m) { fn(m.c_str(), user); });
}

cmgan_status cmgan_config_create(cmgan_config** out) {
  if (!out) return null_argument("out");
  return guard([&] {
    *out = new cmgan_config();
    return CMGAN_OK;
  });
}

void cmgan_config_destroy(cmgan_config* cfg) { delete cfg; }

cmgan_status cmgan_config_load(cmgan_config* cfg, const char* path) {
  if (!cfg || !path) return null_argument(cfg ? "path" : "config");
  return guard([&] {
    cfg->run.load(path);
    return CMGAN_OK;
  });
}

cmgan_status cmgan_config_set(cmgan_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return null_argument(!cfg ? "config" : !key ? "key" : "value");
  return guard([&] {
    cfg->run.set(key, value);
    return CMGAN_OK;
  });
}

cmgan_status cmgan_config_get(const cmgan_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  if (!cfg || !key) return null_argument(cfg ? "key" : "config");
  return guard([&] { return copy_out(cfg->run.get(key), buf, cap, needed); });
}

cmgan_status cmgan_config_apply_ablation(cmgan_config* cfg, const char* preset) {
  if (!cfg || !preset) return null_argument(cfg ? "preset" : "config");
  return guard([&] {
    cfg->run.apply_ablation(preset);
    return CMGAN_OK;
  });
}

cmgan_status cmgan_config_validate(const cmgan_config* cfg) {
  if (!cfg) return null_argument("config");
  return guard([&] {
    cfg->run.validate();
    return CMGAN_OK;
  });
}

cmgan_status cmgan_config_write(const cmgan_config* cfg, const char* path) {
  if (!cfg || !path) return null_argument(cfg ? "path" : "config");
  return guard([&] {
    write_text(path, cfg->run.dump());
    return CMGAN_OK;
  });
}

cmgan_status cmgan_simulate(const cmgan_config* cfg, const char* clean_dir, int phantoms, const char* out_dir,
                            cmgan_dataset_counts* counts) {
  if (!cfg || !out_dir) return null_argument(cfg ? "out_dir" : "config");
  return guard([&] {
    const RunConfig& run = cfg->run;
    run.validate();
    std::vector<Image> clean;
    std::vector<std::string> names;
    if (clean_dir) {
      clean = load_png_dir(clean_dir, &names);
    } else {
      if (phantoms < 1) throw ConfigError("phantom count must be >= 1, got " + std::to_string(phantoms));
      clean = make_phantoms(phantoms, run.train.image_size, run.motion.seed);
      for (int i = 0; i < phantoms; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "phantom_%04d", i);
        names.push_back(name);
      }
    }
    const DatasetCounts planned = plan_dataset(static_cast<int64_t>(clean.size()), run.split, run.unpaired_shuffle);
    generate_dataset(clean, names, run.motion, out_dir, run.unpaired_shuffle, run.split, run.threads);
    write_text(fs::path(out_dir) / "config.txt", run.dump());
    if (counts) *counts = {planned.clean_train, planned.corrupted_train, planned.val_pairs};
    return CMGAN_OK;
  });
}

cmgan_status cmgan_trainer_create(const cmgan_config* cfg, const char* data_dir, cmgan_trainer** out) {
  if (!cfg || !data_dir || !out) return null_argument(!cfg ? "config" : !data_dir ? "data_dir" : "out");
  return guard([&] {
    auto tr = std::make_unique<cmgan_trainer>();
    tr->run = cfg->run;
    tr->run.validate();
    const fs::path root = fs::path(data_dir) / "train";
    tr->data.x = load_domain(root / "corrupted", tr->run.train.image_size);
    tr->data.y = load_domain(root / "clean", tr->run.train.image_size);
    if (tr->data.x.empty() || tr->data.y.empty())
      throw ConfigError("training needs images in both " + (root / "corrupted").string() + " and " +
                        (root / "clean").string());
    tr->trainer = std::make_unique<Trainer<float>>(tr->run.train, &tr->data.y);
    *out = tr.release();
    return CMGAN_OK;
  });
}

void cmgan_trainer_destroy(cmgan_trainer* tr) { delete tr; }

cmgan_status cmgan_trainer_restore(cmgan_trainer* tr, const char* checkpoint_path) {
  if (!tr || !checkpoint_path) return null_argument(tr ? "checkpoint_path" : "trainer");
  return guard([&] {
    tr->trainer->restore(Checkpoint::load(checkpoint_path));
    tr->run.train.seed = tr->trainer->config().seed;
    return CMGAN_OK;
  });
}

cmgan_status cmgan_trainer_save(const cmgan_trainer* tr, const char* checkpoint_path) {
  if (!tr || !checkpoint_path) return null_argument(tr ? "checkpoint_path" : "trainer");
  return guard([&] {
    tr->trainer->checkpoint().save(checkpoint_path);
    return CMGAN_OK;
  });
}

cmgan_status cmgan_trainer_step(cmgan_trainer* tr, cmgan_step_report* report) {
  if (!tr) return null_argument("trainer");
  return guard([&] {
    auto [bx, by] = batch_for_step(tr->data, tr->trainer->config(), tr->trainer->step());
    const StepReport r = tr->trainer->train_step(bx, by);
    if (report) *report = to_c(r);
    return CMGAN_OK;
  });
}

cmgan_status cmgan_trainer_fit(cmgan_trainer* tr, const char* out_dir, cmgan_step_fn on_step, void* user) {
  if (!tr || !out_dir) return null_argument(tr ? "out_dir" : "trainer");
  return guard([&] {
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string());
    write_text(out / "config.txt", tr->run.dump());
    FitOptions opt;
    opt.log_path = (out / "train_log.csv").string();
    opt.checkpoint_dir = out.string();
    if (on_step)
      opt.on_step = [on_step, user](const StepReport& r) {
        const cmgan_step_report c = to_c(r);
        on_step(&c, user);
      };
    fit(*tr->trainer, tr->data, opt);
    return CMGAN_OK;
  });
}

int64_t cmgan_trainer_current_step(const cmgan_trainer* tr) { return tr ? tr->trainer->step() : -1; }

int64_t cmgan_trainer_total_steps(const cmgan_trainer* tr) {
  return tr ? total_steps(tr->trainer->config(), tr->data.x.size(), tr->data.y.size()) : -1;
}

cmgan_status cmgan_correct(const char* checkpoint_path, const char* in_dir, const char* out_dir, size_t* written,
                           size_t* skipped) {
  if (!checkpoint_path || !in_dir || !out_dir)
    return null_argument(!checkpoint_path ? "checkpoint_path" : !in_dir ? "in_dir" : "out_dir");
  return guard([&] {
    if (!fs::exists(checkpoint_path)) throw IoError("checkpoint not found: " + std::string(checkpoint_path));
    Generator<float> g1 = load_g1<float>(Checkpoint::load(checkpoint_path));
    const CorrectionResult r = correct_images(g1, in_dir, out_dir);
    for (const auto& s : r.skipped) warn("skipped " + s);
    if (written) *written = r.written.size();
    if (skipped) *skipped = r.skipped.size();
    return CMGAN_OK;
  });
}

cmgan_status cmgan_evaluate(const char* corrected_dir, const char* reference_dir, const char* csv_path,
                            unsigned threads, cmgan_metrics* aggregate, size_t* rows) {
  if (!corrected_dir || !reference_dir) return null_argument(corrected_dir ? "reference_dir" : "corrected_dir");
  return guard([&] {
    const MetricsReport report = evaluate_dataset(corrected_dir, reference_dir, threads);
    for (const auto& e : report.errors) warn(e);
    if (report.rows.empty())
      throw IoError("no image pairs between " + std::string(corrected_dir) + " and " + reference_dir);
    if (csv_path) {
      const fs::path parent = fs::path(csv_path).parent_path();
      std::error_code ec;
      if (!parent.empty()) fs::create_directories(parent, ec);
      write_text(csv_path, metrics_csv(report));
    }
    const MetricsRow& a = report.aggregate;
    if (aggregate) *aggregate = {a.ssim, a.psnr_db, a.mse, a.uqi};
    if (rows) *rows = report.rows.size();
    return CMGAN_OK;
  });
}

cmgan_status cmgan_format_metrics(const cmgan_metrics* m, char* buf, size_t cap, size_t* needed) {
  if (!m) return null_argument("metrics");
  return guard([&] {
    return copy_out("ssim=" + format_metric(m->ssim) + " psnr_db=" + format_metric(m->psnr_db) +
                        " mse=" + format_metric(m->mse) + " uqi=" + format_metric(m->uqi),
                    buf, cap, needed);
  });
}

cmgan_status cmgan_verify(const char* suite, cmgan_line_fn on_line, void* user) {
  if (!suite) return null_argument("suite");
  return guard([&] {
    const SuiteResult r = run_suite(suite);
    if (on_line)
      for (const auto& c : r.checks) {
        const std::string line = std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail;
        on_line(line.c_str(), user);
      }
    if (!r.passed()) return fail(CMGAN_ERR_VERIFY, "verify suite '" + std::string(suite) + "' reported failures");
    return CMGAN_OK;
  });
}

}  // extern "C"
