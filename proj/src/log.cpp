// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/log.hpp"

#include <iostream>
#include <mutex>

namespace cmgan {
namespace {

std::mutex g_sink_mutex;

LogSink& sink() {
  static LogSink s = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
  return s;
}

}  // namespace

LogSink set_warning_sink(LogSink s) {
  std::lock_guard lock(g_sink_mutex);
  LogSink old = std::move(sink());
  sink() = std::move(s);
  return old;
}

void warn(const std::string& message) {
  std::lock_guard lock(g_sink_mutex);
  if (sink()) sink()(message);
}

}  // namespace cmgan
