// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

namespace cmgan {

using LogSink = std::function<void(const std::string&)>;

// Replaces the warning sink (default: standard error). Returns the old one.
LogSink set_warning_sink(LogSink sink);
void warn(const std::string& message);

}  // namespace cmgan
