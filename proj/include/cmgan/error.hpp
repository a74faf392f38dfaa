// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cmgan {

// Error categories map one-to-one onto C API status codes and CLI exit codes.
enum class ErrorKind {
  kConfig,     // invalid configuration or architecture request
  kDimension,  // tensor shape mismatch
  kDomain,     // value outside an operation's domain
  kUsage,      // API misuse (e.g. backward on a non-scalar)
  kIo,         // filesystem or format failure
  kVersion,    // container magic/version mismatch
  kNumerical,  // NaN/Inf produced during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& w)
      : Error(ErrorKind::kDimension, w) {}
};
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& w) : Error(ErrorKind::kDomain, w) {}
};
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& w) : Error(ErrorKind::kUsage, w) {}
};
class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};
class VersionError : public Error {
 public:
  explicit VersionError(const std::string& w) : Error(ErrorKind::kVersion, w) {}
};

// Raised when a training loss goes non-finite; `component` names the loss.
class NumericalError : public Error {
 public:
  NumericalError(std::string component, const std::string& w)
      : Error(ErrorKind::kNumerical, w), component_(std::move(component)) {}
  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

}  // namespace cmgan
