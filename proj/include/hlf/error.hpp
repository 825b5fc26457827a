// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hlf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, inconsistent sizes, schema violations. CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced during a render or a fit. CLI exit code 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Carries the byte offset where parsing stopped.
class FormatError : public ValidationError {
 public:
  FormatError(const std::string& path, std::uint64_t offset, const std::string& what)
      : ValidationError(path + ": byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace hlf
