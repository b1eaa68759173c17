// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crossbar {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a meaningful result
/// (singular matrix, zero pivot, non-finite data).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or configuration text.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ILU(0) hit a zero pivot; `row()` names the offending row.
class ZeroPivotError : public NumericalError {
 public:
  explicit ZeroPivotError(std::size_t row)
      : NumericalError("zero pivot in row " + std::to_string(row)), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": size " + std::to_string(a) +
                         " does not match " + std::to_string(b));
  }
}

}  // namespace detail
}  // namespace crossbar
