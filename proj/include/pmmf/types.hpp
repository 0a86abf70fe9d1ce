// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pmmf {

using index_t = std::int64_t;

/// One matrix entry in coordinate form.
struct Triplet {
  index_t row = 0;
  index_t col = 0;
  double value = 0.0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Malformed or unreadable input data (files, headers, indices).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation that cannot proceed numerically (breakdowns, caps).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pmmf
