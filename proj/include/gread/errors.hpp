#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gread {

// Bad configuration: unknown keys, invalid dimensions, out-of-range settings.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or structurally inconsistent input data (files, graphs, splits).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered while integrating, scoring or differentiating.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what, std::size_t step = 0)
      : std::runtime_error(what), step_index(step) {}
  std::size_t step_index;
};

}  // namespace gread
