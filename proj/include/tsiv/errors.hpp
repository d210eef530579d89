#pragma once

#include <stdexcept>
#include <string>

namespace tsiv {

// Input that could not be read at all (CSV cells, config JSON, flags).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally readable input that fails a semantic requirement.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure while fitting: degenerate designs, unstable
// resampling, non-PSD variance estimates.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tsiv
