#pragma once

#include <stdexcept>
#include <string>

namespace progd {

// Shape or rank mismatch in a tensor operation.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: non-scalar backward root, backward on a consumed tape, ...
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

// Aggregation over an empty neighborhood; the caller decides the fallback.
class EmptyNeighborhoodError : public std::runtime_error {
 public:
  EmptyNeighborhoodError() : std::runtime_error("empty neighborhood") {}
};

// Domain validation failure: scenario files, configs, checkpoints.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted on a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace progd
