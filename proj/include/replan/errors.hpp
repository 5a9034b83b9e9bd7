#pragma once

#include <stdexcept>
#include <string>

namespace replan {

// Bad file content, schema mismatch, or an out-of-range config value.
// The CLI maps this to its validation exit code.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Scenario construction exhausted its retry budget without producing a scene
// that passes its own feasibility checks.
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace replan
