#pragma once

#include <stdexcept>
#include <string>

namespace opentunnel {

// Error categories map onto the CLI exit codes: configuration/usage -> 2,
// numerical instability -> 3, non-convergence -> 4.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct usage_error : std::runtime_error {
  explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

struct instability_error : std::runtime_error {
  explicit instability_error(const std::string& what) : std::runtime_error(what) {}
};

struct convergence_error : std::runtime_error {
  explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace opentunnel
