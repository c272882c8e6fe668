#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tnn/problem.hpp"

namespace tnn::app {

struct RegistryEntry {
  std::string name;
  std::string summary;
  ProblemSpec problem;
};

/// Benchmark problems at d in {2, 5, 10, 20}, each also as a "-desk" variant
/// with a reduced schedule.
const std::vector<RegistryEntry>& registry();
std::optional<ProblemSpec> lookup(const std::string& name);
/// A registry family ("poisson-homo", "neumann", ...) at any d >= 1, full schedule.
std::optional<ProblemSpec> family(const std::string& stem, int d);

}  // namespace tnn::app
