#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "tnn/problem.hpp"

namespace tnn::app {

enum class LogFormat { Csv, JsonLines };

struct RunConfig {
  ProblemSpec problem;
  std::uint64_t seed = 0;
  std::string output = "tnn-run";
  long long checkpoint_every = 1000;
  LogFormat log_format = LogFormat::Csv;
  int threads = 1;  // set to the available parallelism when the key is absent
  bool energy = false;
};

/// Parses a JSON run configuration. "problem" is a registry name or an inline
/// problem; with a name, "grid", "network" and "schedule" objects at the top
/// level override the registry values. Errors are Validation errors of the
/// form "origin:line: field.path: message".
RunConfig parse_config(std::string_view text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// The fully resolved configuration (every default filled in) as JSON text;
/// parse_config accepts it back.
std::string echo_config(const RunConfig& cfg);

int default_threads();

}  // namespace tnn::app
