#pragma once

#include <string>
#include <string_view>

#include "tnn/solver.hpp"

namespace tnn::app {

inline constexpr int kCheckpointVersion = 1;

/// Sectioned "key = value" text; reals at 17 significant digits so a
/// write/read/write cycle reproduces the bytes.
std::string format_checkpoint(const TrainerSnapshot& snap);
TrainerSnapshot parse_checkpoint(std::string_view text, const std::string& origin = "<checkpoint>");

/// Written to a sibling temporary file first, then renamed over `path`.
void save_checkpoint(const std::string& path, const TrainerSnapshot& snap);
TrainerSnapshot load_checkpoint(const std::string& path);

}  // namespace tnn::app
