#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "tnn/app/config.hpp"
#include "tnn/error.hpp"
#include "tnn/solver.hpp"

namespace tnn::app {

/// Files written into the output directory.
inline constexpr const char* kLogCsv = "log.csv";
inline constexpr const char* kLogJsonl = "log.jsonl";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kCheckpoint = "checkpoint.txt";
inline constexpr const char* kResolvedConfig = "config.json";

struct RunOptions {
  std::optional<std::string> resume;  // checkpoint to continue from
  std::ostream* progress = nullptr;   // one line per phase and at the end
};

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 1 validation, 2 numerical
  std::string message;
  std::optional<TrainReport> report;
};

int exit_status(ErrorKind kind) noexcept;

/// Trains the configured problem and writes the log, the summary, the
/// resolved configuration and checkpoints. Solver failures are reported in the
/// summary and through the exit code; the last checkpoint is left in place.
RunOutcome run(const RunConfig& cfg, const RunOptions& options = {});

/// One log line without the trailing newline.
std::string format_record(const EpochRecord& r, LogFormat format);
std::string log_header(LogFormat format);

}  // namespace tnn::app
