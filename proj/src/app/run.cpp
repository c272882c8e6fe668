#include "tnn/app/run.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tnn/app/checkpoint.hpp"
#include "tnn/error.hpp"

namespace tnn::app {
namespace {

namespace fs = std::filesystem;

std::string real(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_real(double v) {
  const std::string s = real(v);
  return s.empty() ? "null" : s;
}

std::string elapsed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

long long record_epoch(const std::string& line, LogFormat format) {
  if (format == LogFormat::Csv) return std::atoll(line.c_str());
  const std::size_t at = line.find("\"epoch\":");
  return at == std::string::npos ? -1 : std::atoll(line.c_str() + at + 8);
}

// Keeps the header and every record before `epoch`.
void truncate_log(const fs::path& path, LogFormat format, long long epoch) {
  std::ifstream in(path);
  if (!in) return;
  std::ostringstream kept;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const bool header = first && format == LogFormat::Csv;
    first = false;
    if (header || record_epoch(line, format) < epoch) kept << line << "\n";
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << kept.str();
}

nlohmann::ordered_json metrics_json(const EpochRecord& r) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  return {{"epoch", r.epoch},           {"loss", num(r.loss)},          {"e_l2", num(r.metrics.e_l2)},
          {"e_h1", num(r.metrics.e_h1)}, {"e_lambda", num(r.metrics.e_lambda)}, {"e_bd", num(r.metrics.e_bd)},
          {"energy_error", num(r.metrics.energy)}, {"lambda", num(r.lambda)}};
}

void write_summary(const fs::path& path, const RunConfig& cfg, const std::string& status, const std::string& message,
                   const TrainReport* report, long long epochs) {
  nlohmann::ordered_json s = {{"problem", cfg.problem.name},
                              {"kind", to_string(cfg.problem.kind)},
                              {"dim", cfg.problem.d},
                              {"seed", cfg.seed},
                              {"status", status}};
  if (!message.empty()) s["message"] = message;
  s["epochs"] = epochs;
  if (report) {
    s["final"] = metrics_json(report->final);
    s["wall_seconds"] = report->wall_seconds;
    s["jitter_events"] = report->jitter_events;
    s["skipped_steps"] = report->skipped_steps;
    s["rejected_steps"] = report->rejected_steps;
  }
  std::ofstream out(path, std::ios::trunc);
  out << s.dump(2) << "\n";
}

}  // namespace

int exit_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Domain:
      return 1;
    case ErrorKind::Numerical:
    case ErrorKind::DegenerateBasis:
    case ErrorKind::SingularSystem:
      return 2;
  }
  return 2;
}

std::string log_header(LogFormat format) {
  return format == LogFormat::Csv ? "epoch,phase,loss,e_l2,e_h1,e_lambda,e_bd,elapsed_s" : "";
}

std::string format_record(const EpochRecord& r, LogFormat format) {
  const Metrics& m = r.metrics;
  if (format == LogFormat::Csv)
    return std::to_string(r.epoch) + "," + r.phase + "," + real(r.loss) + "," + real(m.e_l2) + "," + real(m.e_h1) +
           "," + real(m.e_lambda) + "," + real(m.e_bd) + "," + elapsed(r.elapsed);
  return "{\"epoch\":" + std::to_string(r.epoch) + ",\"phase\":\"" + r.phase + "\",\"loss\":" + json_real(r.loss) +
         ",\"e_l2\":" + json_real(m.e_l2) + ",\"e_h1\":" + json_real(m.e_h1) + ",\"e_lambda\":" +
         json_real(m.e_lambda) + ",\"e_bd\":" + json_real(m.e_bd) + ",\"elapsed_s\":" + elapsed(r.elapsed) + "}";
}

RunOutcome run(const RunConfig& cfg, const RunOptions& options) {
  RunOutcome outcome;
  const fs::path dir(cfg.output);
  const fs::path log_path = dir / (cfg.log_format == LogFormat::Csv ? kLogCsv : kLogJsonl);
  const fs::path ckpt_path = dir / kCheckpoint;
  const fs::path summary_path = dir / kSummary;
  long long epoch = 0;
  try {
    fs::create_directories(dir);
    {
      std::ofstream echo(dir / kResolvedConfig, std::ios::trunc);
      echo << echo_config(cfg);
    }

    std::optional<Trainer> trainer;
    std::ios::openmode mode = std::ios::trunc;
    if (options.resume) {
      TrainerSnapshot snap = load_checkpoint(*options.resume);
      if (snap.seed != cfg.seed)
        fail(ErrorKind::Validation, *options.resume + ": checkpoint seed " + std::to_string(snap.seed) +
                                        " differs from the configured seed " + std::to_string(cfg.seed));
      epoch = snap.epoch;
      trainer.emplace(cfg.problem, std::move(snap));
      if (fs::exists(log_path)) {
        truncate_log(log_path, cfg.log_format, epoch);
        mode = std::ios::app;
      }
    } else {
      trainer.emplace(cfg.problem, cfg.seed);
    }

    std::ofstream log(log_path, mode);
    if (!log) fail(ErrorKind::InvalidArgument, log_path.string() + ": cannot write log");
    if (mode == std::ios::trunc && cfg.log_format == LogFormat::Csv) log << log_header(cfg.log_format) << "\n";

    TrainOptions topt;
    topt.threads = cfg.threads;
    topt.checkpoint_every = cfg.checkpoint_every;
    topt.energy = cfg.energy;
    std::string phase;
    topt.on_record = [&](const EpochRecord& r) {
      log << format_record(r, cfg.log_format) << "\n";
      epoch = r.epoch;
      if (options.progress && r.phase != phase) {
        phase = r.phase;
        *options.progress << cfg.problem.name << ": " << phase << " from epoch " << r.epoch << ", loss "
                          << real(r.loss) << "\n";
      }
    };
    topt.on_checkpoint = [&](const TrainerSnapshot& s) {
      log.flush();
      save_checkpoint(ckpt_path.string(), s);
    };

    TrainReport report = trainer->run(topt);
    log.flush();
    write_summary(summary_path, cfg, "ok", "", &report, report.final.epoch);
    outcome.report = std::move(report);
  } catch (const Error& e) {
    outcome.exit_code = exit_status(e.kind());
    outcome.message = std::string(to_string(e.kind())) + ": " + e.what();
    std::error_code ec;
    if (fs::is_directory(dir, ec))
      write_summary(summary_path, cfg, to_string(e.kind()), e.what(), nullptr, epoch);
  } catch (const fs::filesystem_error& e) {
    outcome.exit_code = 1;
    outcome.message = e.what();
  }
  return outcome;
}

}  // namespace tnn::app
