#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tnn/app/checkpoint.hpp"
#include "tnn/app/config.hpp"
#include "tnn/app/registry.hpp"
#include "tnn/app/run.hpp"
#include "tnn/error.hpp"

using namespace tnn;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::string validation_message(const std::string& text) {
  try {
    app::parse_config(text, "cfg.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    return e.what();
  }
  FAIL("expected a validation error");
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tnn-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Drops the elapsed column, the only wall-clock field in the log.
std::string numeric_log(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

const char* kTiny = R"j({
  "problem": "poisson-homo-d2",
  "seed": 7,
  "threads": 1,
  "checkpoint_every": 10,
  "grid": {"subintervals": 4, "points": 8},
  "network": {"hidden": [8], "rank": 3},
  "schedule": {"adam_epochs": 20, "lbfgs_epochs": 5}
})j";

app::RunConfig tiny(const fs::path& out) {
  app::RunConfig cfg = app::parse_config(kTiny);
  cfg.output = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("registry examples carry the exact data") {
  const auto harmonic = app::lookup("harmonic-d5");
  REQUIRE(harmonic);
  REQUIRE(harmonic->exact.lambda);
  CHECK(*harmonic->exact.lambda == doctest::Approx(5.0).epsilon(1e-15));

  const auto neumann = app::lookup("neumann-d5");
  REQUIRE(neumann);
  REQUIRE(neumann->exact.u);
  const std::vector<double> x{0.1, 0.25, 0.4, 0.7, 0.95};
  double want = 0.0;
  for (double xi : x) want += std::sin(kPi * xi);
  CHECK((*neumann->exact.u)(x) == doctest::Approx(want).epsilon(1e-14));

  const auto homo = app::lookup("poisson-homo-d5");
  REQUIRE(homo);
  REQUIRE(homo->exact.u);
  // u = sum_k sin(2 pi x_k) prod_{i != k} sin(pi x_i), f = (d+3) pi^2 u
  double u = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double t = std::sin(2 * kPi * x[k]);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (i != k) t *= std::sin(kPi * x[i]);
    u += t;
  }
  CHECK((*homo->exact.u)(x) == doctest::Approx(u).epsilon(1e-13));
  CHECK(homo->f(x) == doctest::Approx(8 * kPi * kPi * u).epsilon(1e-13));
}

TEST_CASE("registry covers every family and dimension") {
  for (const char* stem : {"poisson-homo", "poisson-nonhomo", "neumann", "laplace-eigen", "harmonic"})
    for (int d : {2, 5, 10, 20}) {
      const std::string name = std::string(stem) + "-d" + std::to_string(d);
      CAPTURE(name);
      const auto p = app::lookup(name);
      REQUIRE(p);
      CHECK(p->d == d);
      CHECK((p->exact.u || p->exact.lambda));
      CHECK(app::lookup(name + "-desk"));
    }
  CHECK_FALSE(app::lookup("poisson-homo-d3"));
}

TEST_CASE("registry names resolve through the config") {
  const app::RunConfig cfg = app::parse_config(R"j({"problem": "laplace-eigen-d5"})j");
  CHECK(cfg.problem.kind == ProblemKind::Eigen);
  CHECK(cfg.problem.d == 5);
  REQUIRE(cfg.problem.exact.lambda);
  CHECK(*cfg.problem.exact.lambda == doctest::Approx(5 * kPi * kPi).epsilon(1e-15));
  for (const DimDomain& dom : cfg.problem.domain) {
    CHECK(dom.kind == DimKind::Interval);
    CHECK(dom.a == 0.0);
    CHECK(dom.b == 1.0);
  }
}

TEST_CASE("seed defaults to zero and is echoed") {
  const app::RunConfig cfg = app::parse_config(R"j({"problem": "poisson-homo-d2"})j");
  CHECK(cfg.seed == 0);
  const std::string echo = app::echo_config(cfg);
  CHECK(echo.find("\"seed\": 0") != std::string::npos);
  const app::RunConfig again = app::parse_config(echo);
  CHECK(app::echo_config(again) == echo);
}

TEST_CASE("inline problems echo and parse back unchanged") {
  const app::RunConfig cfg = app::parse_config(R"j({
    "problem": {
      "kind": "homo-dirichlet",
      "dim": 2,
      "domain": [0, 1],
      "operator": {"b": 2.5},
      "f": {"product": "sin(pi*x)", "coef": 3},
      "exact": {"u": {"product": "sin(pi*x)"}}
    },
    "seed": 3,
    "log_format": "json-lines"
  })j");
  CHECK(cfg.problem.d == 2);
  CHECK(cfg.seed == 3);
  CHECK(cfg.log_format == app::LogFormat::JsonLines);
  const std::string echo = app::echo_config(cfg);
  CHECK(app::echo_config(app::parse_config(echo)) == echo);
}

TEST_CASE("config errors name the field and the line") {
  const std::string missing = validation_message(R"j({
  "problem": {
    "kind": "homo-dirichlet",
    "dim": 2,
    "f": 1
  }
})j");
  CHECK(missing.find("problem.domain") != std::string::npos);
  CHECK(missing.find("missing required field") != std::string::npos);

  const std::string unknown = validation_message("{\n  \"problem\": \"poisson-homo-d2\",\n  \"sede\": 1\n}");
  CHECK(unknown.find("cfg.json:3: sede") != std::string::npos);

  const std::string syntax = validation_message("{\n  \"problem\": \"poisson-homo-d2\",\n  \"seed\": \n}");
  CHECK(syntax.find("cfg.json:4:") != std::string::npos);

  const std::string expr = validation_message(R"j({
  "problem": {
    "kind": "homo-dirichlet", "dim": 2, "domain": [0, 1],
    "f": {"product": "sin(pi*x"}
  }
})j");
  CHECK(expr.find("cfg.json:4: problem.f.product") != std::string::npos);

  CHECK(validation_message(R"j({"problem": "no-such-problem"})j").find("unknown registry problem") != std::string::npos);
  CHECK(validation_message(R"j({"problem": "poisson-homo-d2", "schedule": {"adam_lr": -1}})j").find("schedule.adam_lr") !=
        std::string::npos);
  CHECK(validation_message(R"j({"problem": "poisson-homo-d2", "seed": -1})j").find("seed") != std::string::npos);
}

TEST_CASE("exit codes follow the error kind") {
  CHECK(app::exit_status(ErrorKind::Validation) == 1);
  CHECK(app::exit_status(ErrorKind::Domain) == 1);
  CHECK(app::exit_status(ErrorKind::Numerical) == 2);
  CHECK(app::exit_status(ErrorKind::SingularSystem) == 2);
  CHECK(app::exit_status(ErrorKind::DegenerateBasis) == 2);
}

TEST_CASE("log records leave inapplicable columns blank") {
  EpochRecord r;
  r.epoch = 12;
  r.phase = "adam";
  r.loss = 0.5;
  r.metrics.e_l2 = 0.25;
  r.elapsed = 1.5;
  CHECK(app::log_header(app::LogFormat::Csv) == "epoch,phase,loss,e_l2,e_h1,e_lambda,e_bd,elapsed_s");
  CHECK(app::format_record(r, app::LogFormat::Csv) == "12,adam,0.5,0.25,,,,1.500");
  CHECK(app::format_record(r, app::LogFormat::JsonLines) ==
        R"j({"epoch":12,"phase":"adam","loss":0.5,"e_l2":0.25,"e_h1":null,"e_lambda":null,"e_bd":null,"elapsed_s":1.500})j");
}

TEST_CASE("checkpoint text survives a write/read/write cycle") {
  const app::RunConfig cfg = tiny(scratch("ckpt"));
  TrainerSnapshot mid;
  bool taken = false;
  TrainOptions opt;
  opt.checkpoint_every = 10;
  opt.on_checkpoint = [&](const TrainerSnapshot& s) {
    if (!taken) mid = s;
    taken = true;
  };
  Trainer(cfg.problem, cfg.seed).run(opt);
  REQUIRE(taken);
  const std::string text = app::format_checkpoint(mid);
  CHECK(app::format_checkpoint(app::parse_checkpoint(text)) == text);

  const fs::path file = scratch("ckpt-file");
  fs::create_directories(file);
  app::save_checkpoint((file / "c.txt").string(), mid);
  CHECK(slurp(file / "c.txt") == text);
  CHECK(app::format_checkpoint(app::load_checkpoint((file / "c.txt").string())) == text);

  CHECK_THROWS_AS(app::parse_checkpoint("garbage"), Error);
  fs::remove_all(file);
}

TEST_CASE("a resumed trainer reproduces the next epoch exactly") {
  const app::RunConfig cfg = tiny(scratch("resume-trainer"));
  std::vector<TrainerSnapshot> snaps;
  TrainOptions opt;
  opt.checkpoint_every = 10;
  opt.on_checkpoint = [&](const TrainerSnapshot& s) { snaps.push_back(s); };
  const TrainReport full = Trainer(cfg.problem, cfg.seed).run(opt);
  REQUIRE(snaps.size() >= 2);

  for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
    CAPTURE(snaps[k].epoch);
    const TrainerSnapshot snap = app::parse_checkpoint(app::format_checkpoint(snaps[k]));
    const TrainReport rest = Trainer(cfg.problem, snap).run(TrainOptions{});
    REQUIRE_FALSE(rest.records.empty());
    const EpochRecord& first = rest.records.front();
    const auto it = std::find_if(full.records.begin(), full.records.end(),
                                 [&](const EpochRecord& r) { return r.epoch == first.epoch; });
    REQUIRE(it != full.records.end());
    CHECK(first.loss == it->loss);
    CHECK(rest.final.loss == full.final.loss);
    CHECK(rest.final.metrics.e_l2 == full.final.metrics.e_l2);
  }
}

TEST_CASE("run writes the artifacts and is deterministic") {
  const fs::path a = scratch("run-a");
  const fs::path b = scratch("run-b");
  const app::RunOutcome ra = app::run(tiny(a));
  const app::RunOutcome rb = app::run(tiny(b));
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  for (const char* f : {app::kLogCsv, app::kSummary, app::kCheckpoint, app::kResolvedConfig})
    CHECK(fs::exists(a / f));

  const std::string log = numeric_log(a / app::kLogCsv);
  CHECK(log == numeric_log(b / app::kLogCsv));
  CHECK(log.rfind("epoch,phase,loss,e_l2,e_h1,e_lambda,e_bd\n", 0) == 0);
  // one line per epoch plus the final record
  CHECK(std::count(log.begin(), log.end(), '\n') == 1 + 25 + 1);

  const app::RunConfig echoed = app::load_config((a / app::kResolvedConfig).string());
  CHECK(echoed.seed == 7);
  CHECK(echoed.problem.net.rank == 3);

  const std::string summary = slurp(a / app::kSummary);
  CHECK(summary.find("\"status\": \"ok\"") != std::string::npos);

  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("run resumes from a checkpoint to the same final metrics") {
  const fs::path full_dir = scratch("resume-full");
  const fs::path part_dir = scratch("resume-part");
  const app::RunConfig cfg = tiny(full_dir);
  const app::RunOutcome full = app::run(cfg);
  REQUIRE(full.exit_code == 0);

  TrainerSnapshot mid;
  TrainOptions opt;
  opt.checkpoint_every = 10;
  bool taken = false;
  opt.on_checkpoint = [&](const TrainerSnapshot& s) {
    if (!taken) mid = s;
    taken = true;
  };
  Trainer(cfg.problem, cfg.seed).run(opt);
  REQUIRE(taken);
  fs::create_directories(part_dir);
  const std::string ckpt = (part_dir / "mid.txt").string();
  app::save_checkpoint(ckpt, mid);

  app::RunConfig part = cfg;
  part.output = part_dir.string();
  app::RunOptions ro;
  ro.resume = ckpt;
  const app::RunOutcome resumed = app::run(part, ro);
  REQUIRE(resumed.exit_code == 0);
  REQUIRE(resumed.report);
  const EpochRecord& x = full.report->final;
  const EpochRecord& y = resumed.report->final;
  CHECK(y.epoch == x.epoch);
  CHECK(std::abs(y.metrics.e_l2 - x.metrics.e_l2) <= 1e-10 * std::abs(x.metrics.e_l2));
  CHECK(std::abs(y.metrics.e_h1 - x.metrics.e_h1) <= 1e-10 * std::abs(x.metrics.e_h1));
  CHECK(std::abs(y.loss - x.loss) <= 1e-10 * std::abs(x.loss));

  app::RunConfig other = part;
  other.seed = 8;
  CHECK(app::run(other, ro).exit_code == 1);

  fs::remove_all(full_dir);
  fs::remove_all(part_dir);
}

TEST_CASE("a missing resume file is a validation failure with a summary") {
  const fs::path dir = scratch("resume-missing");
  app::RunOptions ro;
  ro.resume = (dir / "nope.txt").string();
  const app::RunOutcome out = app::run(tiny(dir), ro);
  CHECK(out.exit_code != 0);
  CHECK(fs::exists(dir / app::kSummary));
  fs::remove_all(dir);
}
