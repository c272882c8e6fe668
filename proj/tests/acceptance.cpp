// Prints one PASS/FAIL line per acceptance criterion. With arguments, runs
// only the named criteria ("C1 C4 ..."). Exit status 0 when every selected
// criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tnn/app/checkpoint.hpp"
#include "tnn/app/config.hpp"
#include "tnn/app/registry.hpp"
#include "tnn/app/run.hpp"
#include "tnn/error.hpp"
#include "tnn/oracle.hpp"
#include "tnn/solver.hpp"

using namespace tnn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

bool within(double seconds, double limit, std::string& detail) {
  detail += ", " + fmt("%.1f", seconds) + " s (limit " + fmt("%.0f", limit) + " s)";
  return seconds <= limit;
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrainReport train(const ProblemSpec& p, bool energy = false) {
  Trainer tr(p, 0);
  TrainOptions opt;
  opt.threads = app::default_threads();
  opt.checkpoint_every = 0;
  opt.energy = energy;
  return tr.run(opt);
}

ProblemSpec desk(const std::string& name) {
  const auto p = app::lookup(name);
  if (!p) fail(ErrorKind::InvalidArgument, "no registry entry " + name);
  return *p;
}

Verdict c1() {
  const auto t0 = std::chrono::steady_clock::now();
  const oracle::QuadratureReport q = oracle::quadrature_report();
  Verdict v;
  v.detail = "Gauss-Legendre 16 monomials <= 31 abs err " + sci(q.legendre_max_abs) +
             " (<= 1e-13), Gauss-Hermite 200 moments <= 5 rel err " + sci(q.hermite_max_rel) + " (<= 1e-10)";
  v.pass = q.legendre_max_abs <= 1e-13 && q.hermite_max_rel <= 1e-10;
  v.pass = within(since(t0), 1.0, v.detail) && v.pass;
  return v;
}

Verdict c2() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<oracle::AssemblyCheck> checks = oracle::assembly_suite();
  double worst = 0.0;
  std::string where;
  for (const auto& c : checks)
    if (c.worst() >= worst) {
      worst = c.worst();
      where = c.name;
    }
  Verdict v;
  v.detail = std::to_string(checks.size()) + " cases at d in {2,3}, p <= 5, worst rel err " + sci(worst) + " (" +
             where + ", <= 1e-11)";
  v.pass = worst <= 1e-11;
  v.pass = within(since(t0), 60.0, v.detail) && v.pass;
  return v;
}

Verdict c3() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<oracle::GradientCheck> checks = oracle::gradient_suite(1e-4);
  double worst = 0.0;
  std::string where;
  for (const auto& c : checks)
    if (c.max_rel >= worst) {
      worst = c.max_rel;
      where = c.name;
    }
  Verdict v;
  v.detail = std::to_string(checks.size()) + " losses at d=2, p=2, width 4, h=1e-4, worst rel err " + sci(worst) +
             " (" + where + ", <= 1e-5)";
  v.pass = worst <= 1e-5 && checks.size() >= 6;
  v.pass = within(since(t0), 60.0, v.detail) && v.pass;
  return v;
}

Verdict c4() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport rep = train(oracle::reaction_dirichlet(2), true);
  double worst = -1e300;
  long long violations = 0;
  for (const EpochRecord& r : rep.records) {
    const double slack = r.metrics.energy - (r.loss + 1e-6 * (1.0 + r.loss));
    if (!(slack <= 0.0)) ++violations;
    worst = std::max(worst, r.metrics.energy / r.loss);
  }
  Verdict v;
  v.detail = std::to_string(rep.records.size()) + " epochs with b = pi^2, " + std::to_string(violations) +
             " with ||u - u_p||_a > eta + 1e-6 (1 + eta), max ratio " + fmt("%.4f", worst);
  v.pass = violations == 0 && !rep.records.empty();
  v.pass = within(since(t0), 300.0, v.detail) && v.pass;
  return v;
}

Verdict c5() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport rep = train(desk("poisson-homo-d5-desk"));
  const Metrics& m = rep.final.metrics;
  Verdict v;
  v.detail = "homogeneous Dirichlet d=5: e_L2 " + sci(m.e_l2) + " (<= 1e-4), e_H1 " + sci(m.e_h1) + " (<= 1e-3)";
  v.pass = m.e_l2 <= 1e-4 && m.e_h1 <= 1e-3;
  v.pass = within(since(t0), 1800.0, v.detail) && v.pass;
  return v;
}

Verdict c6() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport rep = train(desk("laplace-eigen-d5-desk"));
  const Metrics& m = rep.final.metrics;
  Verdict v;
  v.detail = "Laplace eigenvalue d=5: e_lambda " + sci(m.e_lambda) + " (<= 1e-8), lambda " + fmt("%.12f", rep.final.lambda);
  v.pass = m.e_lambda <= 1e-8;
  v.pass = within(since(t0), 1800.0, v.detail) && v.pass;
  return v;
}

Verdict c7() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport rep = train(desk("harmonic-d5-desk"));
  const Metrics& m = rep.final.metrics;
  Verdict v;
  v.detail = "harmonic oscillator d=5: e_lambda " + sci(m.e_lambda) + " (<= 1e-6), lambda " + fmt("%.12f", rep.final.lambda);
  v.pass = m.e_lambda <= 1e-6;
  v.pass = within(since(t0), 2400.0, v.detail) && v.pass;
  return v;
}

Verdict c8() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport rep = train(desk("poisson-nonhomo-d5-desk"));
  const Metrics& m = rep.final.metrics;
  Verdict v;
  v.detail = "non-homogeneous Dirichlet d=5: e_bd " + sci(m.e_bd) + " (<= 1e-4), e_L2 " + sci(m.e_l2) + " (<= 1e-3)";
  v.pass = m.e_bd <= 1e-4 && m.e_l2 <= 1e-3;
  v.pass = within(since(t0), 2400.0, v.detail) && v.pass;
  return v;
}

Verdict c9() {
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemSpec p = desk("neumann-d5-desk");
  const TrainReport rep = train(p);
  const Metrics& m = rep.final.metrics;
  Verdict v;
  v.detail = "Neumann d=5 with " + std::to_string(p.flux.size()) + " flux faces: e_L2 " + sci(m.e_l2) + " (<= 1e-3)";
  v.pass = m.e_l2 <= 1e-3 && static_cast<int>(p.flux.size()) == 2 * p.d;
  v.pass = within(since(t0), 2400.0, v.detail) && v.pass;
  return v;
}

std::string numeric_log(const fs::path& path) {
  std::ifstream in(path);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

double rel(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return 0.0;
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

Verdict c10() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fs::temp_directory_path() / "tnn-acceptance-c10";
  fs::remove_all(root);
  app::RunConfig cfg = app::parse_config(R"j({
    "problem": "poisson-nonhomo-d2",
    "seed": 5,
    "checkpoint_every": 70,
    "grid": {"subintervals": 4, "points": 8},
    "network": {"hidden": [10, 10], "rank": 4},
    "schedule": {"bd_adam_epochs": 60, "bd_lbfgs_epochs": 10, "adam_epochs": 150, "lbfgs_epochs": 20}
  })j");
  cfg.threads = app::default_threads();

  auto run_in = [&](const std::string& name, const app::RunOptions& ro) {
    app::RunConfig c = cfg;
    c.output = (root / name).string();
    app::RunOutcome out = app::run(c, ro);
    if (out.exit_code != 0) fail(ErrorKind::Numerical, name + ": " + out.message);
    return out;
  };

  const app::RunOutcome a = run_in("a", {});
  const app::RunOutcome b = run_in("b", {});
  const bool same_log = numeric_log(root / "a" / app::kLogCsv) == numeric_log(root / "b" / app::kLogCsv);

  std::vector<TrainerSnapshot> snaps;
  TrainOptions opt;
  opt.threads = cfg.threads;
  opt.checkpoint_every = cfg.checkpoint_every;
  opt.on_checkpoint = [&](const TrainerSnapshot& s) {
    if (!s.finished) snaps.push_back(s);
  };
  Trainer(cfg.problem, cfg.seed).run(opt);

  double worst = 0.0;
  bool resumed_log = true;
  const EpochRecord& ref = a.report->final;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const TrainerSnapshot& s = snaps[k];
    const std::string name = "resume-" + std::to_string(k);
    fs::create_directories(root / name);
    // the interrupted run's log up to the checkpoint, as a crash would leave it
    fs::copy_file(root / "a" / app::kLogCsv, root / name / app::kLogCsv);
    const std::string ckpt = (root / name / "mid.txt").string();
    app::save_checkpoint(ckpt, s);
    app::RunOptions ro;
    ro.resume = ckpt;
    const app::RunOutcome r = run_in(name, ro);
    const EpochRecord& f = r.report->final;
    for (double d : {rel(f.loss, ref.loss), rel(f.metrics.e_l2, ref.metrics.e_l2), rel(f.metrics.e_h1, ref.metrics.e_h1),
                     rel(f.metrics.e_bd, ref.metrics.e_bd)})
      worst = std::max(worst, d);
    resumed_log = resumed_log && numeric_log(root / name / app::kLogCsv) == numeric_log(root / "a" / app::kLogCsv);
  }
  fs::remove_all(root);

  Verdict v;
  v.detail = std::string("rerun log ") + (same_log ? "identical" : "DIFFERS") + ", " + std::to_string(snaps.size()) +
             " resumes (phases " + std::to_string(snaps.empty() ? 0 : snaps.front().phase) + ".." +
             std::to_string(snaps.empty() ? 0 : snaps.back().phase) + "), worst final rel diff " + sci(worst) +
             " (<= 1e-10), resumed logs " + (resumed_log ? "identical" : "DIFFER");
  v.pass = same_log && resumed_log && snaps.size() >= 2 && worst <= 1e-10 && b.report;
  v.pass = within(since(t0), 600.0, v.detail) && v.pass;
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"C1", c1}, {"C2", c2}, {"C3", c3}, {"C4", c4}, {"C5", c5},
      {"C6", c6}, {"C7", c7}, {"C8", c8}, {"C9", c9}, {"C10", c10}};
  std::set<std::string> only(argv + 1, argv + argc);
  bool all = true;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::printf("%-4s %s  %s\n", name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
