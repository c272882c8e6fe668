#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "tnn/app/config.hpp"
#include "tnn/app/registry.hpp"
#include "tnn/app/run.hpp"
#include "tnn/kernels.hpp"
#include "tnn/oracle.hpp"

namespace fs = std::filesystem;
using namespace tnn;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// A configuration file, or a registry name standing for {"problem": name}.
app::RunConfig resolve_config(const std::string& arg) {
  if (!fs::exists(arg) && app::lookup(arg)) return app::parse_config("{\"problem\": \"" + arg + "\"}", arg);
  return app::load_config(arg);
}

void print_final(const std::string& name, const app::RunOutcome& out) {
  if (!out.report) {
    std::cout << name << ": " << out.message << "\n";
    return;
  }
  const EpochRecord& f = out.report->final;
  std::cout << name << ": loss " << fmt(f.loss);
  if (!std::isnan(f.metrics.e_l2)) std::cout << "  e_l2 " << fmt(f.metrics.e_l2);
  if (!std::isnan(f.metrics.e_h1)) std::cout << "  e_h1 " << fmt(f.metrics.e_h1);
  if (!std::isnan(f.metrics.e_lambda)) std::cout << "  e_lambda " << fmt(f.metrics.e_lambda);
  if (!std::isnan(f.metrics.e_bd)) std::cout << "  e_bd " << fmt(f.metrics.e_bd);
  std::cout << "  " << fmt(out.report->wall_seconds) << " s\n";
}

int cmd_solve(const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> out,
              std::optional<int> threads, std::optional<std::string> resume) {
  app::RunConfig cfg = resolve_config(config);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output = *out;
  if (threads) cfg.threads = *threads;
  app::RunOptions opt;
  opt.resume = resume;
  opt.progress = &std::cerr;
  const app::RunOutcome res = app::run(cfg, opt);
  print_final(cfg.problem.name, res);
  if (res.exit_code != 0) std::cerr << "error: " << res.message << "\n";
  return res.exit_code;
}

int cmd_bench(const std::string& which, bool desk, const std::string& out, std::optional<int> threads,
              std::uint64_t seed) {
  std::vector<app::RegistryEntry> picked;
  for (const app::RegistryEntry& e : app::registry()) {
    const bool is_desk = e.name.ends_with("-desk");
    if (which == "all" ? is_desk == desk : e.name == (desk && !which.ends_with("-desk") ? which + "-desk" : which))
      picked.push_back(e);
  }
  if (picked.empty()) {
    std::cerr << "error: unknown registry name '" << which << "' (see `tnn list`)\n";
    return 1;
  }
  int status = 0;
  for (const app::RegistryEntry& e : picked) {
    app::RunConfig cfg;
    cfg.problem = e.problem;
    cfg.seed = seed;
    cfg.output = (fs::path(out) / e.name).string();
    cfg.threads = threads.value_or(app::default_threads());
    app::RunOptions opt;
    opt.progress = &std::cerr;
    const app::RunOutcome res = app::run(cfg, opt);
    print_final(e.name, res);
    status = std::max(status, res.exit_code);
  }
  return status;
}

int cmd_check() {
  bool ok = true;
  auto line = [&](const std::string& what, double value, double limit) {
    const bool pass = value <= limit;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << what << ": " << fmt(value) << " (limit " << fmt(limit) << ")\n";
  };
  std::cout << "kernels: " << kernels::to_string(kernels::active_isa()) << "\n";
  const oracle::QuadratureReport q = oracle::quadrature_report();
  line("Gauss-Legendre 16, monomials up to degree 31, abs error", q.legendre_max_abs, 1e-13);
  line("Gauss-Hermite 200, moments up to 5, rel error", q.hermite_max_rel, 1e-10);
  double worst = 0.0;
  std::string worst_name;
  for (const oracle::AssemblyCheck& c : oracle::assembly_suite())
    if (c.worst() >= worst) {
      worst = c.worst();
      worst_name = c.name;
    }
  line("full-grid assembly and loss oracle, d <= 3 (worst: " + worst_name + ")", worst, 1e-11);
  for (const oracle::GradientCheck& g : oracle::gradient_suite(1e-4))
    line("gradient vs central differences, " + g.name + " (3-point " + fmt(g.max_rel_3) + ")", g.max_rel, 1e-5);
  return ok ? 0 : 2;
}

int cmd_list() {
  for (const app::RegistryEntry& e : app::registry()) {
    std::printf("%-26s %s\n", e.name.c_str(), e.summary.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Tensor neural network solver for high-dimensional elliptic problems"};
  cli.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, resume;
  std::optional<int> threads;
  CLI::App* solve = cli.add_subcommand("solve", "train on a configuration file or registry name");
  solve->add_option("config", config, "JSON configuration or registry name")->required();
  solve->add_option("--seed", seed, "override the configured seed");
  solve->add_option("--out", out, "output directory");
  solve->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  solve->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  std::string which;
  bool desk = false;
  std::string bench_out = "bench";
  std::uint64_t bench_seed = 0;
  std::optional<int> bench_threads;
  CLI::App* bench = cli.add_subcommand("bench", "run registry problems");
  bench->add_option("name", which, "registry name or 'all'")->required();
  bench->add_flag("--desk", desk, "reduced desk-scale schedules");
  bench->add_option("--out", bench_out, "parent output directory");
  bench->add_option("--seed", bench_seed, "seed");
  bench->add_option("--threads", bench_threads, "worker threads")->check(CLI::PositiveNumber);

  CLI::App* check = cli.add_subcommand("check", "quadrature, assembly and gradient oracles");
  CLI::App* list = cli.add_subcommand("list", "registry problems");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(config, seed, out, threads, resume);
    if (*bench) return cmd_bench(which, desk, bench_out, bench_threads, bench_seed);
    if (*check) return cmd_check();
    if (*list) return cmd_list();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app::exit_status(e.kind());
  }
  return 0;
}
