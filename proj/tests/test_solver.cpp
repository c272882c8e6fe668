#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tnn/app/registry.hpp"
#include "tnn/assembly.hpp"
#include "tnn/oracle.hpp"
#include "tnn/solver.hpp"

using namespace tnn;
constexpr double pi = std::numbers::pi;

namespace {

// Columns sin(k_j pi x_i) with the given multipliers per dimension, no mask.
TnnState sine_basis(const std::vector<std::vector<int>>& modes) {
  TnnState s;
  s.d = static_cast<int>(modes.size());
  s.p = static_cast<int>(modes[0].size());
  s.arch = Arch{{s.p}, s.p};
  s.domain.assign(s.d, DimDomain{DimKind::Interval, 0.0, 1.0});
  for (const auto& k : modes) {
    std::vector<double> theta;
    for (int m : k) theta.push_back(m * pi);
    theta.insert(theta.end(), s.p, 0.0);
    for (int j = 0; j < s.p; ++j)
      for (int l = 0; l < s.p; ++l) theta.push_back(j == l ? 1.0 : 0.0);
    theta.insert(theta.end(), s.p, 0.0);
    s.theta.push_back(theta);
  }
  s.c.assign(s.p, 1.0);
  return s;
}

ProblemSpec laplace_dirichlet_unit(int d) {
  ProblemSpec p;
  p.name = "laplace-unit";
  p.kind = ProblemKind::HomoDirichlet;
  p.d = d;
  p.domain.assign(d, DimDomain{DimKind::Interval, 0.0, 1.0});
  p.op.A = Matrix(d, d);
  for (int i = 0; i < d; ++i) p.op.A(i, i) = 1.0;
  p.op.b = SeparableFn(d);
  p.exact.u = SeparableFn::product(d, parse("sin(pi*x)"));
  p.f = SeparableFn::product(d, parse("sin(pi*x)"), d * pi * pi);
  p.grid = {10, 16, 200};
  return p;
}

ProblemSpec small_schedule(ProblemSpec p, int adam, int lbfgs, int pretrain = 0) {
  p.grid.subintervals = 6;
  p.net = {{12, 12}, 6};
  p.schedule.adam_epochs = adam;
  p.schedule.lbfgs_epochs = lbfgs;
  p.schedule.pretrain_epochs = pretrain;
  p.schedule.bd_adam_epochs = adam;
  p.schedule.bd_lbfgs_epochs = lbfgs;
  return p;
}

}  // namespace

TEST_CASE("estimator vanishes when the basis holds the solution") {
  ProblemSpec p = laplace_dirichlet_unit(2);
  TnnState st = sine_basis({{1, 2}, {1, 1}});
  Objective obj(p);
  obj.prepare(kMainSet, st, false);
  obj.solve(LossKind::Estimator, st);
  // the loss is the root of an expanded sum of squares, so its floor is sqrt(eps) times the data scale
  CHECK(obj.loss(LossKind::Estimator, st, nullptr) <= 1e-6);
  CHECK(std::abs(st.c[0] - 0.5) < 1e-10);  // u = sin sin = 0.5 * normalized column
  Metrics m = obj.metrics(&st, nullptr, true);
  CHECK(m.e_l2 <= 1e-10);
  CHECK(m.e_h1 <= 1e-10);
  CHECK(m.energy <= 1e-10);
}

TEST_CASE("zero data gives zero loss") {
  ProblemSpec p = laplace_dirichlet_unit(2);
  p.f = SeparableFn(2);
  p.exact.u.reset();
  std::mt19937_64 rng(1);
  TnnState st = TnnState::init(2, 3, {5}, p.domain, true, rng);
  Objective obj(p);
  obj.prepare(kMainSet, st, false);
  obj.solve(LossKind::Estimator, st);
  CHECK(st.c == std::vector<double>(3, 0.0));
  CHECK(obj.loss(LossKind::Estimator, st, nullptr) <= 1e-14);
}

TEST_CASE("one-dimensional eigenproblem with the exact mode") {
  ProblemSpec p = *app::family("laplace-eigen", 1);
  p.grid = {10, 16, 200};
  TnnState st = sine_basis({{1}});
  Objective obj(p);
  obj.prepare(kMainSet, st, false);
  const SolveResult r = obj.solve(LossKind::Estimator, st);
  CHECK(std::abs(r.lambda - pi * pi) <= 1e-10);
  CHECK(obj.loss(LossKind::Estimator, st, nullptr) <= 1e-6);
  obj.solve(LossKind::Rayleigh, st);
  CHECK(std::abs(obj.loss(LossKind::Rayleigh, st, nullptr) - pi * pi) <= 1e-9);
}

TEST_CASE("eigen metrics are scale invariant and see perturbations") {
  ProblemSpec p = *app::family("laplace-eigen", 2);
  p.grid = {10, 16, 200};
  TnnState st = sine_basis({{1, 2}, {1, 1}});
  Objective obj(p);
  obj.prepare(kMainSet, st, false);
  st.c = {1.0, 0.0};  // 2u
  Metrics m = obj.metrics(&st, nullptr, false);
  CHECK(m.e_l2 <= 1e-10);
  CHECK(m.e_h1 <= 1e-10);
  // u + 0.01 * (unit orthogonal mode); ||u|| = 1/2
  st.c = {0.5, 0.01};
  m = obj.metrics(&st, nullptr, false);
  CHECK(std::abs(m.e_l2 - 0.02) <= 0.05 * 0.02);
}

TEST_CASE("boundary fit") {
  ProblemSpec p = *app::family("poisson-nonhomo", 2);
  p.grid = {10, 16, 200};
  std::mt19937_64 rng(2);
  TnnState lift = TnnState::init(2, 3, {6}, p.domain, false, rng);
  Objective obj(p);
  obj.prepare(kLiftSet, lift, true);
  obj.solve(LossKind::BoundaryFit, lift);
  const double l = obj.loss(LossKind::BoundaryFit, lift, nullptr);
  CHECK(l >= 0.0);
  const double ref = oracle::full_grid_boundary_fit(p, lift, obj.tables(kLiftSet), obj.grids());
  CHECK(std::abs(l * l - ref) <= 1e-11 * ref);

  // g = 0: the loss is the boundary norm of the lift
  ProblemSpec z = p;
  z.g = SeparableFn(2);
  Objective oz(z);
  oz.prepare(kLiftSet, lift, true);
  const double lz = oz.loss(LossKind::BoundaryFit, lift, nullptr);
  CHECK(std::abs(lz * lz - oracle::full_grid_boundary_fit(z, lift, oz.tables(kLiftSet), oz.grids())) <= 1e-11 * lz * lz);

  // a lift spanning g = sin(pi/2 x) + sin(pi/2 y): columns sin(pi/2 x) * 1 and 1 * sin(pi/2 y)
  TnnState exact;
  exact.d = 2;
  exact.p = 2;
  exact.arch = Arch{{1}, 2};
  exact.domain = p.domain;
  // hidden W, b; output W (2 x 1), b
  exact.theta = {{pi / 2, 0.0, 1.0, 0.0, 0.0, 1.0}, {pi / 2, 0.0, 0.0, 1.0, 1.0, 0.0}};
  exact.c = {1.0, 1.0};
  Objective oe(p);
  oe.prepare(kLiftSet, exact, true);
  oe.solve(LossKind::BoundaryFit, exact);
  CHECK(oe.loss(LossKind::BoundaryFit, exact, nullptr) <= 1e-7);
  oe.prepare(kLiftSet, exact, false);
  CHECK(oe.metrics(nullptr, &exact, false).e_bd <= 1e-7);
}

TEST_CASE("Galerkin orthogonality and optimality") {
  ProblemSpec p = oracle::reaction_dirichlet(2);
  p.grid = {8, 16, 200};
  std::mt19937_64 rng(4);
  TnnState st = TnnState::init(2, 5, {8, 8}, p.domain, true, rng);
  Objective obj(p);
  obj.prepare(kMainSet, st, false);
  obj.solve(LossKind::Estimator, st);
  Matrix A = assemble_stiffness(obj.forms(), kMainSet, p.op);
  std::vector<double> B = assemble_load(obj.forms(), kMainSet, p.f);
  double bmax = 0.0;
  for (double b : B) bmax = std::max(bmax, std::abs(b));
  for (int m = 0; m < 5; ++m) {
    double a = 0.0;
    for (int n = 0; n < 5; ++n) a += A(m, n) * st.c[n];
    CHECK(std::abs(a - B[m]) <= 1e-9 * bmax);
  }
  const double best = obj.metrics(&st, nullptr, true).energy;
  std::normal_distribution<double> n01(0.0, 1.0);
  const std::vector<double> c0 = st.c;
  for (int k = 0; k < 50; ++k) {
    const double size = std::pow(10.0, -4.0 + 4.0 * k / 50.0);
    for (int j = 0; j < 5; ++j) st.c[j] = c0[j] + size * (1.0 + std::abs(c0[j])) * n01(rng);
    CHECK(obj.metrics(&st, nullptr, true).energy >= best);
  }
}

TEST_CASE("weighted estimator only for a positive rank-one b") {
  CHECK(Objective(oracle::reaction_dirichlet(2)).weighted());
  CHECK_FALSE(Objective(*app::family("poisson-homo", 2)).weighted());
  CHECK_FALSE(Objective(*app::family("harmonic", 2)).weighted());
}

TEST_CASE("zero epochs: one record with the initial solve") {
  ProblemSpec p = small_schedule(*app::family("poisson-homo", 2), 0, 0);
  Trainer tr(p, 3);
  TrainReport rep = tr.run({});
  REQUIRE(rep.records.size() == 1);
  CHECK(rep.records[0].phase == "final");
  CHECK(std::isfinite(rep.records[0].loss));
  CHECK(std::isfinite(rep.final.metrics.e_l2));
}

TEST_CASE("estimator bounds the energy error on every epoch") {
  ProblemSpec p = small_schedule(oracle::reaction_dirichlet(2), 60, 20);
  Trainer tr(p, 5);
  TrainOptions opt;
  opt.energy = true;
  TrainReport rep = tr.run(opt);
  CHECK(rep.records.size() == 81);
  for (const EpochRecord& r : rep.records) CHECK(r.metrics.energy <= r.loss + 1e-6 * (1.0 + r.loss));
}

TEST_CASE("Galerkin eigenvalue never drops below the exact one") {
  ProblemSpec p = small_schedule(*app::family("laplace-eigen", 2), 40, 10, 100);
  Trainer tr(p, 6);
  TrainReport rep = tr.run({});
  double first = 0.0, last = 0.0;
  for (const EpochRecord& r : rep.records) {
    CHECK(r.lambda >= 2 * pi * pi - 1e-9);
    if (r.phase == "pretrain") {
      if (r.epoch == 0) first = r.loss;
      last = r.loss;
    }
  }
  CHECK(last < first);
}

TEST_CASE("small Poisson run converges") {
  ProblemSpec p = *app::family("poisson-homo", 2);
  p.grid = {10, 16, 200};
  p.net = {{20, 20}, 10};
  p.schedule.adam_epochs = 2000;
  p.schedule.adam_lr = 0.003;
  p.schedule.lbfgs_epochs = 200;
  Trainer tr(p, 0);
  TrainReport rep = tr.run({});
  CHECK(rep.final.metrics.e_l2 <= 1e-4);
  for (const EpochRecord& r : rep.records) REQUIRE(std::isfinite(r.loss));
}

TEST_CASE("every registry problem yields finite metrics") {
  for (const app::RegistryEntry& e : app::registry()) {
    if (e.problem.d > 5 || e.name.ends_with("-desk")) continue;
    ProblemSpec p = small_schedule(e.problem, 2, 1, 2);
    Trainer tr(p, 1);
    TrainReport rep = tr.run({});
    INFO(e.name);
    const Metrics& m = rep.final.metrics;
    if (p.kind == ProblemKind::Eigen) {
      CHECK(std::isfinite(m.e_lambda));
    } else {
      CHECK(std::isfinite(m.e_l2));
      CHECK(std::isfinite(m.e_h1));
    }
    if (p.kind == ProblemKind::NonhomoDirichlet) CHECK(std::isfinite(m.e_bd));
  }
}

TEST_CASE("gradients agree with finite differences for every loss") {
  for (const oracle::GradientCheck& g : oracle::gradient_suite(1e-4)) {
    INFO(g.name);
    CHECK(g.max_rel <= 1e-5);
  }
}
