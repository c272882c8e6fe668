#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tnn/app/registry.hpp"
#include "tnn/assembly.hpp"
#include "tnn/linalg.hpp"
#include "tnn/oracle.hpp"

using namespace tnn;
constexpr double pi = std::numbers::pi;

namespace {

std::vector<DimDomain> unit_cube(int d) { return std::vector<DimDomain>(d, DimDomain{DimKind::Interval, 0.0, 1.0}); }

Matrix identity(int d) {
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

// Columns sin(k pi x), k = 1..p, in every dimension, no mask.
TnnState sine_modes(int d, int p) {
  TnnState s;
  s.d = d;
  s.p = p;
  s.arch = Arch{{p}, p};
  s.domain = unit_cube(d);
  std::vector<double> theta;
  for (int k = 0; k < p; ++k) theta.push_back((k + 1) * pi);  // hidden W
  theta.insert(theta.end(), p, 0.0);                          // hidden b
  for (int j = 0; j < p; ++j)
    for (int k = 0; k < p; ++k) theta.push_back(j == k ? 1.0 : 0.0);
  theta.insert(theta.end(), p, 0.0);
  s.theta.assign(d, theta);
  s.c.assign(p, 1.0);
  return s;
}

struct Bound {
  std::vector<QuadGrid> grids;
  EvalTables tables;
  Forms forms;
  Bound(const TnnState& s, int n_sub = 10) {
    for (const DimDomain& d : s.domain) grids.push_back(composite_grid(d.a, d.b, n_sub, 16));
    eval_tables(s, grids, tables);
    forms = Forms(grids, s.domain);
    forms.bind(0, &tables, false);
  }
};

}  // namespace

TEST_CASE("stiffness of the first Laplace mode") {
  Bound b(sine_modes(2, 1));
  EllipticOperator op{identity(2), SeparableFn(2)};
  Matrix A = assemble_stiffness(b.forms, 0, op);
  CHECK(std::abs(A(0, 0) - 2 * pi * pi) <= 1e-10 * 2 * pi * pi);
}

TEST_CASE("pure reaction stiffness equals the mass matrix") {
  std::mt19937_64 rng(3);
  TnnState s = TnnState::init(3, 4, {6}, unit_cube(3), true, rng);
  Bound b(s, 4);
  EllipticOperator op{Matrix(3, 3), SeparableFn::constant(3, 1.0)};
  Matrix A = assemble_stiffness(b.forms, 0, op), M = assemble_mass(b.forms, 0);
  CHECK(oracle::max_rel_diff(A, M) <= 1e-12);
}

TEST_CASE("mass matrix of normalized and orthogonal columns") {
  Bound one(sine_modes(2, 1));
  CHECK(std::abs(assemble_mass(one.forms, 0)(0, 0) - 1.0) <= 1e-10);
  Bound two(sine_modes(3, 3));
  Matrix M = assemble_mass(two.forms, 0);
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 3; ++n) CHECK(std::abs(M(m, n) - (m == n ? 1.0 : 0.0)) <= 1e-12);
}

TEST_CASE("load vector") {
  Bound b(sine_modes(2, 2));
  CHECK(assemble_load(b.forms, 0, SeparableFn(2)) == std::vector<double>(2, 0.0));
  // phi_1 itself: (sin(pi x)/sqrt(1/2)) (sin(pi y)/sqrt(1/2))
  std::vector<double> B = assemble_load(b.forms, 0, SeparableFn::product(2, parse("sin(pi*x)"), 2.0));
  Matrix M = assemble_mass(b.forms, 0);
  CHECK(std::abs(B[0] - 1.0) <= 1e-12);
  CHECK(std::abs(B[1] - M(1, 0)) <= 1e-12);
}

TEST_CASE("Neumann face load") {
  std::mt19937_64 rng(4);
  TnnState s = TnnState::init(2, 1, {5}, unit_cube(2), false, rng);
  Bound b(s);
  FaceData zero{0, false, SeparableFn(2)};
  CHECK(assemble_neumann_load(b.forms, 0, {zero})[0] == 0.0);
  FaceData unit{0, false, SeparableFn::constant(2, 1.0)};
  const double got = assemble_neumann_load(b.forms, 0, {unit})[0];
  const DimTable& t0 = b.tables.dims[0];
  const DimTable& t1 = b.tables.dims[1];
  double integral = 0.0;
  for (std::size_t r = 0; r < t1.n; ++r) integral += b.grids[1].weights[r] * t1.val(r, 0);
  CHECK(std::abs(got - t0.val(t0.n, 0) * integral) <= 1e-13 * (1.0 + std::abs(got)));
}

TEST_CASE("matrices are symmetric, positive definite and independent of c") {
  std::mt19937_64 rng(5);
  for (const char* stem : {"poisson-homo", "neumann", "harmonic"}) {
    ProblemSpec p = *app::family(stem, 3);
    TnnState s = TnnState::init(3, 5, {8, 8}, p.domain, p.masked(), rng);
    std::vector<QuadGrid> g;
    for (const DimDomain& d : p.domain) g.push_back(d.bounded() ? composite_grid(d.a, d.b, 4, 8) : gauss_hermite(40));
    EvalTables t;
    eval_tables(s, g, t);
    Forms forms(g, p.domain);
    forms.bind(0, &t, false);
    Matrix A = assemble_stiffness(forms, 0, p.op), M = assemble_mass(forms, 0);
    std::vector<double> B = p.f.zero() ? std::vector<double>() : assemble_load(forms, 0, p.f);
    for (int m = 0; m < 5; ++m)
      for (int n = 0; n < 5; ++n) {
        CHECK(std::abs(A(m, n) - A(n, m)) <= 1e-12 * std::abs(A(m, m)));
        CHECK(std::abs(M(m, n) - M(n, m)) <= 1e-12);
      }
    Matrix L;
    CHECK(cholesky(A, 0.0, L));
    CHECK(cholesky(M, 0.0, L));
    // c plays no part in the basis tables
    for (double& c : s.c) c = 7.0;
    EvalTables t2;
    eval_tables(s, g, t2);
    Forms f2(g, p.domain);
    f2.bind(0, &t2, false);
    CHECK(assemble_stiffness(f2, 0, p.op).storage() == A.storage());
    if (!B.empty()) CHECK(assemble_load(f2, 0, p.f) == B);
  }
}

TEST_CASE("factorized assembly agrees with the full tensor grid") {
  for (const oracle::AssemblyCheck& c : oracle::assembly_suite()) {
    INFO(c.name);
    CHECK(c.stiffness <= 1e-11);
    CHECK(c.mass <= 1e-11);
    CHECK(c.load <= 1e-11);
    CHECK(c.loss <= 1e-11);
  }
}
