#include "tnn/app/registry.hpp"

#include <cmath>
#include <numbers>

namespace tnn::app {
namespace {

constexpr double kPi = std::numbers::pi;

Expr1D ex(const char* s) { return parse(s); }

EllipticOperator laplacian(int d, SeparableFn b) {
  EllipticOperator op;
  op.A = Matrix(d, d);
  for (int i = 0; i < d; ++i) op.A(i, i) = 1.0;
  op.b = std::move(b);
  return op;
}

std::vector<DimDomain> cube(int d, double a, double b) {
  return std::vector<DimDomain>(d, DimDomain{DimKind::Interval, a, b});
}

ProblemSpec poisson_homo(int d) {
  ProblemSpec p;
  p.kind = ProblemKind::HomoDirichlet;
  p.d = d;
  p.domain = cube(d, -1.0, 1.0);
  p.op = laplacian(d, SeparableFn(d));
  p.exact.u = SeparableFn::sum(d, ex("sin(2*pi*x)"), ex("sin(pi*x)"));
  p.f = SeparableFn::sum(d, ex("sin(2*pi*x)"), ex("sin(pi*x)"), (d + 3) * kPi * kPi);
  p.grid = {200, 16, 200};
  p.net = {{100, 100, 100}, 50};
  p.schedule.adam_epochs = 50000;
  p.schedule.adam_lr = 0.003;
  p.schedule.lbfgs_epochs = 10000;
  p.schedule.lbfgs_lr = 1.0;
  return p;
}

ProblemSpec poisson_nonhomo(int d) {
  ProblemSpec p;
  p.kind = ProblemKind::NonhomoDirichlet;
  p.d = d;
  p.domain = cube(d, 0.0, 1.0);
  p.op = laplacian(d, SeparableFn(d));
  p.exact.u = SeparableFn::sum(d, ex("sin(pi/2*x)"), ex("1"));
  p.g = *p.exact.u;
  p.f = SeparableFn::sum(d, ex("sin(pi/2*x)"), ex("1"), kPi * kPi / 4.0);
  p.grid = {10, 16, 200};
  p.net = {{50, 50, 50}, 20};
  p.schedule.bd_adam_epochs = 20000;
  p.schedule.bd_adam_lr = 0.003;
  p.schedule.bd_lbfgs_epochs = 5000;
  p.schedule.bd_lbfgs_lr = 0.1;
  p.schedule.adam_epochs = 20000;
  p.schedule.adam_lr = 0.003;
  p.schedule.lbfgs_epochs = 5000;
  p.schedule.lbfgs_lr = 0.1;
  return p;
}

ProblemSpec neumann(int d) {
  ProblemSpec p;
  p.kind = ProblemKind::Neumann;
  p.d = d;
  p.domain = cube(d, 0.0, 1.0);
  p.op = laplacian(d, SeparableFn::constant(d, kPi * kPi));
  p.exact.u = SeparableFn::sum(d, ex("sin(pi*x)"), ex("1"));
  p.f = SeparableFn::sum(d, ex("sin(pi*x)"), ex("1"), 2.0 * kPi * kPi);
  // du/dn = -pi cos(pi x_i) on x_i = 0 and pi cos(pi x_i) on x_i = 1, both
  // equal to -pi on the face.
  for (int i = 0; i < d; ++i)
    for (bool high : {false, true}) p.flux.push_back({i, high, SeparableFn::constant(d, -kPi)});
  p.grid = {100, 16, 200};
  p.net = {{100, 100, 100}, 100};
  p.schedule.adam_epochs = 50000;
  p.schedule.adam_lr = 0.003;
  p.schedule.lbfgs_epochs = 10000;
  p.schedule.lbfgs_lr = 1.0;
  return p;
}

ProblemSpec laplace_eigen(int d) {
  ProblemSpec p;
  p.kind = ProblemKind::Eigen;
  p.d = d;
  p.domain = cube(d, 0.0, 1.0);
  p.op = laplacian(d, SeparableFn(d));
  p.exact.u = SeparableFn::product(d, ex("sin(pi*x)"));
  p.exact.lambda = d * kPi * kPi;
  p.grid = {100, 16, 200};
  p.net = {{100, 100, 100}, 50};
  p.schedule.pretrain_epochs = 2000;
  p.schedule.pretrain_lr = 0.003;
  p.schedule.adam_epochs = 50000;
  p.schedule.adam_lr = 0.003;
  p.schedule.lbfgs_epochs = 10000;
  p.schedule.lbfgs_lr = 1.0;
  return p;
}

ProblemSpec harmonic(int d) {
  ProblemSpec p;
  p.kind = ProblemKind::Eigen;
  p.d = d;
  p.domain = std::vector<DimDomain>(d, DimDomain{DimKind::Line, 0.0, 0.0});
  p.op = laplacian(d, SeparableFn::sum(d, ex("x^2"), ex("1")));
  p.exact.u = SeparableFn::product(d, ex("exp(-x^2/2)"));
  p.exact.lambda = d;
  p.grid = {20, 16, 200};
  p.net = {{100, 100, 100}, 50};
  p.schedule.pretrain_epochs = 10000;
  p.schedule.pretrain_lr = 0.01;
  p.schedule.lbfgs_epochs = 10000;
  p.schedule.lbfgs_lr = 1.0;
  return p;
}

void desk(ProblemSpec& p) {
  Schedule& s = p.schedule;
  p.net = {{50, 50, 50}, 20};
  switch (p.kind) {
    case ProblemKind::HomoDirichlet:
      p.grid.subintervals = 20;
      s.adam_epochs = 5000;
      s.lbfgs_epochs = 500;
      break;
    case ProblemKind::NonhomoDirichlet:
      s.bd_adam_epochs = 3000;
      s.bd_lbfgs_epochs = 300;
      s.adam_epochs = 3000;
      s.lbfgs_epochs = 300;
      break;
    case ProblemKind::Neumann:
      p.grid.subintervals = 20;
      s.adam_epochs = 5000;
      s.lbfgs_epochs = 500;
      break;
    case ProblemKind::Eigen:
      if (p.domain[0].bounded()) {
        p.grid.subintervals = 20;
        s.pretrain_epochs = 1000;
        s.adam_epochs = 3000;
        s.lbfgs_epochs = 500;
      } else {
        s.pretrain_epochs = 2000;
        s.lbfgs_epochs = 1000;
      }
      break;
  }
}

struct Family {
  const char* stem;
  const char* summary;
  ProblemSpec (*make)(int);
};

const Family families[] = {
      {"poisson-homo", "-Laplace u = f on (-1,1)^d, u = 0 on the boundary", poisson_homo},
      {"poisson-nonhomo", "-Laplace u = f on (0,1)^d, u = g on the boundary", poisson_nonhomo},
      {"neumann", "-Laplace u + pi^2 u = f on (0,1)^d, du/dn = g", neumann},
      {"laplace-eigen", "-Laplace u = lambda u on (0,1)^d, u = 0 on the boundary", laplace_eigen},
      {"harmonic", "-Laplace u + |x|^2 u = lambda u on R^d", harmonic},
};

std::vector<RegistryEntry> build() {
  std::vector<RegistryEntry> out;
  for (const Family& fam : families)
    for (int d : {2, 5, 10, 20}) {
      const std::string name = std::string(fam.stem) + "-d" + std::to_string(d);
      ProblemSpec p = fam.make(d);
      p.name = name;
      out.push_back({name, fam.summary, p});
      desk(p);
      p.name = name + "-desk";
      out.push_back({p.name, std::string(fam.summary) + " (desk schedule)", p});
    }
  return out;
}

}  // namespace

const std::vector<RegistryEntry>& registry() {
  static const std::vector<RegistryEntry> entries = build();
  return entries;
}

std::optional<ProblemSpec> lookup(const std::string& name) {
  for (const RegistryEntry& e : registry())
    if (e.name == name) return e.problem;
  return std::nullopt;
}

std::optional<ProblemSpec> family(const std::string& stem, int d) {
  if (d < 1) return std::nullopt;
  for (const Family& fam : families)
    if (stem == fam.stem) {
      ProblemSpec p = fam.make(d);
      p.name = stem + "-d" + std::to_string(d);
      return p;
    }
  return std::nullopt;
}

}  // namespace tnn::app
