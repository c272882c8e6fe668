#include "tnn/oracle.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <numbers>

#include "tnn/app/registry.hpp"
#include "tnn/assembly.hpp"
#include "tnn/error.hpp"

namespace tnn::oracle {
namespace {

using Real = long double;

// Jets of every basis column at every row of one dimension.
std::vector<std::vector<Jet2<double>>> jets(const TnnState& st, const EvalTables& t, int i) {
  std::vector<std::vector<Jet2<double>>> out;
  for (double x : t.dims[i].x) out.push_back(factor_jets(st, t, i, x));
  return out;
}

struct Point {
  std::vector<double> x;
  double w = 1.0;
  std::vector<int> row;  // table row per dimension
};

// Tensor grid over the interior nodes, with dimension `fixed` pinned to the
// endpoint row `fixed_row` when fixed >= 0.
void for_each_point(const std::vector<QuadGrid>& grids, const EvalTables& t, int fixed, int fixed_row,
                    const std::function<void(const Point&)>& fn) {
  const int d = static_cast<int>(grids.size());
  Point pt;
  pt.x.resize(d);
  pt.row.resize(d);
  std::function<void(int, double)> rec = [&](int i, double w) {
    if (i == d) {
      pt.w = w;
      fn(pt);
      return;
    }
    if (i == fixed) {
      pt.row[i] = fixed_row;
      pt.x[i] = t.dims[i].x[fixed_row];
      rec(i + 1, w);
      return;
    }
    for (std::size_t r = 0; r < grids[i].size(); ++r) {
      pt.row[i] = static_cast<int>(r);
      pt.x[i] = grids[i].nodes[r];
      rec(i + 1, w * grids[i].weights[r]);
    }
  };
  rec(0, 1.0);
}

// u, grad u and Hessian of sum_j c_j prod_i phi_ij at a point.
struct Local {
  double u = 0.0;
  std::vector<double> g;
  std::vector<double> h;  // row-major d x d
};

Local evaluate(const std::vector<std::vector<std::vector<Jet2<double>>>>& J, const std::vector<double>& c,
               const Point& pt) {
  const int d = static_cast<int>(J.size());
  Local out;
  out.g.assign(d, 0.0);
  out.h.assign(d * d, 0.0);
  for (std::size_t j = 0; j < c.size(); ++j) {
    auto factor = [&](int i, int order) {
      const Jet2<double>& f = J[i][pt.row[i]][j];
      return order == 0 ? f.v : order == 1 ? f.d1 : f.d2;
    };
    double v = c[j];
    for (int i = 0; i < d; ++i) v *= factor(i, 0);
    out.u += v;
    for (int s = 0; s < d; ++s)
      for (int t = 0; t < d; ++t) {
        double prod = c[j];
        for (int i = 0; i < d; ++i) {
          int order = (i == s) + (i == t);
          prod *= factor(i, order);
        }
        out.h[s * d + t] += prod;
      }
    for (int s = 0; s < d; ++s) {
      double prod = c[j];
      for (int i = 0; i < d; ++i) prod *= factor(i, i == s ? 1 : 0);
      out.g[s] += prod;
    }
  }
  return out;
}

std::vector<std::vector<std::vector<Jet2<double>>>> all_jets(const TnnState& st, const EvalTables& t) {
  std::vector<std::vector<std::vector<Jet2<double>>>> J;
  for (int i = 0; i < st.d; ++i) J.push_back(jets(st, t, i));
  return J;
}

std::vector<double> unit(int p, int j) {
  std::vector<double> e(p, 0.0);
  e[j] = 1.0;
  return e;
}

}  // namespace

Assembled full_grid_assembly(const ProblemSpec& p, const TnnState& st, const EvalTables& tables,
                             const std::vector<QuadGrid>& grids) {
  const int d = st.d, np = st.p;
  const auto J = all_jets(st, tables);
  std::vector<Real> A(np * np, 0), M(np * np, 0), B(np, 0);
  for_each_point(grids, tables, -1, 0, [&](const Point& pt) {
    std::vector<Local> loc;
    for (int j = 0; j < np; ++j) loc.push_back(evaluate(J, unit(np, j), pt));
    const double b = p.op.b.zero() ? 0.0 : p.op.b(pt.x);
    const double f = p.f.zero() ? 0.0 : p.f(pt.x);
    for (int m = 0; m < np; ++m) {
      B[m] += static_cast<Real>(pt.w) * f * loc[m].u;
      for (int n = 0; n < np; ++n) {
        Real a = 0;
        for (int s = 0; s < d; ++s)
          for (int t = 0; t < d; ++t) a += static_cast<Real>(p.op.A(s, t)) * loc[m].g[s] * loc[n].g[t];
        a += static_cast<Real>(b) * loc[m].u * loc[n].u;
        A[m * np + n] += static_cast<Real>(pt.w) * a;
        M[m * np + n] += static_cast<Real>(pt.w) * loc[m].u * loc[n].u;
      }
    }
  });
  for (const FaceData& face : p.flux) {
    const int row = static_cast<int>(tables.dims[face.dim].n) + (face.high ? 1 : 0);
    for_each_point(grids, tables, face.dim, row, [&](const Point& pt) {
      const double g = face.g(pt.x);
      for (int m = 0; m < np; ++m) B[m] += static_cast<Real>(pt.w) * g * evaluate(J, unit(np, m), pt).u;
    });
  }
  Assembled out{Matrix(np, np), Matrix(np, np), std::vector<double>(np)};
  for (int m = 0; m < np; ++m) {
    out.B[m] = static_cast<double>(B[m]);
    for (int n = 0; n < np; ++n) {
      out.A(m, n) = static_cast<double>(A[m * np + n]);
      out.M(m, n) = static_cast<double>(M[m * np + n]);
    }
  }
  return out;
}

double full_grid_estimator(const ProblemSpec& p, const TnnState& st, const EvalTables& tables,
                           const std::vector<QuadGrid>& grids, bool weighted, double lambda,
                           const TnnState* lift, const EvalTables* lift_tables) {
  const int d = st.d;
  const auto J = all_jets(st, tables);
  std::vector<std::vector<std::vector<Jet2<double>>>> JL;
  if (lift) JL = all_jets(*lift, *lift_tables);
  auto local = [&](const Point& pt) {
    Local u = evaluate(J, st.c, pt);
    if (lift) {
      const Local l = evaluate(JL, lift->c, pt);
      u.u += l.u;
      for (int s = 0; s < d; ++s) u.g[s] += l.g[s];
      for (int k = 0; k < d * d; ++k) u.h[k] += l.h[k];
    }
    return u;
  };
  const bool eigen = p.kind == ProblemKind::Eigen;
  Real sum = 0;
  for_each_point(grids, tables, -1, 0, [&](const Point& pt) {
    const Local u = local(pt);
    const double b = p.op.b.zero() ? 0.0 : p.op.b(pt.x);
    Real r = eigen ? static_cast<Real>(lambda) * u.u : static_cast<Real>(p.f.zero() ? 0.0 : p.f(pt.x));
    r -= static_cast<Real>(b) * u.u;
    for (int s = 0; s < d; ++s)
      for (int t = 0; t < d; ++t) r += static_cast<Real>(p.op.A(s, t)) * u.h[s * d + t];
    sum += static_cast<Real>(pt.w) * r * r / (weighted ? b : 1.0);
  });
  if (p.kind == ProblemKind::Neumann) {
    for (int i = 0; i < d; ++i)
      for (bool high : {false, true}) {
        const int row = static_cast<int>(tables.dims[i].n) + (high ? 1 : 0);
        const double n = high ? 1.0 : -1.0;
        for_each_point(grids, tables, i, row, [&](const Point& pt) {
          const Local u = local(pt);
          Real r = 0;
          for (const FaceData& face : p.flux)
            if (face.dim == i && face.high == high) r += face.g(pt.x);
          for (int t = 0; t < d; ++t) r -= static_cast<Real>(n * p.op.A(i, t)) * u.g[t];
          sum += static_cast<Real>(pt.w) * r * r;
        });
      }
  }
  return static_cast<double>(sum);
}

double full_grid_boundary_fit(const ProblemSpec& p, const TnnState& st, const EvalTables& tables,
                              const std::vector<QuadGrid>& grids) {
  const auto J = all_jets(st, tables);
  Real sum = 0;
  for (int i = 0; i < st.d; ++i)
    for (bool high : {false, true}) {
      const int row = static_cast<int>(tables.dims[i].n) + (high ? 1 : 0);
      for_each_point(grids, tables, i, row, [&](const Point& pt) {
        const Real r = static_cast<Real>(evaluate(J, st.c, pt).u) - p.g(pt.x);
        sum += static_cast<Real>(pt.w) * r * r;
      });
    }
  return static_cast<double>(sum);
}

double max_rel_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorKind::InvalidArgument, "max_rel_diff: shape mismatch");
  double scale = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < a.storage().size(); ++k) {
    scale = std::max(scale, std::abs(b.storage()[k]));
    diff = std::max(diff, std::abs(a.storage()[k] - b.storage()[k]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorKind::InvalidArgument, "max_rel_diff: size mismatch");
  double scale = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    scale = std::max(scale, std::abs(b[k]));
    diff = std::max(diff, std::abs(a[k] - b[k]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

QuadratureReport quadrature_report() {
  QuadratureReport rep;
  const Rule1D gl = gauss_legendre(16);
  for (int k = 0; k <= 31; ++k) {
    long double s = 0;
    for (std::size_t r = 0; r < gl.nodes.size(); ++r) s += gl.weights[r] * std::pow(static_cast<long double>(gl.nodes[r]), k);
    const long double exact = k % 2 ? 0.0L : 2.0L / (k + 1);
    rep.legendre_max_abs = std::max(rep.legendre_max_abs, static_cast<double>(std::abs(s - exact)));
  }
  const QuadGrid gh = gauss_hermite(200);
  for (int m = 0; m <= 5; ++m) {
    long double s = 0;
    for (std::size_t r = 0; r < gh.size(); ++r) {
      const long double x = gh.nodes[r];
      s += gh.weights[r] * std::pow(x, m) * std::exp(-x * x);
    }
    const double exact = m % 2 ? 0.0 : std::tgamma((m + 1) / 2.0);
    // odd moments vanish; measure them against the even moment of the same order
    const double scale = m % 2 ? std::tgamma((m + 2) / 2.0) : exact;
    rep.hermite_max_rel = std::max(rep.hermite_max_rel, static_cast<double>(std::abs(s - exact)) / scale);
  }
  return rep;
}

GradientCheck check_gradient(const ProblemSpec& p, LossKind kind, std::uint64_t seed, int rank,
                             const std::vector<int>& hidden, double h, const std::string& name) {
  std::mt19937_64 rng(seed);
  TnnState st = TnnState::init(p.d, rank, hidden, p.domain, p.masked(), rng);
  Objective obj(p, 1);
  obj.set_through_solve(p.schedule.through_solve);
  TnnState lift;
  int set = kMainSet;
  if (kind == LossKind::BoundaryFit) {
    st = TnnState::init(p.d, rank, hidden, p.domain, false, rng);
    set = kLiftSet;
  } else if (p.kind == ProblemKind::NonhomoDirichlet) {
    lift = TnnState::init(p.d, rank, hidden, p.domain, false, rng);
    obj.prepare(kLiftSet, lift, true);
    obj.solve(LossKind::BoundaryFit, lift);
    obj.prepare(kLiftSet, lift, false);
  }
  // Re-solving matches the gradient for the estimator with gradients through
  // the solve, and leaves the stationary boundary-fit and Rayleigh losses as is.
  const bool resolve = kind != LossKind::Estimator || obj.through_solve();
  TnnState fixed = st;
  obj.prepare(set, fixed, true);
  obj.solve(kind, fixed);
  const double lambda = obj.lambda();
  auto eval = [&](std::span<const double> x, std::vector<double>* g) {
    TnnState t = fixed;
    t.set_flat_params(x);
    obj.prepare(set, t, true);
    if (resolve)
      obj.solve(kind, t);
    else
      obj.set_lambda(lambda);
    return obj.loss(kind, t, g);
  };
  const std::vector<double> theta = fixed.flat_params();
  std::vector<double> grad;
  GradientCheck out;
  out.name = name;
  out.loss = eval(theta, &grad);
  std::vector<FdBlock> blocks;
  std::size_t off = 0;
  for (int i = 0; i < st.d; ++i) {
    blocks.push_back({"theta." + std::to_string(i), off, off + st.theta[i].size()});
    off += st.theta[i].size();
  }
  auto value = [&](std::span<const double> x) { return eval(x, nullptr); };
  out.max_rel = fd_check(value, theta, grad, h, blocks, 1e-3, 4).max_rel;
  out.max_rel_3 = fd_check(value, theta, grad, h, blocks, 1e-3, 2).max_rel;
  return out;
}

ProblemSpec reaction_dirichlet(int d) {
  constexpr double pi = std::numbers::pi;
  ProblemSpec p;
  p.name = "reaction-dirichlet-d" + std::to_string(d);
  p.kind = ProblemKind::HomoDirichlet;
  p.d = d;
  p.domain = std::vector<DimDomain>(d, DimDomain{DimKind::Interval, -1.0, 1.0});
  p.op.A = Matrix(d, d);
  for (int i = 0; i < d; ++i) p.op.A(i, i) = 1.0;
  p.op.b = SeparableFn::constant(d, pi * pi);
  p.exact.u = SeparableFn::sum(d, parse("sin(2*pi*x)"), parse("sin(pi*x)"));
  p.f = SeparableFn::sum(d, parse("sin(2*pi*x)"), parse("sin(pi*x)"), (d + 4) * pi * pi);
  p.grid = {8, 16, 200};
  p.net = {{20, 20}, 8};
  p.schedule.adam_epochs = 300;
  p.schedule.lbfgs_epochs = 50;
  return p;
}

std::vector<AssemblyCheck> assembly_suite() {
  struct Case {
    std::string name;
    ProblemSpec problem;
  };
  std::vector<Case> cases;
  for (int d : {2, 3}) {
    const std::string sd = "-d" + std::to_string(d);
    for (const char* stem : {"poisson-homo", "poisson-nonhomo", "neumann", "laplace-eigen", "harmonic"})
      cases.push_back({stem + sd, *app::family(stem, d)});
    cases.push_back({"reaction" + sd, reaction_dirichlet(d)});
    ProblemSpec full = reaction_dirichlet(d);
    for (int s = 0; s < d; ++s)
      for (int t = 0; t < d; ++t) full.op.A(s, t) = s == t ? 2.0 + s : 0.3 / (1 + s + t);
    full.op.b = SeparableFn::product(d, parse("1 + x^2"));
    cases.push_back({"full-operator" + sd, full});
  }
  std::vector<AssemblyCheck> out;
  std::uint64_t seed = 100;
  for (Case& cs : cases) {
    ProblemSpec& p = cs.problem;
    p.grid = {3, 8, 30};
    for (int rank = 1; rank <= 5; ++rank) {
      std::mt19937_64 rng(seed++);
      TnnState st = TnnState::init(p.d, rank, {6, 6}, p.domain, p.masked(), rng);
      Objective obj(p);
      obj.prepare(kMainSet, st, false);
      const std::vector<QuadGrid>& grids = obj.grids();
      const Assembled ref = full_grid_assembly(p, st, obj.tables(kMainSet), grids);
      AssemblyCheck c;
      c.name = cs.name + " p=" + std::to_string(rank);
      c.stiffness = max_rel_diff(assemble_stiffness(obj.forms(), kMainSet, p.op), ref.A);
      c.mass = max_rel_diff(assemble_mass(obj.forms(), kMainSet), ref.M);
      std::vector<double> B = p.f.zero() ? std::vector<double>(rank, 0.0) : assemble_load(obj.forms(), kMainSet, p.f);
      if (!p.flux.empty()) {
        const std::vector<double> N = assemble_neumann_load(obj.forms(), kMainSet, p.flux);
        for (int m = 0; m < rank; ++m) B[m] += N[m];
      }
      c.load = p.kind == ProblemKind::Eigen ? 0.0 : max_rel_diff(B, ref.B);
      if (p.kind == ProblemKind::NonhomoDirichlet) {
        // The same network as a boundary lift.
        TnnState lift = TnnState::init(p.d, rank, {6, 6}, p.domain, false, rng);
        obj.prepare(kLiftSet, lift, true);
        obj.solve(LossKind::BoundaryFit, lift);
        obj.loss(LossKind::BoundaryFit, lift, nullptr);
        const double bf = to_double(obj.last_squared());
        const double bf_ref = full_grid_boundary_fit(p, lift, obj.tables(kLiftSet), grids);
        obj.prepare(kLiftSet, lift, false);
        obj.solve(LossKind::Estimator, st);
        obj.loss(LossKind::Estimator, st, nullptr);
        const double est = to_double(obj.last_squared());
        const double est_ref = full_grid_estimator(p, st, obj.tables(kMainSet), grids, obj.weighted(), obj.lambda(),
                                                   &lift, &obj.tables(kLiftSet));
        c.loss = std::max(std::abs(bf - bf_ref) / bf_ref, std::abs(est - est_ref) / est_ref);
      } else {
        obj.solve(LossKind::Estimator, st);
        obj.loss(LossKind::Estimator, st, nullptr);
        const double est = to_double(obj.last_squared());
        const double est_ref =
            full_grid_estimator(p, st, obj.tables(kMainSet), grids, obj.weighted(), obj.lambda());
        c.loss = std::abs(est - est_ref) / est_ref;
      }
      out.push_back(c);
    }
  }
  return out;
}

std::vector<GradientCheck> gradient_suite(double h) {
  auto small = [](ProblemSpec p) {
    p.grid = {4, 8, 40};
    return p;
  };
  const std::vector<int> hidden{4, 4};
  std::vector<GradientCheck> out;
  out.push_back(check_gradient(small(reaction_dirichlet(2)), LossKind::Estimator, 11, 2, hidden, h,
                               "estimator, Dirichlet, b > 0 (weighted)"));
  out.push_back(check_gradient(small(*app::lookup("poisson-homo-d2")), LossKind::Estimator, 12, 2, hidden, h,
                               "estimator, Dirichlet, b = 0"));
  out.push_back(check_gradient(small(*app::lookup("poisson-nonhomo-d2")), LossKind::Estimator, 13, 2, hidden, h,
                               "estimator, non-homogeneous Dirichlet"));
  out.push_back(check_gradient(small(*app::lookup("neumann-d2")), LossKind::Estimator, 14, 2, hidden, h,
                               "estimator, Neumann"));
  out.push_back(check_gradient(small(*app::lookup("laplace-eigen-d2")), LossKind::Estimator, 15, 2, hidden, h,
                               "estimator, Laplace eigen"));
  out.push_back(check_gradient(small(*app::lookup("harmonic-d2")), LossKind::Estimator, 16, 2, hidden, h,
                               "estimator, harmonic oscillator"));
  out.push_back(check_gradient(small(*app::lookup("poisson-nonhomo-d2")), LossKind::BoundaryFit, 17, 2, hidden, h,
                               "boundary fit"));
  out.push_back(check_gradient(small(*app::lookup("laplace-eigen-d2")), LossKind::Rayleigh, 18, 2, hidden, h,
                               "Rayleigh quotient"));
  return out;
}

}  // namespace tnn::oracle
