#include "tnn/solver.hpp"

#include <cmath>
#include <sstream>

#include "tnn/error.hpp"

namespace tnn {
namespace {

using Component = Objective::Component;

std::vector<Factor> plain(int d) { return std::vector<Factor>(d, Factor{0, 0}); }

// sum_j scale * c_j prod_i phi_ij, with channel `ch` in dimension `dim` (if any).
void add_basis_terms(std::vector<Term>& out, const std::vector<Component>& u, int d, double scale,
                     int dim = -1, int ch = 0) {
  for (const Component& comp : u)
    for (std::size_t j = 0; j < comp.c->size(); ++j) {
      Term t{scale * (*comp.c)[j], comp.set, static_cast<int>(j), plain(d)};
      if (dim >= 0) t.f[dim].channel = static_cast<std::int8_t>(ch);
      out.push_back(std::move(t));
    }
}

void add_data_terms(std::vector<Term>& out, Forms& forms, const SeparableFn& fn, double scale) {
  const int d = forms.dim();
  for (int k = 0; k < fn.rank(); ++k) {
    Term t{scale * fn.coef(k), -1, 0, std::vector<Factor>(d)};
    for (int i = 0; i < d; ++i) t.f[i] = Factor{-1, forms.vec(i, fn.factor(k, i))};
    out.push_back(std::move(t));
  }
}

// Integral weighted by the k-th term of a separable function.
Integral weighted_by(Forms& forms, const SeparableFn& fn, int k) {
  Integral in = Integral::interior(forms.dim());
  for (int i = 0; i < forms.dim(); ++i) in.weight[i] = forms.vec(i, fn.factor(k, i));
  in.scale = fn.coef(k);
  return in;
}

Var sum_vars(const std::vector<Var>& vs) {
  const std::vector<double> ones(vs.size(), 1.0);
  return weighted_sum(vs, ones);
}

double sqrt_pos(Extended v) { return std::sqrt(std::max(0.0, to_double(v))); }

}  // namespace

Objective::Objective(const ProblemSpec& problem, int threads)
    : problem_(problem),
      grids_(problem.grids()),
      threads_(std::max(1, threads)),
      forms_(grids_, problem_.domain),
      interior_(Integral::interior(problem.d)) {
  const SeparableFn& b = problem_.op.b;
  const int d = problem_.d;
  if (b.rank() == 1 && b.coef(0) > 0.0) {
    bool positive = true;
    std::vector<std::vector<double>> inv(d);
    for (int i = 0; i < d && positive; ++i) {
      const std::vector<double> v = eval_batch(b.factor(0, i), forms_.rows(i));
      inv[i].resize(v.size());
      for (std::size_t r = 0; r < v.size(); ++r) {
        if (!(v[r] > 0.0)) positive = false;
        inv[i][r] = 1.0 / v[r];
      }
    }
    if (positive) {
      weighted_ = true;
      for (int i = 0; i < d; ++i) {
        const Expr1D& e = b.factor(0, i);
        if (e.is_constant() && e(0.0) == 1.0) continue;
        interior_.weight[i] = forms_.vec(i, "1/(" + e.str() + ")", inv[i]);
      }
      interior_.scale = 1.0 / b.coef(0);
    }
  }
  if (problem_.exact.u)
    for (int s = 0; s < d; ++s) exact_grad_.push_back(problem_.exact.u->partial(s));
}

void Objective::prepare(int set, const TnnState& state, bool trainable) {
  EvalTables& t = tables_[set];
  eval_tables(state, grids_, t, threads_);
  forms_.bind(set, &t, trainable);
  if (set == kLiftSet) lift_ = trainable ? nullptr : &state;
}

std::vector<Component> Objective::solution_components(const TnnState& main) const {
  std::vector<Component> u{{kMainSet, &main.c}};
  if (lift_) u.push_back({kLiftSet, &lift_->c});
  return u;
}

std::vector<Term> Objective::residual_terms(const std::vector<Component>& u, bool eigen, double lambda) {
  std::vector<Term> out;
  if (!eigen) add_data_terms(out, forms_, problem_.f, 1.0);
  std::vector<Term> op = operator_terms(u, eigen, lambda);
  out.insert(out.end(), op.begin(), op.end());
  return out;
}

std::vector<Term> Objective::operator_terms(const std::vector<Component>& u, bool eigen, double lambda) {
  const int d = problem_.d;
  std::vector<Term> out;
  if (eigen) add_basis_terms(out, u, d, lambda);
  const SeparableFn& b = problem_.op.b;
  for (int k = 0; k < b.rank(); ++k) {
    std::vector<Factor> f(d);
    for (int i = 0; i < d; ++i) f[i] = Factor{0, forms_.vec(i, b.factor(k, i))};
    for (const Component& comp : u)
      for (std::size_t j = 0; j < comp.c->size(); ++j)
        out.push_back(Term{-b.coef(k) * (*comp.c)[j], comp.set, static_cast<int>(j), f});
  }
  for (int s = 0; s < d; ++s)
    for (int t = 0; t < d; ++t) {
      const double a = problem_.op.A(s, t);
      if (a == 0.0) continue;
      for (const Component& comp : u)
        for (std::size_t j = 0; j < comp.c->size(); ++j) {
          Term term{a * (*comp.c)[j], comp.set, static_cast<int>(j), plain(d)};
          if (s == t) {
            term.f[s].channel = 2;
          } else {
            term.f[s].channel = 1;
            term.f[t].channel = 1;
          }
          out.push_back(std::move(term));
        }
    }
  return out;
}

std::vector<Term> Objective::flux_terms(const std::vector<Component>& u, int dim, bool high, bool data) {
  const int d = problem_.d;
  std::vector<Term> out;
  if (data)
    for (const FaceData& fd : problem_.flux)
      if (fd.dim == dim && fd.high == high) add_data_terms(out, forms_, fd.g, 1.0);
  const double n = high ? 1.0 : -1.0;
  for (int t = 0; t < d; ++t) {
    const double a = problem_.op.A(dim, t);
    if (a != 0.0) add_basis_terms(out, u, d, -n * a, t, 1);
  }
  return out;
}

Var Objective::estimator(const TnnState& state, Tape* tape, Extended& squared) {
  const std::vector<Component> u = solution_components(state);
  const bool eigen = problem_.kind == ProblemKind::Eigen;
  const std::vector<Term> r = residual_terms(u, eigen, lambda_);
  PairSum s = forms_.pair_sum(r, r, interior_, tape);
  squared = s.value;
  std::vector<Var> parts{s.var};
  if (problem_.kind == ProblemKind::Neumann) {
    for (int i = 0; i < problem_.d; ++i)
      for (bool high : {false, true}) {
        const std::vector<Term> f = flux_terms(u, i, high);
        PairSum fs = forms_.pair_sum(f, f, Integral::face(problem_.d, i, high), tape);
        squared += fs.value;
        parts.push_back(fs.var);
      }
  }
  return sum_vars(parts);
}

Var Objective::boundary_fit(const TnnState& lift, Tape* tape, Extended& squared) {
  const int d = problem_.d;
  std::vector<Term> terms;
  add_basis_terms(terms, {{kLiftSet, &lift.c}}, d, 1.0);
  add_data_terms(terms, forms_, problem_.g, -1.0);
  squared = 0;
  std::vector<Var> parts;
  for (int i = 0; i < d; ++i) {
    if (!problem_.domain[i].bounded()) continue;
    for (bool high : {false, true}) {
      PairSum s = forms_.pair_sum(terms, terms, Integral::face(d, i, high), tape);
      squared += s.value;
      parts.push_back(s.var);
    }
  }
  return sum_vars(parts);
}

Var Objective::rayleigh(const TnnState& state, Tape* tape, Extended& value) {
  const int d = problem_.d;
  const std::vector<Component> u{{kMainSet, &state.c}};
  std::vector<Term> val;
  add_basis_terms(val, u, d, 1.0);
  std::vector<std::vector<Term>> grad(d);
  for (int s = 0; s < d; ++s) add_basis_terms(grad[s], u, d, 1.0, s, 1);
  Extended num = 0;
  std::vector<Var> parts;
  for (int s = 0; s < d; ++s)
    for (int t = 0; t < d; ++t) {
      const double a = problem_.op.A(s, t);
      if (a == 0.0) continue;
      Integral in = Integral::interior(d);
      in.scale = a;
      PairSum ps = forms_.pair_sum(grad[s], grad[t], in, tape);
      num += ps.value;
      parts.push_back(ps.var);
    }
  const SeparableFn& b = problem_.op.b;
  for (int k = 0; k < b.rank(); ++k) {
    PairSum ps = forms_.pair_sum(val, val, weighted_by(forms_, b, k), tape);
    num += ps.value;
    parts.push_back(ps.var);
  }
  PairSum den = forms_.pair_sum(val, val, Integral::interior(d), tape);
  value = num / den.value;
  return sum_vars(parts) / den.var;
}

Var Objective::energy_form(const std::vector<Component>& v, const std::vector<Component>& w, Tape* tape) {
  const int d = problem_.d;
  std::vector<Var> parts;
  for (int s = 0; s < d; ++s) {
    std::vector<Term> gv;
    add_basis_terms(gv, v, d, 1.0, s, 1);
    for (int t = 0; t < d; ++t) {
      const double a = problem_.op.A(s, t);
      if (a == 0.0) continue;
      std::vector<Term> gw;
      add_basis_terms(gw, w, d, 1.0, t, 1);
      Integral in = Integral::interior(d);
      in.scale = a;
      parts.push_back(forms_.pair_sum(gv, gw, in, tape).var);
    }
  }
  const SeparableFn& b = problem_.op.b;
  if (b.rank() > 0) {
    std::vector<Term> vv, ww;
    add_basis_terms(vv, v, d, 1.0);
    add_basis_terms(ww, w, d, 1.0);
    for (int k = 0; k < b.rank(); ++k)
      parts.push_back(forms_.pair_sum(vv, ww, weighted_by(forms_, b, k), tape).var);
  }
  return sum_vars(parts);
}

Var Objective::mass_form(const std::vector<Component>& v, const std::vector<Component>& w, Tape* tape) {
  std::vector<Term> vv, ww;
  add_basis_terms(vv, v, problem_.d, 1.0);
  add_basis_terms(ww, w, problem_.d, 1.0);
  return forms_.pair_sum(vv, ww, Integral::interior(problem_.d), tape).var;
}

Var Objective::load_form(const std::vector<Component>& v, Tape* tape) {
  const int d = problem_.d;
  std::vector<Term> vv, f;
  add_basis_terms(vv, v, d, 1.0);
  add_data_terms(f, forms_, problem_.f, 1.0);
  std::vector<Var> parts{forms_.pair_sum(f, vv, Integral::interior(d), tape).var};
  if (problem_.kind == ProblemKind::Neumann)
    for (const FaceData& fd : problem_.flux) {
      std::vector<Term> g;
      add_data_terms(g, forms_, fd.g, 1.0);
      parts.push_back(forms_.pair_sum(g, vv, Integral::face(d, fd.dim, fd.high), tape).var);
    }
  return sum_vars(parts);
}

Var Objective::solve_adjoint(const TnnState& state, Tape* tape) {
  const int d = problem_.d;
  const int p = state.p;
  if (stiff_.rows() != static_cast<std::size_t>(p))
    fail(ErrorKind::InvalidArgument, "loss: the Galerkin solve must precede the gradient");
  const bool eigen = problem_.kind == ProblemKind::Eigen;
  const bool neumann = problem_.kind == ProblemKind::Neumann;
  const std::vector<Component> u = solution_components(state);
  const std::vector<Term> r = residual_terms(u, eigen, lambda_);
  struct Face {
    Integral in;
    std::vector<Term> terms;
  };
  std::vector<Face> faces;
  if (neumann)
    for (int i = 0; i < d; ++i)
      for (bool high : {false, true}) faces.push_back({Integral::face(d, i, high), flux_terms(u, i, high)});

  // dS/dc_j
  std::vector<double> gc(p), unit(p, 0.0);
  const std::vector<Component> e{{kMainSet, &unit}};
  auto nonzero = [](std::vector<Term> t) {
    std::erase_if(t, [](const Term& x) { return x.coef == 0.0; });
    return t;
  };
  for (int j = 0; j < p; ++j) {
    std::fill(unit.begin(), unit.end(), 0.0);
    unit[j] = 1.0;
    Extended g = forms_.pair_sum(r, nonzero(operator_terms(e, eigen, lambda_)), interior_).value;
    for (int f = 0; f < static_cast<int>(faces.size()); ++f)
      g += forms_.pair_sum(faces[f].terms, nonzero(flux_terms(e, f / 2, f % 2 == 1, false)), faces[f].in).value;
    gc[j] = 2.0 * to_double(g);
  }

  if (!eigen) {
    // c = A^{-1} B: dS = z^T (dB - dA c) with A z = dS/dc
    const std::vector<double> z = cholesky_solve(stiff_, gc);
    const std::vector<Component> zc{{kMainSet, &z}};
    return load_form(zc, tape) - energy_form(zc, u, tape);
  }

  // (A - lambda M) c = 0, c^T M c = 1
  std::vector<Term> val;
  add_basis_terms(val, u, d, 1.0);
  const double glambda = 2.0 * to_double(forms_.pair_sum(r, val, interior_).value);
  const double lambda = lambda_;
  const std::vector<double>& c = state.c;
  std::vector<double> mc(p, 0.0), rhs(p);
  double cg = 0.0;
  for (int m = 0; m < p; ++m) {
    for (int n = 0; n < p; ++n) mc[m] += mass_(m, n) * c[n];
    cg += c[m] * gc[m];
  }
  const double sigma = std::max(1.0, std::abs(lambda));
  Matrix k(p, p);
  for (int m = 0; m < p; ++m) {
    rhs[m] = gc[m] - cg * mc[m];
    for (int n = 0; n < p; ++n) k(m, n) = stiff_(m, n) - lambda * mass_(m, n) + sigma * mc[m] * mc[n];
  }
  const std::vector<double> z = lu_solve(k, rhs);
  const std::vector<Component> zc{{kMainSet, &z}};
  const Var acc = energy_form(u, u, tape), mcc = mass_form(u, u, tape);
  const Var azc = energy_form(zc, u, tape), mzc = mass_form(zc, u, tape);
  return weighted_sum(std::vector<Var>{acc, mcc, azc, mzc},
                      std::vector<double>{glambda, -glambda * lambda - 0.5 * cg, -1.0, lambda});
}

SolveResult Objective::solve(LossKind kind, TnnState& state) {
  SolveResult res;
  SolveInfo info;
  if (kind == LossKind::BoundaryFit) {
    const Matrix mb = assemble_boundary_mass(forms_, kLiftSet, problem_.domain);
    const std::vector<double> bb = assemble_boundary_load(forms_, kLiftSet, problem_.g, problem_.domain);
    state.c = cholesky_solve(mb, bb, &info);
  } else if (problem_.kind == ProblemKind::Eigen || kind == LossKind::Rayleigh) {
    const Matrix a = assemble_stiffness(forms_, kMainSet, problem_.op);
    const Matrix m = assemble_mass(forms_, kMainSet);
    EigenPair ep = smallest_generalized_eigpair(a, m);
    stiff_ = a;
    mass_ = m;
    state.c = std::move(ep.c);
    lambda_ = ep.lambda;
    res.lambda = ep.lambda;
    info.jitter = ep.jitter;
  } else {
    const Matrix a = assemble_stiffness(forms_, kMainSet, problem_.op);
    std::vector<double> b = assemble_load(forms_, kMainSet, problem_.f);
    if (problem_.kind == ProblemKind::Neumann) {
      const std::vector<double> g = assemble_neumann_load(forms_, kMainSet, problem_.flux);
      for (std::size_t m = 0; m < b.size(); ++m) b[m] += g[m];
    }
    if (problem_.kind == ProblemKind::NonhomoDirichlet) {
      if (!lift_) fail(ErrorKind::InvalidArgument, "solve: the lift is not prepared");
      const Matrix cross = assemble_cross_stiffness(forms_, kMainSet, kLiftSet, problem_.op);
      for (std::size_t m = 0; m < b.size(); ++m)
        for (std::size_t n = 0; n < cross.cols(); ++n) b[m] -= cross(m, n) * lift_->c[n];
    }
    state.c = cholesky_solve(a, b, &info);
    stiff_ = a;
  }
  for (double v : state.c)
    if (!std::isfinite(v)) fail(ErrorKind::Numerical, "Galerkin coefficients are not finite");
  res.jitter = info.jitter;
  res.residual = info.residual;
  return res;
}

double Objective::loss(LossKind kind, const TnnState& state, std::vector<double>* grad) {
  Tape* tape = nullptr;
  if (grad) {
    tape_.reset();
    forms_.begin_tape(&tape_);
    tape = &tape_;
  }
  Extended value = 0;
  Var v;
  double loss = 0.0;
  switch (kind) {
    case LossKind::Estimator:
    case LossKind::BoundaryFit: {
      v = kind == LossKind::Estimator ? estimator(state, tape, value) : boundary_fit(state, tape, value);
      if (tape && kind == LossKind::Estimator && through_solve_) v = v + solve_adjoint(state, tape);
      const double s = to_double(value);
      loss = std::sqrt(std::max(s, 1e-30));
      v = unary(v, loss, s > 1e-30 ? 0.5 / loss : 0.0);
      break;
    }
    case LossKind::Rayleigh:
      v = rayleigh(state, tape, value);
      loss = to_double(value);
      break;
  }
  last_squared_ = value;
  if (!std::isfinite(loss)) fail(ErrorKind::Numerical, "loss is not finite");
  if (grad) {
    const int set = kind == LossKind::BoundaryFit ? kLiftSet : kMainSet;
    const std::vector<double> adj = tape_.adjoints(v);
    std::map<int, std::vector<TableAdjoint>> bars;
    forms_.scatter_adjoints(adj, bars);
    std::vector<TableAdjoint>& bar = bars[set];
    const EvalTables& tables = tables_.at(set);
    if (bar.size() != static_cast<std::size_t>(state.d)) {
      bar.resize(state.d);
      for (int i = 0; i < state.d; ++i) bar[i].reset(tables.dims[i].rows, state.p);
    }
    std::vector<std::vector<double>> g;
    tables_backward(state, grids_, tables, bar, g, threads_);
    grad->clear();
    grad->reserve(state.param_count());
    for (const auto& gi : g) grad->insert(grad->end(), gi.begin(), gi.end());
  }
  return loss;
}

Metrics Objective::metrics(const TnnState* main, const TnnState* lift, bool energy) {
  Metrics m;
  const int d = problem_.d;
  const ProblemKind kind = problem_.kind;
  if (kind == ProblemKind::NonhomoDirichlet && lift) {
    std::vector<Term> diff, g;
    add_basis_terms(diff, {{kLiftSet, &lift->c}}, d, 1.0);
    add_data_terms(diff, forms_, problem_.g, -1.0);
    add_data_terms(g, forms_, problem_.g, 1.0);
    Extended num = 0, den = 0;
    for (int i = 0; i < d; ++i)
      for (bool high : {false, true}) {
        const Integral in = Integral::face(d, i, high);
        num += forms_.pair_sum(diff, diff, in).value;
        den += forms_.pair_sum(g, g, in).value;
      }
    m.e_bd = sqrt_pos(num) / sqrt_pos(den);
  }
  if (!main) return m;
  std::vector<Component> u{{kMainSet, &main->c}};
  if (kind == ProblemKind::NonhomoDirichlet && lift) u.push_back({kLiftSet, &lift->c});
  const Integral in = Integral::interior(d);

  if (kind == ProblemKind::Eigen) {
    if (problem_.exact.lambda && std::isfinite(lambda_))
      m.e_lambda = std::abs(lambda_ - *problem_.exact.lambda) / std::abs(*problem_.exact.lambda);
    if (!problem_.exact.u) return m;
    std::vector<Term> ex, ps;
    add_data_terms(ex, forms_, *problem_.exact.u, 1.0);
    add_basis_terms(ps, u, d, 1.0);
    const Extended uu = forms_.pair_sum(ex, ex, in).value;
    const Extended up = forms_.pair_sum(ex, ps, in).value;
    const Extended pp = forms_.pair_sum(ps, ps, in).value;
    m.e_l2 = sqrt_pos(uu - up * up / pp) / sqrt_pos(uu);
    Extended gu = 0, gup = 0, gp = 0;
    for (int s = 0; s < d; ++s) {
      std::vector<Term> es, pss;
      add_data_terms(es, forms_, exact_grad_[s], 1.0);
      add_basis_terms(pss, u, d, 1.0, s, 1);
      gu += forms_.pair_sum(es, es, in).value;
      gup += forms_.pair_sum(es, pss, in).value;
      gp += forms_.pair_sum(pss, pss, in).value;
    }
    m.e_h1 = sqrt_pos(gu - gup * gup / gp) / sqrt_pos(gu);
    return m;
  }

  if (!problem_.exact.u) return m;
  std::vector<Term> f, e;
  add_data_terms(f, forms_, problem_.f, 1.0);
  add_data_terms(e, forms_, *problem_.exact.u, 1.0);
  add_basis_terms(e, u, d, -1.0);
  const double fnorm = sqrt_pos(forms_.pair_sum(f, f, in).value);
  const double scale = fnorm > 0.0 ? fnorm : 1.0;
  m.e_l2 = sqrt_pos(forms_.pair_sum(e, e, in).value) / scale;
  std::vector<std::vector<Term>> de(d);
  Extended h1 = 0;
  for (int s = 0; s < d; ++s) {
    add_data_terms(de[s], forms_, exact_grad_[s], 1.0);
    add_basis_terms(de[s], u, d, -1.0, s, 1);
    h1 += forms_.pair_sum(de[s], de[s], in).value;
  }
  m.e_h1 = sqrt_pos(h1) / scale;
  if (energy) {
    Extended en = 0;
    for (int s = 0; s < d; ++s)
      for (int t = 0; t < d; ++t) {
        const double a = problem_.op.A(s, t);
        if (a == 0.0) continue;
        Integral ia = in;
        ia.scale = a;
        en += forms_.pair_sum(de[s], de[t], ia).value;
      }
    const SeparableFn& b = problem_.op.b;
    for (int k = 0; k < b.rank(); ++k) en += forms_.pair_sum(e, e, weighted_by(forms_, b, k)).value;
    m.energy = sqrt_pos(en);
  }
  return m;
}

std::vector<Phase> phases_for(const ProblemSpec& problem) {
  const Schedule& s = problem.schedule;
  std::vector<Phase> out;
  if (problem.kind == ProblemKind::NonhomoDirichlet) {
    out.push_back({"bd-adam", OptimizerKind::Adam, LossKind::BoundaryFit, kLiftSet, s.bd_adam_epochs, s.bd_adam_lr});
    out.push_back({"bd-lbfgs", OptimizerKind::Lbfgs, LossKind::BoundaryFit, kLiftSet, s.bd_lbfgs_epochs, s.bd_lbfgs_lr});
  }
  if (problem.kind == ProblemKind::Eigen)
    out.push_back({"pretrain", OptimizerKind::Adam, LossKind::Rayleigh, kMainSet, s.pretrain_epochs, s.pretrain_lr});
  out.push_back({"adam", OptimizerKind::Adam, LossKind::Estimator, kMainSet, s.adam_epochs, s.adam_lr});
  out.push_back({"lbfgs", OptimizerKind::Lbfgs, LossKind::Estimator, kMainSet, s.lbfgs_epochs, s.lbfgs_lr});
  return out;
}

Trainer::Trainer(const ProblemSpec& problem, std::uint64_t seed) : problem_(problem) {
  problem_.validate();
  phases_ = phases_for(problem_);
  std::mt19937_64 rng(seed);
  snap_.seed = seed;
  snap_.main = TnnState::init(problem_.d, problem_.net.rank, problem_.net.hidden, problem_.domain,
                              problem_.masked(), rng);
  if (problem_.kind == ProblemKind::NonhomoDirichlet)
    snap_.lift = TnnState::init(problem_.d, problem_.net.rank, problem_.net.hidden, problem_.domain,
                                false, rng);
  std::ostringstream os;
  os << rng;
  snap_.rng = os.str();
}

Trainer::Trainer(const ProblemSpec& problem, TrainerSnapshot snapshot)
    : problem_(problem), snap_(std::move(snapshot)) {
  problem_.validate();
  phases_ = phases_for(problem_);
  if (snap_.phase > phases_.size()) fail(ErrorKind::Validation, "checkpoint: phase index out of range");
  if (snap_.main.d != problem_.d || snap_.main.domain != problem_.domain)
    fail(ErrorKind::Validation, "checkpoint: state does not match the problem");
  if ((problem_.kind == ProblemKind::NonhomoDirichlet) != snap_.lift.has_value())
    fail(ErrorKind::Validation, "checkpoint: lift network presence does not match the problem");
}

void Trainer::freeze_lift(Objective& obj) {
  obj.prepare(kLiftSet, *snap_.lift, true);
  obj.solve(LossKind::BoundaryFit, *snap_.lift);
  obj.prepare(kLiftSet, *snap_.lift, false);
}

EpochRecord Trainer::evaluate(Objective& obj, const Phase& phase, bool energy, std::vector<double>* grad) {
  EpochRecord rec;
  rec.epoch = snap_.epoch;
  rec.phase = phase.name;
  SolveResult s;
  if (phase.set == kLiftSet) {
    TnnState& lift = *snap_.lift;
    obj.prepare(kLiftSet, lift, true);
    s = obj.solve(LossKind::BoundaryFit, lift);
    rec.loss = obj.loss(LossKind::BoundaryFit, lift, grad);
    rec.metrics = obj.metrics(nullptr, &lift, false);
  } else {
    obj.prepare(kMainSet, snap_.main, true);
    s = obj.solve(phase.loss, snap_.main);
    rec.loss = obj.loss(phase.loss, snap_.main, grad);
    rec.metrics = obj.metrics(&snap_.main, snap_.lift ? &*snap_.lift : nullptr, energy);
  }
  rec.lambda = s.lambda;
  rec.jitter = s.jitter;
  return rec;
}

TrainReport Trainer::run(const TrainOptions& options) {
  Objective obj(problem_, options.threads);
  obj.set_through_solve(problem_.schedule.through_solve);
  TrainReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  auto emit = [&](EpochRecord& r) {
    r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.jitter > 0.0) ++rep.jitter_events;
    rep.records.push_back(r);
    if (options.on_record) options.on_record(r);
  };
  auto checkpoint = [&] {
    if (options.on_checkpoint) options.on_checkpoint(snap_);
  };

  bool lift_frozen = false;
  while (snap_.phase < phases_.size()) {
    const Phase& ph = phases_[snap_.phase];
    if (ph.set == kMainSet && snap_.lift && !lift_frozen) {
      freeze_lift(obj);
      lift_frozen = true;
    }
    TnnState& st = ph.set == kLiftSet ? *snap_.lift : snap_.main;
    while (snap_.phase_epoch < ph.epochs) {
      std::vector<double> grad;
      EpochRecord rec = evaluate(obj, ph, options.energy, &grad);
      emit(rec);
      std::vector<double> theta = st.flat_params();
      if (ph.optimizer == OptimizerKind::Adam) {
        if (adam_step(snap_.adam, theta, grad, ph.lr))
          st.set_flat_params(theta);
        else
          ++rep.skipped_steps;
      } else {
        // The line search follows the same objective as the gradient: with c
        // re-solved when the gradient goes through the solve, frozen otherwise.
        const bool resolve = obj.through_solve() && ph.loss == LossKind::Estimator;
        TnnState trial = st;
        LossGrad fn = [&](std::span<const double> x, std::vector<double>& g) {
          trial.set_flat_params(x);
          obj.prepare(ph.set, trial, true);
          if (resolve) obj.solve(ph.loss, trial);
          return obj.loss(ph.loss, trial, &g);
        };
        const LbfgsResult r = lbfgs_step(snap_.lbfgs, theta, rec.loss, grad, fn, ph.lr);
        if (r.accepted)
          st.set_flat_params(theta);
        else
          ++rep.rejected_steps;
      }
      ++snap_.epoch;
      ++snap_.phase_epoch;
      if (options.checkpoint_every > 0 && snap_.epoch % options.checkpoint_every == 0) checkpoint();
    }
    ++snap_.phase;
    snap_.phase_epoch = 0;
    snap_.adam = AdamState{};
    snap_.lbfgs = LbfgsState{};
    checkpoint();
  }
  if (snap_.lift && !lift_frozen) freeze_lift(obj);
  const Phase fin{"final", OptimizerKind::Adam, LossKind::Estimator, kMainSet, 0, 0.0};
  rep.final = evaluate(obj, fin, options.energy, nullptr);
  emit(rep.final);
  snap_.finished = true;
  checkpoint();
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace tnn
