#include "tnn/problem.hpp"

#include <cmath>

#include "tnn/error.hpp"

namespace tnn {
namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& msg) {
  fail(ErrorKind::Validation, field + ": " + msg);
}

void check_fn(const SeparableFn& fn, const ProblemSpec& p, const std::string& field) {
  if (fn.zero()) return;
  if (fn.dim() != p.d) invalid(field, "expected " + std::to_string(p.d) + " factors per term");
  for (int k = 0; k < fn.rank(); ++k) {
    if (!std::isfinite(fn.coef(k))) invalid(field, "non-finite coefficient");
    for (int i = 0; i < p.d; ++i) {
      const DimDomain& dom = p.domain[i];
      const double a = dom.bounded() ? dom.a : -10.0;
      const double b = dom.bounded() ? dom.b : 10.0;
      try {
        validate(fn.factor(k, i), a, b);
      } catch (const Error& e) {
        invalid(field + ".terms[" + std::to_string(k) + "][" + std::to_string(i) + "]", e.what());
      }
    }
  }
}

}  // namespace

const char* to_string(ProblemKind kind) noexcept {
  switch (kind) {
    case ProblemKind::HomoDirichlet: return "homo-dirichlet";
    case ProblemKind::NonhomoDirichlet: return "nonhomo-dirichlet";
    case ProblemKind::Neumann: return "neumann";
    case ProblemKind::Eigen: return "eigen";
  }
  return "?";
}

std::optional<ProblemKind> parse_kind(const std::string& s) {
  for (ProblemKind k : {ProblemKind::HomoDirichlet, ProblemKind::NonhomoDirichlet, ProblemKind::Neumann,
                        ProblemKind::Eigen})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

void ProblemSpec::validate() const {
  if (d < 1) invalid("dim", "must be at least 1");
  if (static_cast<int>(domain.size()) != d) invalid("domain", "expected one interval per dimension");
  for (int i = 0; i < d; ++i) {
    const DimDomain& dom = domain[i];
    if (dom.bounded() && !(dom.a < dom.b)) invalid("domain[" + std::to_string(i) + "]", "need a < b");
    if (!dom.bounded() && kind != ProblemKind::Eigen)
      invalid("domain[" + std::to_string(i) + "]", "the whole line is only supported for eigen problems");
  }
  if (op.A.rows() != static_cast<std::size_t>(d) || op.A.cols() != static_cast<std::size_t>(d))
    invalid("operator.A", "must be a d x d matrix");
  for (int s = 0; s < d; ++s)
    for (int t = 0; t < d; ++t) {
      if (!std::isfinite(op.A(s, t))) invalid("operator.A", "non-finite entry");
      if (op.A(s, t) != op.A(t, s)) invalid("operator.A", "must be symmetric");
    }
  check_fn(op.b, *this, "operator.b");
  check_fn(f, *this, "f");
  if (kind == ProblemKind::NonhomoDirichlet) {
    if (g.zero()) invalid("g", "required for nonhomo-dirichlet problems");
    check_fn(g, *this, "g");
  }
  if (kind == ProblemKind::Neumann) {
    for (std::size_t k = 0; k < flux.size(); ++k) {
      const FaceData& fd = flux[k];
      if (fd.dim < 0 || fd.dim >= d) invalid("flux[" + std::to_string(k) + "].dim", "out of range");
      check_fn(fd.g, *this, "flux[" + std::to_string(k) + "].g");
    }
  }
  if (exact.u) check_fn(*exact.u, *this, "exact.u");
  if (grid.subintervals < 1) invalid("grid.subintervals", "must be positive");
  if (grid.points < 1 || grid.points > 64) invalid("grid.points", "must be in [1, 64]");
  if (grid.hermite < 1 || grid.hermite > 300) invalid("grid.hermite", "must be in [1, 300]");
  if (net.rank < 1) invalid("network.rank", "must be positive");
  for (int w : net.hidden)
    if (w < 1) invalid("network.hidden", "layer widths must be positive");
  const Schedule& s = schedule;
  for (int e : {s.pretrain_epochs, s.bd_adam_epochs, s.bd_lbfgs_epochs, s.adam_epochs, s.lbfgs_epochs})
    if (e < 0) invalid("schedule", "epoch counts must be non-negative");
  for (double lr : {s.pretrain_lr, s.bd_adam_lr, s.bd_lbfgs_lr, s.adam_lr, s.lbfgs_lr})
    if (!(lr >= 0.0) || !std::isfinite(lr)) invalid("schedule", "learning rates must be finite and non-negative");
}

std::vector<QuadGrid> ProblemSpec::grids() const {
  std::vector<QuadGrid> out;
  out.reserve(d);
  for (const DimDomain& dom : domain)
    out.push_back(dom.bounded() ? composite_grid(dom.a, dom.b, grid.subintervals, grid.points)
                                : gauss_hermite(grid.hermite));
  return out;
}

}  // namespace tnn
