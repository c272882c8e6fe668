#include "tnn/tnn.hpp"

#include <cmath>
#include <string>

#include "tnn/error.hpp"
#include "tnn/parallel.hpp"

namespace tnn {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

TnnState TnnState::init(int d, int p, std::vector<int> hidden, std::vector<DimDomain> domain,
                        bool mask, std::mt19937_64& rng) {
  if (d < 1 || p < 1) fail(ErrorKind::InvalidArgument, "TnnState::init: need d >= 1 and p >= 1");
  if (static_cast<int>(domain.size()) != d)
    fail(ErrorKind::InvalidArgument, "TnnState::init: domain size does not match d");
  TnnState s;
  s.d = d;
  s.p = p;
  s.arch.hidden = std::move(hidden);
  s.arch.outputs = p;
  s.domain = std::move(domain);
  s.mask = mask;
  s.c.assign(p, 1.0);
  const std::vector<int> w = s.arch.widths();
  s.theta.resize(d);
  for (int i = 0; i < d; ++i) {
    std::vector<double>& t = s.theta[i];
    t.reserve(s.arch.param_count());
    for (std::size_t l = 1; l < w.size(); ++l) {
      const double bound = std::sqrt(1.0 / w[l - 1]);
      const std::size_t count = static_cast<std::size_t>(w[l]) * w[l - 1] + w[l];
      for (std::size_t k = 0; k < count; ++k) t.push_back(uniform(rng, -bound, bound));
    }
  }
  return s;
}

std::size_t TnnState::param_count() const { return static_cast<std::size_t>(d) * arch.param_count(); }

std::vector<double> TnnState::flat_params() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const auto& t : theta) out.insert(out.end(), t.begin(), t.end());
  return out;
}

void TnnState::set_flat_params(std::span<const double> flat) {
  if (flat.size() != param_count())
    fail(ErrorKind::InvalidArgument, "set_flat_params: length mismatch");
  std::size_t off = 0;
  for (auto& t : theta) {
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.begin());
    off += t.size();
  }
}

void multiplier(const DimDomain& dom, bool mask, double x, double& h0, double& h1, double& h2) {
  if (!dom.bounded()) {
    const double e = std::exp(-0.5 * x * x);
    h0 = e;
    h1 = -x * e;
    h2 = (x * x - 1.0) * e;
  } else if (mask) {
    h0 = (x - dom.a) * (dom.b - x);
    h1 = dom.a + dom.b - 2.0 * x;
    h2 = -2.0;
  } else {
    h0 = 1.0;
    h1 = 0.0;
    h2 = 0.0;
  }
}

namespace {

void eval_dim(const TnnState& state, const QuadGrid& grid, int i, DimTable& t) {
  const DimDomain& dom = state.domain[i];
  const std::size_t p = state.p;
  t.n = grid.size();
  t.x = grid.nodes;
  if (dom.bounded()) {
    t.x.push_back(dom.a);
    t.x.push_back(dom.b);
  }
  t.rows = t.x.size();
  const std::size_t R = t.rows;
  mlp_forward(state.arch, state.theta[i], t.x, t.cache, t.raw);
  t.h0.resize(R);
  t.h1.resize(R);
  t.h2.resize(R);
  for (std::size_t r = 0; r < R; ++r) multiplier(dom, state.mask, t.x[r], t.h0[r], t.h1[r], t.h2[r]);
  // fold the multiplier into the raw jets in place
  for (std::size_t r = 0; r < R; ++r) {
    double* y0 = t.raw.data() + r * p;
    double* y1 = t.raw.data() + (R + r) * p;
    double* y2 = t.raw.data() + (2 * R + r) * p;
    const double h0 = t.h0[r], h1 = t.h1[r], h2 = t.h2[r];
    for (std::size_t j = 0; j < p; ++j) {
      const double v0 = y0[j], v1 = y1[j], v2 = y2[j];
      y0[j] = h0 * v0;
      y1[j] = h1 * v0 + h0 * v1;
      y2[j] = h2 * v0 + 2.0 * h1 * v1 + h0 * v2;
    }
  }
  t.norm.assign(p, 0.0);
  for (std::size_t r = 0; r < t.n; ++r) {
    const double* y0 = t.raw.data() + r * p;
    for (std::size_t j = 0; j < p; ++j) t.norm[j] += grid.weights[r] * y0[j] * y0[j];
  }
  for (std::size_t j = 0; j < p; ++j) {
    t.norm[j] = std::sqrt(t.norm[j]);
    if (!(t.norm[j] >= 1e-12))
      fail(ErrorKind::DegenerateBasis, "basis column " + std::to_string(j) + " of dimension " +
                                           std::to_string(i) + " has quadrature norm " +
                                           std::to_string(t.norm[j]));
  }
  t.val.resize(R, p);
  t.d1.resize(R, p);
  t.d2.resize(R, p);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < p; ++j) {
      const double inv = 1.0 / t.norm[j];
      t.val(r, j) = t.raw(r, j) * inv;
      t.d1(r, j) = t.raw(R + r, j) * inv;
      t.d2(r, j) = t.raw(2 * R + r, j) * inv;
    }
}

void backward_dim(const TnnState& state, const QuadGrid& grid, int i, const DimTable& t,
                  const TableAdjoint& bar, std::vector<double>& grad) {
  const std::size_t p = state.p;
  const std::size_t R = t.rows;
  std::vector<double> nbar(p, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < p; ++j)
      nbar[j] -= bar.val(r, j) * t.val(r, j) + bar.d1(r, j) * t.d1(r, j) + bar.d2(r, j) * t.d2(r, j);
  for (std::size_t j = 0; j < p; ++j) nbar[j] /= t.norm[j];

  Matrix ybar(3 * R, p);
  for (std::size_t r = 0; r < R; ++r) {
    const double wr = r < t.n ? grid.weights[r] : 0.0;
    const double h0 = t.h0[r], h1 = t.h1[r], h2 = t.h2[r];
    double* o0 = ybar.data() + r * p;
    double* o1 = ybar.data() + (R + r) * p;
    double* o2 = ybar.data() + (2 * R + r) * p;
    for (std::size_t j = 0; j < p; ++j) {
      const double inv = 1.0 / t.norm[j];
      double f0 = bar.val(r, j) * inv;
      const double f1 = bar.d1(r, j) * inv;
      const double f2 = bar.d2(r, j) * inv;
      // norm_j = sqrt(sum_r w_r phi0^2)
      f0 += nbar[j] * wr * t.val(r, j);
      o0[j] = h0 * f0 + h1 * f1 + h2 * f2;
      o1[j] = h0 * f1 + 2.0 * h1 * f2;
      o2[j] = h0 * f2;
    }
  }
  mlp_backward(state.arch, state.theta[i], t.cache, ybar, grad);
}

}  // namespace

void eval_tables(const TnnState& state, std::span<const QuadGrid> grids, EvalTables& tables,
                 int threads) {
  if (static_cast<int>(grids.size()) != state.d)
    fail(ErrorKind::InvalidArgument, "eval_tables: grid count does not match dimension");
  tables.dims.resize(state.d);
  parallel_for(state.d, threads, [&](int i) { eval_dim(state, grids[i], i, tables.dims[i]); });
}

void tables_backward(const TnnState& state, std::span<const QuadGrid> grids,
                     const EvalTables& tables, std::span<const TableAdjoint> bar,
                     std::vector<std::vector<double>>& grad, int threads) {
  grad.resize(state.d);
  for (int i = 0; i < state.d; ++i) grad[i].resize(state.theta[i].size(), 0.0);
  parallel_for(state.d, threads, [&](int i) {
    backward_dim(state, grids[i], i, tables.dims[i], bar[i], grad[i]);
  });
}

std::vector<Jet2<double>> factor_jets(const TnnState& state, const EvalTables& tables, int i,
                                      double x) {
  const DimDomain& dom = state.domain[i];
  if (dom.bounded() && (x < dom.a || x > dom.b))
    fail(ErrorKind::InvalidArgument, "value_at: point outside the domain");
  std::vector<Jet2<double>> y = forward_jet<double>(state.theta[i], state.arch, x);
  double h0, h1, h2;
  multiplier(dom, state.mask, x, h0, h1, h2);
  const Jet2<double> h(h0, h1, h2);
  for (int j = 0; j < state.p; ++j) {
    const Jet2<double> m = h * y[j];
    const double inv = 1.0 / tables.dims[i].norm[j];
    y[j] = Jet2<double>(m.v * inv, m.d1 * inv, m.d2 * inv);
  }
  return y;
}

double value_at(const TnnState& state, const EvalTables& tables, std::span<const double> x) {
  std::vector<double> prod(state.c.begin(), state.c.end());
  for (int i = 0; i < state.d; ++i) {
    const auto jets = factor_jets(state, tables, i, x[i]);
    for (int j = 0; j < state.p; ++j) prod[j] *= jets[j].v;
  }
  double s = 0.0;
  for (double v : prod) s += v;
  return s;
}

double value_at(const TnnState& state, std::span<const QuadGrid> grids, std::span<const double> x) {
  EvalTables tables;
  eval_tables(state, grids, tables);
  return value_at(state, tables, x);
}

}  // namespace tnn
