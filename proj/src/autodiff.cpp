#include "tnn/autodiff.hpp"

#include <algorithm>
#include <limits>

#include "tnn/error.hpp"

namespace tnn {

Var Tape::variable(double v) { return push(v, {}, {}); }

Var Tape::push(double value, std::span<const Var> parents, std::span<const double> partials) {
  const auto index = static_cast<std::uint32_t>(value_.size());
  for (std::size_t k = 0; k < parents.size(); ++k) {
    if (parents[k].constant()) continue;
    parent_.push_back(parents[k].index());
    partial_.push_back(partials[k]);
  }
  value_.push_back(value);
  offset_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return Var(this, index, value);
}

void Tape::reset() {
  value_.clear();
  parent_.clear();
  partial_.clear();
  offset_.assign(1, 0);
}

std::vector<double> Tape::adjoints(Var out) const {
  std::vector<double> bar(value_.size(), 0.0);
  if (out.constant()) return bar;
  bar[out.index()] = 1.0;
  for (std::size_t n = out.index() + 1; n-- > 0;) {
    const double b = bar[n];
    if (b == 0.0) continue;
    for (std::uint32_t e = offset_[n]; e < offset_[n + 1]; ++e) bar[parent_[e]] += b * partial_[e];
  }
  return bar;
}

std::vector<double> Tape::gradient(Var out, std::span<const Var> leaves) const {
  const std::vector<double> bar = adjoints(out);
  std::vector<double> g(leaves.size(), 0.0);
  for (std::size_t k = 0; k < leaves.size(); ++k)
    if (!leaves[k].constant()) g[k] = bar[leaves[k].index()];
  return g;
}

namespace {

Tape* tape_of(const Var& a, const Var& b) { return a.tape() ? a.tape() : b.tape(); }

Var binary(const Var& a, const Var& b, double value, double da, double db) {
  Tape* t = tape_of(a, b);
  if (!t) return Var(value);
  const Var parents[2] = {a, b};
  const double partials[2] = {da, db};
  return t->push(value, parents, partials);
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  return binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
Var operator-(const Var& a, const Var& b) {
  return binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
Var operator*(const Var& a, const Var& b) {
  return binary(a, b, a.value() * b.value(), b.value(), a.value());
}
Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return binary(a, b, q, 1.0 / b.value(), -q / b.value());
}
Var operator-(const Var& a) { return unary(a, -a.value(), -1.0); }

Var unary(const Var& x, double value, double derivative) {
  if (x.constant()) return Var(value);
  const Var parents[1] = {x};
  const double partials[1] = {derivative};
  return x.tape()->push(value, parents, partials);
}

Var sin(const Var& a) { return unary(a, std::sin(a.value()), std::cos(a.value())); }
Var cos(const Var& a) { return unary(a, std::cos(a.value()), -std::sin(a.value())); }
Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return unary(a, e, e);
}
Var sqrt(const Var& a) {
  const double r = std::sqrt(a.value());
  return unary(a, r, 0.5 / r);
}

Var product(std::span<const Var> xs, double coef) {
  const std::size_t n = xs.size();
  // prefix/suffix products give every partial without division
  std::vector<double> pre(n + 1, 1.0);
  std::vector<double> suf(n + 1, 1.0);
  for (std::size_t i = 0; i < n; ++i) pre[i + 1] = pre[i] * xs[i].value();
  for (std::size_t i = n; i-- > 0;) suf[i] = suf[i + 1] * xs[i].value();
  const double value = coef * pre[n];
  Tape* t = nullptr;
  for (const Var& x : xs)
    if (x.tape()) t = x.tape();
  if (!t) return Var(value);
  std::vector<double> partials(n);
  for (std::size_t i = 0; i < n; ++i) partials[i] = coef * pre[i] * suf[i + 1];
  return t->push(value, xs, partials);
}

Var weighted_sum(std::span<const Var> xs, std::span<const double> w) {
  double value = 0.0;
  Tape* t = nullptr;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    value += w[i] * xs[i].value();
    if (xs[i].tape()) t = xs[i].tape();
  }
  if (!t) return Var(value);
  return t->push(value, xs, w);
}

std::size_t Arch::param_count() const {
  const std::vector<int> w = widths();
  std::size_t n = 0;
  for (std::size_t l = 1; l < w.size(); ++l) n += static_cast<std::size_t>(w[l]) * w[l - 1] + w[l];
  return n;
}

std::vector<int> Arch::widths() const {
  std::vector<int> w;
  w.reserve(hidden.size() + 2);
  w.push_back(1);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(outputs);
  return w;
}

template <class T>
std::vector<Jet2<T>> forward_jet(std::span<const T> params, const Arch& arch, double x) {
  if (params.size() != arch.param_count())
    fail(ErrorKind::InvalidArgument, "forward_jet: parameter vector length does not match arch");
  const std::vector<int> w = arch.widths();
  std::vector<Jet2<T>> act{Jet2<T>::input(T(x))};
  std::size_t off = 0;
  for (std::size_t l = 1; l < w.size(); ++l) {
    const int in = w[l - 1];
    const int out = w[l];
    const bool last = l + 1 == w.size();
    std::vector<Jet2<T>> next(out);
    for (int j = 0; j < out; ++j) {
      Jet2<T> z = Jet2<T>::constant(params[off + static_cast<std::size_t>(out) * in + j]);
      for (int k = 0; k < in; ++k) z = z + params[off + static_cast<std::size_t>(j) * in + k] * act[k];
      next[j] = last ? z : sin(z);
    }
    off += static_cast<std::size_t>(out) * in + out;
    act = std::move(next);
  }
  return act;
}

template std::vector<Jet2<double>> forward_jet<double>(std::span<const double>, const Arch&, double);
template std::vector<Jet2<Var>> forward_jet<Var>(std::span<const Var>, const Arch&, double);

std::vector<Var> make_leaves(Tape& tape, std::span<const double> params) {
  std::vector<Var> v;
  v.reserve(params.size());
  for (double p : params) v.push_back(tape.variable(p));
  return v;
}

std::vector<double> backward(const Tape& tape, Var loss, std::span<const Var> leaves) {
  if (!std::isfinite(loss.value())) fail(ErrorKind::Numerical, "backward: loss is not finite");
  return tape.gradient(loss, leaves);
}

FdReport fd_check(const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> params, std::span<const double> grad, double h,
                  std::span<const FdBlock> blocks, double floor, int order) {
  if (order != 2 && order != 4) fail(ErrorKind::InvalidArgument, "fd_check: order must be 2 or 4");
  std::vector<FdBlock> all(blocks.begin(), blocks.end());
  if (all.empty()) all.push_back({"all", 0, params.size()});
  std::vector<double> x(params.begin(), params.end());
  FdReport report;
  for (const FdBlock& b : all) {
    std::vector<double> fd(b.end - b.begin);
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const double x0 = x[i];
      auto at = [&](double step) {
        x[i] = x0 + step;
        return loss(x);
      };
      if (order == 2) {
        const double lp = at(h), lm = at(-h);
        fd[i - b.begin] = (lp - lm) / (2.0 * h);
      } else {
        const double lp2 = at(2.0 * h), lp = at(h), lm = at(-h), lm2 = at(-2.0 * h);
        fd[i - b.begin] = (8.0 * (lp - lm) - (lp2 - lm2)) / (12.0 * h);
      }
      x[i] = x0;
    }
    FdBlockReport r;
    r.name = b.name;
    for (double g : fd) r.scale = std::max(r.scale, std::abs(g));
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const double g = fd[i - b.begin];
      const double diff = std::abs(grad[i] - g);
      const double denom = std::max({std::abs(g), floor * r.scale, std::numeric_limits<double>::min()});
      r.max_abs = std::max(r.max_abs, diff);
      r.max_rel = std::max(r.max_rel, diff == 0.0 ? 0.0 : diff / denom);
    }
    report.max_rel = std::max(report.max_rel, r.max_rel);
    report.blocks.push_back(r);
  }
  return report;
}

}  // namespace tnn
