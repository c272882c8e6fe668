#pragma once

// Second-order input jets composed with a scalar reverse-mode tape. A Jet2
// carries (value, d/dx, d^2/dx^2) with respect to one spatial input; with
// T = Var every channel is itself recorded for parameter gradients.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tnn {

class Tape;

/// Handle to a tape node. A Var without a tape is a constant.
class Var {
 public:
  Var() = default;
  Var(double v) : value_(v) {}  // NOLINT: constants convert implicitly
  Var(Tape* tape, std::uint32_t index, double v) : tape_(tape), index_(index), value_(v) {}

  double value() const noexcept { return value_; }
  Tape* tape() const noexcept { return tape_; }
  std::uint32_t index() const noexcept { return index_; }
  bool constant() const noexcept { return tape_ == nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  double value_ = 0.0;
};

class Tape {
 public:
  Tape() { offset_.push_back(0); }

  Var variable(double v);
  /// Node with the given value and local partials with respect to parents.
  Var push(double value, std::span<const Var> parents, std::span<const double> partials);

  std::size_t size() const noexcept { return value_.size(); }
  void reset();

  /// Adjoints of every node for d(out)/d(node), one reverse sweep.
  std::vector<double> adjoints(Var out) const;
  /// Gradient of out with respect to the listed leaves.
  std::vector<double> gradient(Var out, std::span<const Var> leaves) const;

 private:
  std::vector<double> value_;
  std::vector<std::uint32_t> offset_;
  std::vector<std::uint32_t> parent_;
  std::vector<double> partial_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
Var sin(const Var& a);
Var cos(const Var& a);
Var exp(const Var& a);
Var sqrt(const Var& a);
/// Elementwise map with caller-supplied value and derivative.
Var unary(const Var& x, double value, double derivative);
/// coef * prod_i xs[i] as one n-ary node.
Var product(std::span<const Var> xs, double coef = 1.0);
/// sum_i w[i] * xs[i] as one n-ary node.
Var weighted_sum(std::span<const Var> xs, std::span<const double> w);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

template <class T>
struct Jet2 {
  T v{};
  T d1{};
  T d2{};

  Jet2() = default;
  Jet2(T v_, T d1_, T d2_) : v(v_), d1(d1_), d2(d2_) {}
  static Jet2 constant(T c) { return {c, T(0.0), T(0.0)}; }
  static Jet2 input(T x) { return {x, T(1.0), T(0.0)}; }
};

template <class T>
Jet2<T> operator+(const Jet2<T>& f, const Jet2<T>& g) {
  return {f.v + g.v, f.d1 + g.d1, f.d2 + g.d2};
}
template <class T>
Jet2<T> operator-(const Jet2<T>& f, const Jet2<T>& g) {
  return {f.v - g.v, f.d1 - g.d1, f.d2 - g.d2};
}
template <class T>
Jet2<T> operator*(const Jet2<T>& f, const Jet2<T>& g) {
  return {f.v * g.v, f.d1 * g.v + f.v * g.d1, f.d2 * g.v + T(2.0) * (f.d1 * g.d1) + f.v * g.d2};
}
template <class T>
Jet2<T> operator*(const T& a, const Jet2<T>& f) {
  return {a * f.v, a * f.d1, a * f.d2};
}
template <class T>
Jet2<T> operator+(const Jet2<T>& f, const T& a) {
  return {f.v + a, f.d1, f.d2};
}

/// Order-2 chain rule: (u o f)'' = u''(f) f'^2 + u'(f) f''.
template <class T>
Jet2<T> compose(const Jet2<T>& f, const T& u0, const T& u1, const T& u2) {
  return {u0, u1 * f.d1, u2 * (f.d1 * f.d1) + u1 * f.d2};
}
template <class T>
Jet2<T> sin(const Jet2<T>& f) {
  using std::cos;
  using std::sin;
  const T s = sin(f.v);
  const T c = cos(f.v);
  return compose(f, s, c, -s);
}
template <class T>
Jet2<T> cos(const Jet2<T>& f) {
  using std::cos;
  using std::sin;
  const T s = sin(f.v);
  const T c = cos(f.v);
  return compose(f, c, -s, -c);
}
template <class T>
Jet2<T> exp(const Jet2<T>& f) {
  using std::exp;
  const T e = exp(f.v);
  return compose(f, e, e, e);
}

/// Fully connected sine network R -> R^outputs. Hidden layers use sin, the
/// output layer is affine. Parameters are stored per layer as W (out x in,
/// row-major) followed by b.
struct Arch {
  std::vector<int> hidden;
  int outputs = 1;

  std::size_t param_count() const;
  /// Layer widths including the scalar input and the output layer.
  std::vector<int> widths() const;
};

/// Evaluate the network at x, returning one jet per output channel.
template <class T>
std::vector<Jet2<T>> forward_jet(std::span<const T> params, const Arch& arch, double x);

/// Parameters recorded as tape leaves, for gradient extraction.
std::vector<Var> make_leaves(Tape& tape, std::span<const double> params);

/// Gradient of a recorded scalar; non-finite loss is a numerical error.
std::vector<double> backward(const Tape& tape, Var loss, std::span<const Var> leaves);

struct FdBlock {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct FdBlockReport {
  std::string name;
  double max_rel = 0.0;
  double max_abs = 0.0;
  double scale = 0.0;  // largest |finite-difference gradient| in the block
};

struct FdReport {
  std::vector<FdBlockReport> blocks;
  double max_rel = 0.0;
};

/// Central-difference check of an analytic gradient. The relative error of a
/// component is |g - g_fd| / max(|g_fd|, floor * scale), where scale is the
/// block's largest |g_fd|. Order 2 is the three-point stencil, order 4 the
/// five-point one (truncation O(h^4)).
FdReport fd_check(const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> params, std::span<const double> grad, double h,
                  std::span<const FdBlock> blocks = {}, double floor = 1e-3, int order = 2);

}  // namespace tnn
