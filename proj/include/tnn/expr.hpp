#pragma once

// One-dimensional factor expressions and rank-q separable functions built
// from them. Grammar: numbers, pi, x, unary minus, + - * /, ^ with an integer
// exponent, and sin, cos, exp, sqrt.

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tnn {

class Expr1D {
 public:
  enum class Op { Num, Pi, X, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt };

  struct Node {
    Op op = Op::Num;
    double value = 0.0;  // Num literal
    int exponent = 0;    // Pow
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  Expr1D();  // the literal 0
  explicit Expr1D(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  static Expr1D number(double v);
  static Expr1D variable();

  double operator()(double x) const;
  std::string str() const;
  const Node& root() const noexcept { return *root_; }
  std::shared_ptr<const Node> node() const noexcept { return root_; }

  bool is_constant() const;

  friend bool operator==(const Expr1D& a, const Expr1D& b);

 private:
  std::shared_ptr<const Node> root_;
};

Expr1D parse(std::string_view text);

/// Pointwise evaluation; a non-finite value is a domain error naming the point.
std::vector<double> eval_batch(const Expr1D& e, std::span<const double> points);

/// Symbolic derivative with light constant folding.
Expr1D deriv(const Expr1D& e);

/// Rejects factors that are not finite on samples uniformly spread over [a, b].
void validate(const Expr1D& e, double a, double b, int samples = 1000);

/// f(x) = sum_k coef_k prod_i factor(k, i)(x_i).
class SeparableFn {
 public:
  SeparableFn() = default;
  explicit SeparableFn(int dim) : dim_(dim) {}

  int dim() const noexcept { return dim_; }
  int rank() const noexcept { return static_cast<int>(coef_.size()); }
  bool zero() const noexcept { return coef_.empty(); }

  void add_term(double coef, std::vector<Expr1D> factors);
  double coef(int k) const { return coef_[k]; }
  const Expr1D& factor(int k, int i) const { return factors_[k][i]; }
  const std::vector<Expr1D>& term(int k) const { return factors_[k]; }

  double operator()(std::span<const double> x) const;

  /// Partial derivative with respect to x_s, again separable.
  SeparableFn partial(int s) const;

  /// coef * sum_k g(x_k) prod_{i != k} others(x_i)
  static SeparableFn sum(int dim, const Expr1D& g, const Expr1D& others, double coef = 1.0);
  /// coef * prod_i g(x_i)
  static SeparableFn product(int dim, const Expr1D& g, double coef = 1.0);
  static SeparableFn constant(int dim, double value);

  /// Rank-one with positive scalar coefficient, i.e. the shape whose inverse stays separable.
  bool rank_one() const noexcept { return rank() == 1; }

 private:
  int dim_ = 0;
  std::vector<double> coef_;
  std::vector<std::vector<Expr1D>> factors_;
};

}  // namespace tnn
