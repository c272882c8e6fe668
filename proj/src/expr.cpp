#include "tnn/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "tnn/error.hpp"

namespace tnn {
namespace {

using Op = Expr1D::Op;
using NodePtr = std::shared_ptr<const Expr1D::Node>;

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr, double value = 0.0, int exponent = 0) {
  auto n = std::make_shared<Expr1D::Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  n->value = value;
  n->exponent = exponent;
  return n;
}

bool is_num(const NodePtr& n, double v) { return n->op == Op::Num && n->value == v; }
bool is_num(const NodePtr& n) { return n->op == Op::Num; }

// Literals are kept non-negative so that printing and parsing agree.
NodePtr num(double v) {
  if (v < 0.0) return make(Op::Neg, make(Op::Num, nullptr, nullptr, -v));
  return make(Op::Num, nullptr, nullptr, v);
}

NodePtr neg(NodePtr a) {
  if (is_num(a, 0.0)) return a;
  if (a->op == Op::Neg) return a->lhs;
  return make(Op::Neg, std::move(a));
}

NodePtr add(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0)) return b;
  if (is_num(b, 0.0)) return a;
  if (is_num(a) && is_num(b)) return num(a->value + b->value);
  if (b->op == Op::Neg) return make(Op::Sub, std::move(a), b->lhs);
  return make(Op::Add, std::move(a), std::move(b));
}

NodePtr sub(NodePtr a, NodePtr b) {
  if (is_num(b, 0.0)) return a;
  if (is_num(a, 0.0)) return neg(std::move(b));
  if (is_num(a) && is_num(b)) return num(a->value - b->value);
  if (b->op == Op::Neg) return make(Op::Add, std::move(a), b->lhs);
  return make(Op::Sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
  if (is_num(a, 1.0)) return b;
  if (is_num(b, 1.0)) return a;
  if (is_num(a) && is_num(b)) return num(a->value * b->value);
  if (a->op == Op::Neg) return neg(mul(a->lhs, std::move(b)));
  if (b->op == Op::Neg) return neg(mul(std::move(a), b->lhs));
  return make(Op::Mul, std::move(a), std::move(b));
}

NodePtr divide(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0)) return num(0.0);
  if (is_num(b, 1.0)) return a;
  return make(Op::Div, std::move(a), std::move(b));
}

NodePtr power(NodePtr a, int k) {
  if (k == 0) return num(1.0);
  if (k == 1) return a;
  return make(Op::Pow, std::move(a), nullptr, 0.0, k);
}

double eval_node(const Expr1D::Node& n, double x) {
  switch (n.op) {
    case Op::Num: return n.value;
    case Op::Pi: return std::numbers::pi;
    case Op::X: return x;
    case Op::Neg: return -eval_node(*n.lhs, x);
    case Op::Add: return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
    case Op::Sub: return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
    case Op::Mul: return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
    case Op::Div: return eval_node(*n.lhs, x) / eval_node(*n.rhs, x);
    case Op::Pow: {
      const double base = eval_node(*n.lhs, x);
      int k = n.exponent;
      const bool inv = k < 0;
      if (inv) k = -k;
      double r = 1.0;
      double b = base;
      while (k > 0) {
        if (k & 1) r *= b;
        b *= b;
        k >>= 1;
      }
      return inv ? 1.0 / r : r;
    }
    case Op::Sin: return std::sin(eval_node(*n.lhs, x));
    case Op::Cos: return std::cos(eval_node(*n.lhs, x));
    case Op::Exp: return std::exp(eval_node(*n.lhs, x));
    case Op::Sqrt: return std::sqrt(eval_node(*n.lhs, x));
  }
  return 0.0;
}

bool has_x(const Expr1D::Node& n) {
  if (n.op == Op::X) return true;
  return (n.lhs && has_x(*n.lhs)) || (n.rhs && has_x(*n.rhs));
}

bool equal(const Expr1D::Node& a, const Expr1D::Node& b) {
  if (a.op != b.op) return false;
  if (a.op == Op::Num && a.value != b.value) return false;
  if (a.op == Op::Pow && a.exponent != b.exponent) return false;
  if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
  if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
  if (a.lhs && !equal(*a.lhs, *b.lhs)) return false;
  if (a.rhs && !equal(*a.rhs, *b.rhs)) return false;
  return true;
}

int precedence(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print(const Expr1D::Node& n, std::string& out) {
  auto wrapped = [&out](const Expr1D::Node& c, bool paren) {
    if (paren) out += '(';
    print(c, out);
    if (paren) out += ')';
  };
  switch (n.op) {
    case Op::Num: out += format_number(n.value); return;
    case Op::Pi: out += "pi"; return;
    case Op::X: out += 'x'; return;
    case Op::Neg:
      out += '-';
      wrapped(*n.lhs, precedence(n.lhs->op) < 3);
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const int p = precedence(n.op);
      wrapped(*n.lhs, precedence(n.lhs->op) < p);
      out += n.op == Op::Add ? "+" : n.op == Op::Sub ? "-" : n.op == Op::Mul ? "*" : "/";
      wrapped(*n.rhs, precedence(n.rhs->op) <= p);
      return;
    }
    case Op::Pow:
      wrapped(*n.lhs, precedence(n.lhs->op) < 5);
      out += '^';
      out += std::to_string(n.exponent);
      return;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Sqrt:
      out += n.op == Op::Sin ? "sin(" : n.op == Op::Cos ? "cos(" : n.op == Op::Exp ? "exp(" : "sqrt(";
      print(*n.lhs, out);
      out += ')';
      return;
  }
}

NodePtr derive(const NodePtr& n) {
  switch (n->op) {
    case Op::Num:
    case Op::Pi: return num(0.0);
    case Op::X: return num(1.0);
    case Op::Neg: return neg(derive(n->lhs));
    case Op::Add: return add(derive(n->lhs), derive(n->rhs));
    case Op::Sub: return sub(derive(n->lhs), derive(n->rhs));
    case Op::Mul:
      return add(mul(derive(n->lhs), n->rhs), mul(n->lhs, derive(n->rhs)));
    case Op::Div:
      return divide(sub(mul(derive(n->lhs), n->rhs), mul(n->lhs, derive(n->rhs))),
                    power(n->rhs, 2));
    case Op::Pow: {
      const int k = n->exponent;
      return mul(mul(num(static_cast<double>(k)), power(n->lhs, k - 1)), derive(n->lhs));
    }
    case Op::Sin: return mul(make(Op::Cos, n->lhs), derive(n->lhs));
    case Op::Cos: return neg(mul(make(Op::Sin, n->lhs), derive(n->lhs)));
    case Op::Exp: return mul(n, derive(n->lhs));
    case Op::Sqrt: return divide(derive(n->lhs), mul(num(2.0), n));
  }
  return num(0.0);
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr run() {
    skip();
    if (pos_ >= s_.size()) error("empty expression");
    NodePtr e = expr();
    skip();
    if (pos_ < s_.size()) error("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::Validation,
         "expression \"" + std::string(s_) + "\": " + msg + " at position " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make(Op::Add, lhs, term());
      else if (accept('-'))
        lhs = make(Op::Sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Op::Mul, lhs, unary());
      else if (accept('/'))
        lhs = make(Op::Div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    return pow_expr();
  }

  NodePtr pow_expr() {
    NodePtr base = primary();
    while (accept('^')) {
      skip();
      bool negative = false;
      if (pos_ < s_.size() && s_[pos_] == '-') {
        negative = true;
        ++pos_;
      }
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) error("exponent must be an integer literal");
      if (pos_ < s_.size() && (s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E'))
        error("exponent must be an integer literal");
      if (pos_ - start > 6) error("exponent too large");
      int k = std::stoi(std::string(s_.substr(start, pos_ - start)));
      base = make(Op::Pow, base, nullptr, 0.0, negative ? -k : k);
    }
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) error("unexpected end of input");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!accept(')')) error("expected ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id == "x") return make(Op::X);
      if (id == "pi") return make(Op::Pi);
      Op op;
      if (id == "sin")
        op = Op::Sin;
      else if (id == "cos")
        op = Op::Cos;
      else if (id == "exp")
        op = Op::Exp;
      else if (id == "sqrt")
        op = Op::Sqrt;
      else {
        pos_ = start;
        error("unknown identifier '" + std::string(id) + "'");
      }
      if (!accept('(')) error("expected '(' after " + std::string(id));
      NodePtr arg = expr();
      if (!accept(')')) error("expected ')'");
      return make(op, arg);
    }
    error("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    auto digits = [this] {
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
        pos_ = q;
        digits();
      }
    }
    const std::string text(s_.substr(start, pos_ - start));
    if (text == ".") error("malformed number");
    return make(Op::Num, nullptr, nullptr, std::strtod(text.c_str(), nullptr));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr1D::Expr1D() : root_(num(0.0)) {}

Expr1D Expr1D::number(double v) { return Expr1D(num(v)); }
Expr1D Expr1D::variable() { return Expr1D(make(Op::X)); }

double Expr1D::operator()(double x) const { return eval_node(*root_, x); }

std::string Expr1D::str() const {
  std::string out;
  print(*root_, out);
  return out;
}

bool Expr1D::is_constant() const { return !has_x(*root_); }

bool operator==(const Expr1D& a, const Expr1D& b) { return equal(*a.root_, *b.root_); }

Expr1D parse(std::string_view text) { return Expr1D(Parser(text).run()); }

std::vector<double> eval_batch(const Expr1D& e, std::span<const double> points) {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = e(points[i]);
    if (!std::isfinite(out[i])) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", points[i]);
      fail(ErrorKind::Domain, "expression \"" + e.str() + "\" is not finite at x = " + buf);
    }
  }
  return out;
}

Expr1D deriv(const Expr1D& e) { return Expr1D(derive(e.node())); }

void validate(const Expr1D& e, double a, double b, int samples) {
  std::vector<double> pts(samples);
  for (int i = 0; i < samples; ++i)
    pts[i] = samples == 1 ? 0.5 * (a + b) : a + (b - a) * i / (samples - 1.0);
  eval_batch(e, pts);
}

void SeparableFn::add_term(double coef, std::vector<Expr1D> factors) {
  if (static_cast<int>(factors.size()) != dim_)
    fail(ErrorKind::InvalidArgument, "separable term has " + std::to_string(factors.size()) +
                                         " factors, expected " + std::to_string(dim_));
  coef_.push_back(coef);
  factors_.push_back(std::move(factors));
}

double SeparableFn::operator()(std::span<const double> x) const {
  double s = 0.0;
  for (int k = 0; k < rank(); ++k) {
    double t = coef_[k];
    for (int i = 0; i < dim_; ++i) t *= factors_[k][i](x[i]);
    s += t;
  }
  return s;
}

SeparableFn SeparableFn::partial(int s) const {
  SeparableFn out(dim_);
  for (int k = 0; k < rank(); ++k) {
    Expr1D d = deriv(factors_[k][s]);
    if (d.root().op == Op::Num && d.root().value == 0.0) continue;
    std::vector<Expr1D> f = factors_[k];
    f[s] = d;
    out.add_term(coef_[k], std::move(f));
  }
  return out;
}

SeparableFn SeparableFn::sum(int dim, const Expr1D& g, const Expr1D& others, double coef) {
  SeparableFn out(dim);
  for (int k = 0; k < dim; ++k) {
    std::vector<Expr1D> f(dim, others);
    f[k] = g;
    out.add_term(coef, std::move(f));
  }
  return out;
}

SeparableFn SeparableFn::product(int dim, const Expr1D& g, double coef) {
  SeparableFn out(dim);
  out.add_term(coef, std::vector<Expr1D>(dim, g));
  return out;
}

SeparableFn SeparableFn::constant(int dim, double value) {
  SeparableFn out(dim);
  if (value != 0.0) out.add_term(value, std::vector<Expr1D>(dim, Expr1D::number(1.0)));
  return out;
}

}  // namespace tnn
