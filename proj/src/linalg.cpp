#include "tnn/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "tnn/error.hpp"

namespace tnn {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void check_square(const Matrix& A, const char* what) {
  if (A.rows() != A.cols()) fail(ErrorKind::InvalidArgument, std::string(what) + ": matrix is not square");
}

double trace(const Matrix& A) {
  double t = 0.0;
  for (std::size_t i = 0; i < A.rows(); ++i) t += A(i, i);
  return t;
}

// L y = b then L^T x = y.
void cholesky_apply(const Matrix& L, std::vector<double>& x) {
  const std::size_t n = L.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * x[k];
    x[i] = s / L(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= L(k, i) * x[k];
    x[i] = s / L(i, i);
  }
}

std::vector<double> residual_ld(const Matrix& A, std::span<const double> x, std::span<const double> B) {
  const std::size_t n = A.rows();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double s = B[i];
    for (std::size_t k = 0; k < n; ++k) s -= static_cast<long double>(A(i, k)) * x[k];
    r[i] = static_cast<double>(s);
  }
  return r;
}

constexpr double kJitter[] = {0.0, 1e-14, 1e-12, 1e-10};

// Factor with the jitter ladder; returns the relative shift used.
double factor_with_jitter(const Matrix& A, Matrix& L, const char* what) {
  const double scale = std::abs(trace(A)) / std::max<std::size_t>(A.rows(), 1);
  for (double tau : kJitter)
    if (cholesky(A, tau * scale, L)) return tau;
  fail(ErrorKind::SingularSystem, std::string(what) + ": Cholesky breakdown after maximal jitter");
}

}  // namespace

bool cholesky(const Matrix& A, double shift, Matrix& L) {
  const std::size_t n = A.rows();
  L.resize(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = A(j, j) + shift;
    for (std::size_t k = 0; k < j; ++k) s -= L(j, k) * L(j, k);
    if (!(s > 0.0) || !std::isfinite(s)) return false;
    const double ljj = std::sqrt(s);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = A(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= L(i, k) * L(j, k);
      L(i, j) = t / ljj;
    }
  }
  return true;
}

std::vector<double> cholesky_solve(const Matrix& A, std::span<const double> B, SolveInfo* info) {
  check_square(A, "cholesky_solve");
  if (B.size() != A.rows()) fail(ErrorKind::InvalidArgument, "cholesky_solve: size mismatch");
  Matrix L;
  const double tau = factor_with_jitter(A, L, "cholesky_solve");
  std::vector<double> x(B.begin(), B.end());
  cholesky_apply(L, x);
  for (int it = 0; it < (tau > 0.0 ? 4 : 1); ++it) {
    std::vector<double> r = residual_ld(A, x, B);
    cholesky_apply(L, r);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += r[i];
  }
  if (info) {
    info->jitter = tau;
    const double nb = norm2(B);
    const std::vector<double> r = residual_ld(A, x, B);
    info->residual = nb > 0.0 ? norm2(r) / nb : norm2(r);
  }
  return x;
}

EigenPair smallest_generalized_eigpair(const Matrix& A, const Matrix& M) {
  check_square(A, "smallest_generalized_eigpair");
  check_square(M, "smallest_generalized_eigpair");
  if (A.rows() != M.rows()) fail(ErrorKind::InvalidArgument, "smallest_generalized_eigpair: size mismatch");
  const std::size_t n = A.rows();
  Matrix L;
  EigenPair out;
  out.jitter = factor_with_jitter(M, L, "smallest_generalized_eigpair");

  // C = L^{-1} A L^{-T}
  Eigen::MatrixXd Le(n, n), Ae(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Le(i, j) = j <= i ? L(i, j) : 0.0;
      Ae(i, j) = A(i, j);
    }
  const auto tri = Le.triangularView<Eigen::Lower>();
  Eigen::MatrixXd X = tri.solve(Ae);
  Eigen::MatrixXd C = tri.solve(X.transpose());
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) fail(ErrorKind::Numerical, "symmetric eigensolver did not converge");
  Eigen::VectorXd y = es.eigenvectors().col(0);
  Eigen::VectorXd c = Le.transpose().triangularView<Eigen::Upper>().solve(y);

  out.c.assign(c.data(), c.data() + n);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      num += static_cast<long double>(out.c[i]) * A(i, j) * out.c[j];
      den += static_cast<long double>(out.c[i]) * M(i, j) * out.c[j];
    }
  if (!(den > 0.0L)) fail(ErrorKind::Numerical, "smallest_generalized_eigpair: non-positive M-norm");
  out.lambda = static_cast<double>(num / den);
  const double s = 1.0 / std::sqrt(static_cast<double>(den));
  double big = 0.0;
  for (double& v : out.c) {
    v *= s;
    big = std::max(big, std::abs(v));
  }
  for (double v : out.c) {
    if (std::abs(v) > 1e-8 * big) {
      if (v < 0.0)
        for (double& w : out.c) w = -w;
      break;
    }
  }
  if (!std::isfinite(out.lambda)) fail(ErrorKind::Numerical, "eigenvalue is not finite");
  return out;
}

bool adam_step(AdamState& opt, std::span<double> params, std::span<const double> grad, double lr) {
  if (grad.size() != params.size()) fail(ErrorKind::InvalidArgument, "adam_step: size mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) return false;
  if (opt.m.size() != params.size()) {
    opt.m.assign(params.size(), 0.0);
    opt.v.assign(params.size(), 0.0);
  }
  ++opt.t;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad[i];
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    const double mh = opt.m[i] / c1;
    const double vh = opt.v[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + opt.eps);
  }
  return true;
}

LbfgsResult lbfgs_step(LbfgsState& opt, std::vector<double>& params, const LossGrad& fn, double lr) {
  std::vector<double> g;
  const double f0 = fn(params, g);
  return lbfgs_step(opt, params, f0, g, fn, lr);
}

LbfgsResult lbfgs_step(LbfgsState& opt, std::vector<double>& params, double f0,
                       std::span<const double> g0, const LossGrad& fn, double lr) {
  const std::size_t n = params.size();
  LbfgsResult res;
  res.loss = f0;
  const double gnorm1 = [&] {
    double s = 0.0;
    for (double g : g0) s += std::abs(g);
    return s;
  }();
  if (gnorm1 == 0.0 || !std::isfinite(gnorm1)) return res;

  std::vector<double> dir(n);
  auto steepest = [&] {
    const double scale = std::min(1.0, 1.0 / gnorm1);
    for (std::size_t i = 0; i < n; ++i) dir[i] = -scale * g0[i];
  };
  if (opt.fallback || opt.s.empty()) {
    if (opt.fallback) {
      opt.s.clear();
      opt.y.clear();
    }
    steepest();
  } else {
    std::vector<double> q(g0.begin(), g0.end());
    const std::size_t m = opt.s.size();
    std::vector<double> alpha(m), rho(m);
    for (std::size_t k = m; k-- > 0;) {
      rho[k] = 1.0 / dot(opt.y[k], opt.s[k]);
      alpha[k] = rho[k] * dot(opt.s[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * opt.y[k][i];
    }
    const double gamma = dot(opt.s.back(), opt.y.back()) / dot(opt.y.back(), opt.y.back());
    for (double& v : q) v *= gamma;
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho[k] * dot(opt.y[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] += opt.s[k][i] * (alpha[k] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) dir[i] = -q[i];
    if (!(dot(g0, dir) < 0.0)) steepest();
  }

  const double slope = dot(g0, dir);
  double step = lr;
  std::vector<double> trial(n), gt;
  for (int k = 0; k < 25; ++k) {
    for (std::size_t i = 0; i < n; ++i) trial[i] = params[i] + step * dir[i];
    ++res.trials;
    double ft = 0.0;
    bool ok = true;
    try {
      ft = fn(trial, gt);
    } catch (const Error& e) {
      if (!e.numerical()) throw;
      ok = false;
    }
    if (ok && std::isfinite(ft) && ft <= f0 + 1e-4 * step * slope) {
      std::vector<double> s(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = trial[i] - params[i];
        y[i] = gt[i] - g0[i];
      }
      const double sy = dot(s, y);
      if (sy > 1e-10 * norm2(s) * norm2(y)) {
        opt.s.push_back(std::move(s));
        opt.y.push_back(std::move(y));
        while (static_cast<int>(opt.s.size()) > opt.memory) {
          opt.s.pop_front();
          opt.y.pop_front();
        }
      }
      params = trial;
      opt.fallback = false;
      res.accepted = true;
      res.loss = ft;
      res.step = step;
      return res;
    }
    step *= 0.5;
  }
  opt.s.clear();
  opt.y.clear();
  opt.fallback = true;
  return res;
}

std::vector<double> lu_solve(const Matrix& A, std::span<const double> b) {
  const Eigen::Index n = static_cast<Eigen::Index>(A.rows());
  if (A.cols() != A.rows() || b.size() != A.rows()) fail(ErrorKind::InvalidArgument, "lu_solve: size mismatch");
  Eigen::MatrixXd a(n, n);
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i) = b[i];
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = A(i, j);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) fail(ErrorKind::SingularSystem, "lu_solve: matrix is singular");
  const Eigen::VectorXd x = lu.solve(r);
  std::vector<double> out(x.data(), x.data() + n);
  for (double v : out)
    if (!std::isfinite(v)) fail(ErrorKind::Numerical, "lu_solve: non-finite solution");
  return out;
}

}  // namespace tnn
