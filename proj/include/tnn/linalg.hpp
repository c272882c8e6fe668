#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "tnn/matrix.hpp"

namespace tnn {

struct SolveInfo {
  double jitter = 0.0;    // relative diagonal shift that was needed (0 when none)
  double residual = 0.0;  // ||A c - B|| / ||B||
};

/// Cholesky factor (lower, row-major) of A + shift I. Returns false on breakdown.
bool cholesky(const Matrix& A, double shift, Matrix& L);

/// Solves A c = B for symmetric positive definite A. On breakdown the diagonal
/// is shifted by tau * trace(A) / p for tau in {1e-14, 1e-12, 1e-10}; the
/// solution is then refined against the unshifted A.
std::vector<double> cholesky_solve(const Matrix& A, std::span<const double> B, SolveInfo* info = nullptr);

struct EigenPair {
  double lambda = 0.0;
  std::vector<double> c;  // c^T M c = 1, first significant component positive
  double jitter = 0.0;
};

/// Smallest eigenpair of A c = lambda M c.
EigenPair smallest_generalized_eigpair(const Matrix& A, const Matrix& M);

/// Dense solve of a general square system by LU with full pivoting.
std::vector<double> lu_solve(const Matrix& A, std::span<const double> b);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. A non-finite gradient leaves everything
/// untouched and returns false.
bool adam_step(AdamState& opt, std::span<double> params, std::span<const double> grad, double lr);

struct LbfgsState {
  int memory = 10;
  std::deque<std::vector<double>> s;
  std::deque<std::vector<double>> y;
  bool fallback = false;  // next step is steepest descent
};

struct LbfgsResult {
  bool accepted = false;
  double loss = 0.0;  // value at the returned parameters
  double step = 0.0;
  int trials = 0;
};

/// Value and gradient of the objective at x.
using LossGrad = std::function<double(std::span<const double> x, std::vector<double>& grad)>;

/// Two-loop direction plus backtracking Armijo search from step lr
/// (c1 = 1e-4, halving, at most 25 trials). f0 and g0 are the value and
/// gradient at params. A pair (s, y) is stored only when s.y > 1e-10 |s||y|.
LbfgsResult lbfgs_step(LbfgsState& opt, std::vector<double>& params, double f0,
                       std::span<const double> g0, const LossGrad& fn, double lr);
/// Same, evaluating f0 and g0 first.
LbfgsResult lbfgs_step(LbfgsState& opt, std::vector<double>& params, const LossGrad& fn, double lr);

}  // namespace tnn
