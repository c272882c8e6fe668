#pragma once

// Brute-force references for the separable machinery: tensor-grid assembly
// and loss evaluation on small d, quadrature exactness sweeps, and
// finite-difference checks of every loss gradient.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tnn/problem.hpp"
#include "tnn/solver.hpp"

namespace tnn::oracle {

struct Assembled {
  Matrix A;
  Matrix M;
  std::vector<double> B;  // (f, phi_m), plus the Neumann face load when present
};

/// Stiffness, mass and load by summing over every point of the tensor grid
/// (and face grid), with basis values from the scalar jet path.
Assembled full_grid_assembly(const ProblemSpec& p, const TnnState& st, const EvalTables& tables,
                             const std::vector<QuadGrid>& grids);

/// Squared estimator by pointwise residuals on the tensor grid. `weighted`
/// selects the 1/b weight; lambda is used for eigen problems; `lift`, when
/// given, is added to the solution (its own tables).
double full_grid_estimator(const ProblemSpec& p, const TnnState& st, const EvalTables& tables,
                           const std::vector<QuadGrid>& grids, bool weighted, double lambda,
                           const TnnState* lift = nullptr, const EvalTables* lift_tables = nullptr);

/// Squared boundary misfit sum over faces of ||Psi - g||^2.
double full_grid_boundary_fit(const ProblemSpec& p, const TnnState& st, const EvalTables& tables,
                              const std::vector<QuadGrid>& grids);

double max_rel_diff(const Matrix& a, const Matrix& b);
double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b);

struct QuadratureReport {
  double legendre_max_abs = 0.0;  // 16-point rule, monomials of degree <= 31 on [-1, 1]
  double hermite_max_rel = 0.0;   // 200 points, moments int x^m exp(-x^2), m <= 5
};
QuadratureReport quadrature_report();

struct GradientCheck {
  std::string name;
  double max_rel = 0.0;    // five-point central differences
  double max_rel_3 = 0.0;  // three-point central differences, same h
  double loss = 0.0;
};

/// Central differences of the loss, with c (and lambda) re-solved at every
/// evaluation when the loss is an estimator with the gradient through the
/// solve, against the reverse-mode gradient.
GradientCheck check_gradient(const ProblemSpec& p, LossKind kind, std::uint64_t seed, int rank,
                             const std::vector<int>& hidden, double h, const std::string& name);

/// Small problems covering every loss: Dirichlet with b > 0 (weighted), b = 0,
/// non-homogeneous Dirichlet, Neumann, Laplace and harmonic eigen, boundary fit
/// and Rayleigh, all at d = 2.
std::vector<GradientCheck> gradient_suite(double h = 1e-4);

struct AssemblyCheck {
  std::string name;
  double stiffness = 0.0;  // max relative difference per quantity
  double mass = 0.0;
  double load = 0.0;
  double loss = 0.0;       // squared estimator, or squared boundary fit

  double worst() const { return std::max({stiffness, mass, load, loss}); }
};

/// Factorized assembly and squared losses against the full-grid oracle at
/// d in {2, 3}, p in {1, ..., 5}, random networks: every registry family, a
/// full operator matrix and the boundary fit.
std::vector<AssemblyCheck> assembly_suite();

/// Dirichlet problem on (-1,1)^d with b = pi^2 and a known exact solution.
ProblemSpec reaction_dirichlet(int d);

}  // namespace tnn::oracle
