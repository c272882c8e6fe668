#pragma once

// Galerkin matrices and load vectors of the current basis, assembled from the
// per-dimension Gram blocks of a Forms context. Rows index test functions,
// columns trial functions.

#include <vector>

#include "tnn/expr.hpp"
#include "tnn/forms.hpp"
#include "tnn/matrix.hpp"

namespace tnn {

/// -div(A grad u) + b u with a constant symmetric A and separable b.
struct EllipticOperator {
  Matrix A;
  SeparableFn b;  // rank 0 means b = 0
};

/// Data on the face x_dim = a_dim (high = false) or x_dim = b_dim. The factor
/// of g in dimension `dim` is evaluated at that endpoint.
struct FaceData {
  int dim = 0;
  bool high = false;
  SeparableFn g;
};

/// a(phi_n, phi_m) for phi from one basis set.
Matrix assemble_stiffness(Forms& forms, int set, const EllipticOperator& op);
/// a(psi_n, phi_m) with psi from trial_set and phi from test_set.
Matrix assemble_cross_stiffness(Forms& forms, int test_set, int trial_set, const EllipticOperator& op);
/// (phi_n, phi_m).
Matrix assemble_mass(Forms& forms, int set);
/// (f, phi_m).
std::vector<double> assemble_load(Forms& forms, int set, const SeparableFn& f);
/// sum over the listed faces of (g, phi_m) on the face.
std::vector<double> assemble_neumann_load(Forms& forms, int set, const std::vector<FaceData>& faces);
/// (phi_n, phi_m) on the whole boundary, summed over the 2d faces.
Matrix assemble_boundary_mass(Forms& forms, int set, const std::vector<DimDomain>& domain);
/// (g, phi_m) on the whole boundary.
std::vector<double> assemble_boundary_load(Forms& forms, int set, const SeparableFn& g,
                                           const std::vector<DimDomain>& domain);

}  // namespace tnn
