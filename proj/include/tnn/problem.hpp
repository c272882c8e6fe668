#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tnn/assembly.hpp"
#include "tnn/expr.hpp"
#include "tnn/quadrature.hpp"
#include "tnn/tnn.hpp"

namespace tnn {

enum class ProblemKind { HomoDirichlet, NonhomoDirichlet, Neumann, Eigen };

const char* to_string(ProblemKind kind) noexcept;
/// "homo-dirichlet", "nonhomo-dirichlet", "neumann", "eigen".
std::optional<ProblemKind> parse_kind(const std::string& s);

struct GridSpec {
  int subintervals = 20;
  int points = 16;
  int hermite = 200;
};

struct NetworkSpec {
  std::vector<int> hidden{50, 50, 50};
  int rank = 20;
};

struct Schedule {
  int pretrain_epochs = 0;
  double pretrain_lr = 0.003;
  int bd_adam_epochs = 0;
  double bd_adam_lr = 0.003;
  int bd_lbfgs_epochs = 0;
  double bd_lbfgs_lr = 1.0;
  int adam_epochs = 0;
  double adam_lr = 0.003;
  int lbfgs_epochs = 0;
  double lbfgs_lr = 1.0;
  bool through_solve = true;  // estimator gradient includes dc/dtheta
};

struct ExactSolution {
  std::optional<SeparableFn> u;
  std::optional<double> lambda;
};

struct ProblemSpec {
  std::string name;
  ProblemKind kind = ProblemKind::HomoDirichlet;
  int d = 0;
  std::vector<DimDomain> domain;
  EllipticOperator op;
  SeparableFn f;                // source (unused for eigen problems)
  SeparableFn g;                // Dirichlet trace (non-homogeneous Dirichlet)
  std::vector<FaceData> flux;   // Neumann data per face
  ExactSolution exact;
  GridSpec grid;
  NetworkSpec net;
  Schedule schedule;

  /// Kind-consistent fields, shapes, schedule and grid sanity, and sampling
  /// validation of every expression on its interval. Throws Validation errors
  /// naming the offending field.
  void validate() const;
  std::vector<QuadGrid> grids() const;
  /// Homogeneous Dirichlet conditions are built into the ansatz by the mask.
  bool masked() const noexcept {
    return kind == ProblemKind::HomoDirichlet || kind == ProblemKind::NonhomoDirichlet ||
           kind == ProblemKind::Eigen;
  }
};

}  // namespace tnn
