#pragma once

// The rank-p tensor neural network ansatz
//   Psi(x) = sum_j c_j prod_i phi_ij(x_i)
// with one sine subnetwork R -> R^p per dimension. On bounded dimensions the
// factors may carry the mask (x - a)(b - x); on the whole line they always carry
// the envelope exp(-x^2 / 2). Columns are normalized in the quadrature L2 norm.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tnn/autodiff.hpp"
#include "tnn/matrix.hpp"
#include "tnn/mlp.hpp"
#include "tnn/quadrature.hpp"

namespace tnn {

enum class DimKind { Interval, Line };

struct DimDomain {
  DimKind kind = DimKind::Interval;
  double a = 0.0;
  double b = 1.0;

  bool bounded() const noexcept { return kind == DimKind::Interval; }
  friend bool operator==(const DimDomain&, const DimDomain&) = default;
};

struct TnnState {
  int d = 0;
  int p = 0;
  Arch arch;  // arch.outputs == p
  std::vector<DimDomain> domain;
  bool mask = false;
  std::vector<std::vector<double>> theta;  // one flat parameter vector per dimension
  std::vector<double> c;

  /// Uniform weights in +-sqrt(1/fan_in) drawn layer by layer, dimension by
  /// dimension; c = 1.
  static TnnState init(int d, int p, std::vector<int> hidden, std::vector<DimDomain> domain,
                       bool mask, std::mt19937_64& rng);

  std::size_t param_count() const;
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);
};

/// Uniform double in [lo, hi) from the top 53 bits; identical on every platform.
double uniform(std::mt19937_64& rng, double lo, double hi);

/// Normalized factor values at the grid rows of one dimension. Bounded
/// dimensions carry two extra rows after the N quadrature nodes: the values at
/// a and at b, used for face integrals.
struct DimTable {
  std::size_t n = 0;     // quadrature nodes
  std::size_t rows = 0;  // n, or n + 2 when bounded
  Matrix val;            // rows x p
  Matrix d1;
  Matrix d2;
  std::vector<double> norm;  // p quadrature norms before normalization
  std::vector<double> x;     // row abscissae
  // Backward-pass intermediates.
  MlpCache cache;
  Matrix raw;  // masked, unnormalized (3 rows blocks)
  std::vector<double> h0, h1, h2;

  const Matrix& channel(int ch) const { return ch == 0 ? val : ch == 1 ? d1 : d2; }
};

struct EvalTables {
  std::vector<DimTable> dims;
};

/// Adjoints of one DimTable's three channels.
struct TableAdjoint {
  Matrix val, d1, d2;
  Matrix& channel(int ch) { return ch == 0 ? val : ch == 1 ? d1 : d2; }
  void reset(std::size_t rows, std::size_t p) {
    val.resize(rows, p);
    d1.resize(rows, p);
    d2.resize(rows, p);
  }
};

/// Mask or envelope multiplier and its first two derivatives at x.
void multiplier(const DimDomain& dom, bool mask, double x, double& h0, double& h1, double& h2);

/// Runs every subnetwork over its grid, applies the mask and normalizes.
/// A column norm below 1e-12 raises a degenerate-basis error.
void eval_tables(const TnnState& state, std::span<const QuadGrid> grids, EvalTables& tables,
                 int threads = 1);

/// Pulls table adjoints back to per-dimension parameter gradients (accumulated).
void tables_backward(const TnnState& state, std::span<const QuadGrid> grids,
                     const EvalTables& tables, std::span<const TableAdjoint> bar,
                     std::vector<std::vector<double>>& grad, int threads = 1);

/// Pointwise Psi(x) using the normalization of the given tables.
double value_at(const TnnState& state, const EvalTables& tables, std::span<const double> x);
/// Same, building the normalization from the grids first.
double value_at(const TnnState& state, std::span<const QuadGrid> grids, std::span<const double> x);

/// Normalized factor jets phi_ij at a single point, by the scalar reference path.
std::vector<Jet2<double>> factor_jets(const TnnState& state, const EvalTables& tables, int i,
                                      double x);

}  // namespace tnn
