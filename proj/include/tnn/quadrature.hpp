#pragma once

#include <span>
#include <vector>

namespace tnn {

enum class GridKind { BoundedComposite, HermiteLine };

/// Nodes and positive weights of a one-dimensional rule. For hermite-line grids
/// the weights already contain exp(x^2), so integrands are sampled raw.
struct QuadGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
  GridKind kind = GridKind::BoundedComposite;
  double a = 0.0;
  double b = 0.0;

  std::size_t size() const noexcept { return nodes.size(); }
  bool bounded() const noexcept { return kind == GridKind::BoundedComposite; }
};

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1], 1 <= n <= 64.
Rule1D gauss_legendre(int n);

/// n_sub equal panels of (a, b), each carrying an n_pts Gauss-Legendre rule.
QuadGrid composite_grid(double a, double b, int n_sub, int n_pts);

/// n-point Gauss-Hermite rule with modified weights w_i * exp(x_i^2), 1 <= n <= 300.
QuadGrid gauss_hermite(int n);

/// sum_i w_i * samples_i, accumulated in index order.
double integrate_1d(const QuadGrid& grid, std::span<const double> samples);

}  // namespace tnn
