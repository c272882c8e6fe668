#include "tnn/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tnn/error.hpp"

namespace tnn {
namespace {

constexpr int kMaxNewton = 100;

// P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

// Normalized Hermite functions psi_n(x), psi_{n-1}(x).
void hermite_functions(int n, double x, double& pn, double& pn1) {
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  for (int k = 0; k < n; ++k) {
    const double next =
        x * std::sqrt(2.0 / (k + 1.0)) * cur - std::sqrt(static_cast<double>(k) / (k + 1.0)) * prev;
    prev = cur;
    cur = next;
  }
  pn = cur;
  pn1 = prev;
}

}  // namespace

Rule1D gauss_legendre(int n) {
  if (n < 1 || n > 64)
    fail(ErrorKind::InvalidArgument, "gauss_legendre: n must be in [1, 64], got " + std::to_string(n));
  Rule1D rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 1; i <= half; ++i) {
    double x = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
    double p = 0.0;
    double dp = 0.0;
    for (int it = 0; it < kMaxNewton; ++it) {
      legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, x, p, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Largest root first; mirror into ascending order.
    rule.nodes[n - i] = x;
    rule.nodes[i - 1] = -x;
    rule.weights[n - i] = w;
    rule.weights[i - 1] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadGrid composite_grid(double a, double b, int n_sub, int n_pts) {
  if (!(a < b)) fail(ErrorKind::InvalidArgument, "composite_grid: need a < b");
  if (n_sub < 1) fail(ErrorKind::InvalidArgument, "composite_grid: n_sub must be positive");
  const Rule1D rule = gauss_legendre(n_pts);
  QuadGrid g;
  g.kind = GridKind::BoundedComposite;
  g.a = a;
  g.b = b;
  g.nodes.reserve(static_cast<std::size_t>(n_sub) * n_pts);
  g.weights.reserve(g.nodes.capacity());
  const double h = (b - a) / n_sub;
  for (int s = 0; s < n_sub; ++s) {
    const double lo = a + s * h;
    const double hi = (s + 1 == n_sub) ? b : a + (s + 1) * h;
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    for (int k = 0; k < n_pts; ++k) {
      g.nodes.push_back(mid + half * rule.nodes[k]);
      g.weights.push_back(half * rule.weights[k]);
    }
  }
  return g;
}

QuadGrid gauss_hermite(int n) {
  if (n < 1 || n > 300)
    fail(ErrorKind::InvalidArgument, "gauss_hermite: n must be in [1, 300], got " + std::to_string(n));
  std::vector<double> roots((n + 1) / 2);
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    // Asymptotic starting values for the roots in descending order.
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * roots[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * roots[1];
    else
      z = 2.0 * z - roots[i - 2];
    for (int it = 0; it < kMaxNewton; ++it) {
      double pn = 0.0;
      double pn1 = 0.0;
      hermite_functions(n, z, pn, pn1);
      // psi_n' = sqrt(2n) psi_{n-1} - x psi_n
      const double dz = pn / (std::sqrt(2.0 * n) * pn1 - z * pn);
      z -= dz;
      if (std::abs(dz) < 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    roots[i] = z;
  }
  QuadGrid g;
  g.kind = GridKind::HermiteLine;
  g.nodes.assign(n, 0.0);
  g.weights.assign(n, 0.0);
  for (int i = 0; i < half; ++i) {
    const double x = (n % 2 == 1 && i == half - 1) ? 0.0 : roots[i];
    double pn = 0.0;
    double pn1 = 0.0;
    hermite_functions(n, x, pn, pn1);
    const double w = 1.0 / (n * pn1 * pn1);
    g.nodes[i] = -x;
    g.nodes[n - 1 - i] = x;
    g.weights[i] = w;
    g.weights[n - 1 - i] = w;
  }
  return g;
}

double integrate_1d(const QuadGrid& grid, std::span<const double> samples) {
  if (samples.size() != grid.size())
    fail(ErrorKind::InvalidArgument, "integrate_1d: sample count does not match grid");
  double s = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) s += grid.weights[i] * samples[i];
  return s;
}

}  // namespace tnn
