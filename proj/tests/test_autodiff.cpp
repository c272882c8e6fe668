#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tnn/autodiff.hpp"
#include "tnn/error.hpp"
#include "tnn/mlp.hpp"

using namespace tnn;

namespace {

Jet2<double> random_jet(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return {u(rng), u(rng), u(rng)};
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("jet product and chain rules") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    const Jet2<double> f = random_jet(rng), g = random_jet(rng);
    const Jet2<double> p = f * g;
    CHECK(close(p.v, f.v * g.v, 1e-14));
    CHECK(close(p.d1, f.d1 * g.v + f.v * g.d1, 1e-14));
    CHECK(close(p.d2, f.d2 * g.v + 2 * f.d1 * g.d1 + f.v * g.d2, 1e-14));
    const Jet2<double> s = sin(f);
    CHECK(close(s.d1, std::cos(f.v) * f.d1, 1e-14));
    CHECK(close(s.d2, -std::sin(f.v) * f.d1 * f.d1 + std::cos(f.v) * f.d2, 1e-14));
    const Jet2<double> c = cos(f);
    CHECK(close(c.d2, -std::cos(f.v) * f.d1 * f.d1 - std::sin(f.v) * f.d2, 1e-14));
    const Jet2<double> e = exp(f);
    CHECK(close(e.d2, std::exp(f.v) * (f.d1 * f.d1 + f.d2), 1e-14));
  }
}

TEST_CASE("forward_jet examples") {
  Arch lin{{}, 1};
  const std::vector<double> p{2.0, 1.0};
  auto y = forward_jet<double>(p, lin, 3.0);
  CHECK(y[0].v == 7.0);
  CHECK(y[0].d1 == 2.0);
  CHECK(y[0].d2 == 0.0);

  Arch one{{1}, 1};
  // hidden: w=1, b=0; output: w=1, b=0
  const std::vector<double> q{1.0, 0.0, 1.0, 0.0};
  auto s = forward_jet<double>(q, one, std::numbers::pi / 2);
  CHECK(std::abs(s[0].v - 1.0) < 1e-15);
  CHECK(std::abs(s[0].d1) < 1e-15);
  CHECK(std::abs(s[0].d2 + 1.0) < 1e-15);

  Arch wide{{5, 5}, 3};
  const std::vector<double> zeros(wide.param_count(), 0.0);
  for (const auto& j : forward_jet<double>(zeros, wide, 0.7)) {
    CHECK(j.v == 0.0);
    CHECK(j.d1 == 0.0);
    CHECK(j.d2 == 0.0);
  }
  CHECK_THROWS_AS(forward_jet<double>(std::vector<double>(3), wide, 0.0), Error);
}

TEST_CASE("parameter count") {
  Arch a{{100, 100, 100}, 50};
  CHECK(a.param_count() == 100 * 1 + 100 + 2 * (100 * 100 + 100) + 50 * 100 + 50);
}

TEST_CASE("backward examples") {
  Tape t;
  Var w = t.variable(3.0);
  Var l = w * w;
  std::vector<Var> leaves{w};
  CHECK(backward(t, l, leaves)[0] == 6.0);
  Tape t2;
  Var z = t2.variable(0.0);
  std::vector<Var> lz{z};
  CHECK(backward(t2, sin(z), lz)[0] == 1.0);
  Tape t3;
  Var a = t3.variable(0.0);
  std::vector<Var> la{a};
  CHECK_THROWS_AS(backward(t3, Var(&t3, 0, 0.0) / a, la), Error);
}

TEST_CASE("gradient is linear in the loss") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    std::vector<Var> leaves;
    for (int i = 0; i < 6; ++i) leaves.push_back(t.variable(u(rng)));
    // two random graphs over shared leaves
    auto graph = [&](int salt) {
      Var acc = leaves[salt % 6];
      for (int k = 0; k < 12; ++k) {
        const Var& x = leaves[(salt * 7 + k * 5) % 6];
        switch ((salt + k) % 5) {
          case 0: acc = acc + x * x; break;
          case 1: acc = acc * sin(x); break;
          case 2: acc = acc - exp(0.3 * x); break;
          case 3: acc = acc / (2.0 + cos(x)); break;
          default: acc = sqrt(1.0 + acc * acc) * x; break;
        }
      }
      return acc;
    };
    Var l1 = graph(trial), l2 = graph(trial + 11);
    const double alpha = u(rng), beta = u(rng);
    Var comb = alpha * l1 + beta * l2;
    auto g1 = t.gradient(l1, leaves), g2 = t.gradient(l2, leaves), gc = t.gradient(comb, leaves);
    for (std::size_t i = 0; i < leaves.size(); ++i)
      CHECK(std::abs(gc[i] - (alpha * g1[i] + beta * g2[i])) <= 1e-12 * (1.0 + std::abs(gc[i])));
  }
}

TEST_CASE("fd_check") {
  auto quad = [](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i + 1.0) * x[i] * x[i];
    return s;
  };
  const std::vector<double> x{0.3, -1.2, 2.0};
  const std::vector<double> g{2 * 0.3, 4 * -1.2, 6 * 2.0};
  CHECK(fd_check(quad, x, g, 1e-4).max_rel <= 1e-10);
  CHECK(fd_check(quad, x, g, 1e-4, {}, 1e-3, 4).max_rel <= 1e-10);
  auto zero = [](std::span<const double>) { return 0.0; };
  const std::vector<double> gz(3, 0.0);
  CHECK(fd_check(zero, x, gz, 1e-4).max_rel == 0.0);
  std::vector<double> wrong = g;
  wrong[1] *= 1.01;
  CHECK(fd_check(quad, x, wrong, 1e-4).max_rel > 1e-3);
}

TEST_CASE("batched network pass agrees with jets on the tape") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Arch arch{{7, 5}, 3};
  std::vector<double> params(arch.param_count());
  for (double& p : params) p = u(rng);
  std::vector<double> xs{-0.9, -0.2, 0.1, 0.4, 0.95};

  MlpCache cache;
  Matrix out;
  mlp_forward(arch, params, xs, cache, out);
  const std::size_t n = xs.size();

  // A random linear functional of all three channels.
  Matrix bar(3 * n, 3);
  for (double& b : bar.storage()) b = u(rng);
  std::vector<double> grad(params.size(), 0.0);
  mlp_backward(arch, params, cache, bar, grad);

  Tape tape;
  std::vector<Var> leaves = make_leaves(tape, params);
  std::vector<Var> terms;
  std::vector<double> w;
  for (std::size_t r = 0; r < n; ++r) {
    auto jets = forward_jet<Var>(leaves, arch, xs[r]);
    auto ref = forward_jet<double>(params, arch, xs[r]);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(out(r, j) - ref[j].v) <= 1e-14 * (1 + std::abs(ref[j].v)));
      CHECK(std::abs(out(n + r, j) - ref[j].d1) <= 1e-13 * (1 + std::abs(ref[j].d1)));
      CHECK(std::abs(out(2 * n + r, j) - ref[j].d2) <= 1e-13 * (1 + std::abs(ref[j].d2)));
      terms.push_back(jets[j].v);
      w.push_back(bar(r, j));
      terms.push_back(jets[j].d1);
      w.push_back(bar(n + r, j));
      terms.push_back(jets[j].d2);
      w.push_back(bar(2 * n + r, j));
    }
  }
  const std::vector<double> tg = backward(tape, weighted_sum(terms, w), leaves);
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(std::abs(tg[i] - grad[i]) <= 1e-12 * (1.0 + std::abs(tg[i])));
}
