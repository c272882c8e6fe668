#include "tnn/mlp.hpp"

#include <cmath>

#include "tnn/error.hpp"
#include "tnn/kernels.hpp"

namespace tnn {
namespace {

// Offset of layer l (1-based over widths) in the flat parameter vector.
std::vector<std::size_t> layer_offsets(const std::vector<int>& w) {
  std::vector<std::size_t> off(w.size(), 0);
  for (std::size_t l = 1; l + 1 < w.size(); ++l)
    off[l + 1] = off[l] + static_cast<std::size_t>(w[l]) * w[l - 1] + w[l];
  return off;
}

}  // namespace

void mlp_forward(const Arch& arch, std::span<const double> params, std::span<const double> x,
                 MlpCache& cache, Matrix& out) {
  if (params.size() != arch.param_count())
    fail(ErrorKind::InvalidArgument, "mlp_forward: parameter vector length does not match arch");
  const std::vector<int> w = arch.widths();
  const std::vector<std::size_t> off = layer_offsets(w);
  const std::size_t n = x.size();
  const std::size_t layers = w.size() - 1;
  const std::size_t hidden = layers - 1;
  cache.rows = n;
  cache.x.assign(x.begin(), x.end());
  cache.pre.resize(hidden);
  cache.post.resize(hidden);
  cache.sin_v.resize(hidden);
  cache.cos_v.resize(hidden);
  cache.wt.resize(layers);

  const Matrix* prev = nullptr;
  for (std::size_t l = 1; l <= layers; ++l) {
    const std::size_t in = w[l - 1];
    const std::size_t width = w[l];
    const double* W = params.data() + off[l];
    const double* b = W + width * in;
    const bool last = l == layers;
    Matrix& z = last ? out : cache.pre[l - 1];
    z.resize(3 * n, width);
    if (l == 1) {
      // affine in the scalar input: d1 = W, d2 = 0
      for (std::size_t r = 0; r < n; ++r) {
        double* zv = z.data() + r * width;
        double* z1 = z.data() + (n + r) * width;
        for (std::size_t j = 0; j < width; ++j) {
          zv[j] = W[j] * x[r] + b[j];
          z1[j] = W[j];
        }
      }
    } else {
      Matrix& wt = cache.wt[l - 1];
      wt.resize(in, width);
      for (std::size_t j = 0; j < width; ++j)
        for (std::size_t k = 0; k < in; ++k) wt(k, j) = W[j * in + k];
      kernels::gemm_nn(3 * n, width, in, prev->data(), in, wt.data(), width, z.data(), width, false);
      for (std::size_t r = 0; r < n; ++r) {
        double* zv = z.data() + r * width;
        for (std::size_t j = 0; j < width; ++j) zv[j] += b[j];
      }
    }
    if (last) break;
    Matrix& a = cache.post[l - 1];
    Matrix& sv = cache.sin_v[l - 1];
    Matrix& cv = cache.cos_v[l - 1];
    a.resize(3 * n, width);
    sv.resize(n, width);
    cv.resize(n, width);
    for (std::size_t r = 0; r < n; ++r) {
      const double* zv = z.data() + r * width;
      const double* z1 = z.data() + (n + r) * width;
      const double* z2 = z.data() + (2 * n + r) * width;
      double* av = a.data() + r * width;
      double* a1 = a.data() + (n + r) * width;
      double* a2 = a.data() + (2 * n + r) * width;
      double* s = sv.data() + r * width;
      double* c = cv.data() + r * width;
      for (std::size_t j = 0; j < width; ++j) {
        s[j] = std::sin(zv[j]);
        c[j] = std::cos(zv[j]);
        av[j] = s[j];
        a1[j] = c[j] * z1[j];
        a2[j] = c[j] * z2[j] - s[j] * (z1[j] * z1[j]);
      }
    }
    prev = &a;
  }
}

void mlp_backward(const Arch& arch, std::span<const double> params, const MlpCache& cache,
                  const Matrix& out_bar, std::span<double> grad) {
  const std::vector<int> w = arch.widths();
  const std::vector<std::size_t> off = layer_offsets(w);
  const std::size_t n = cache.rows;
  const std::size_t layers = w.size() - 1;

  Matrix zbar = out_bar;  // adjoint of the current layer's pre-activation
  Matrix abar;
  for (std::size_t l = layers; l >= 1; --l) {
    const std::size_t in = w[l - 1];
    const std::size_t width = w[l];
    const double* W = params.data() + off[l];
    double* gW = grad.data() + off[l];
    double* gb = gW + width * in;
    for (std::size_t r = 0; r < n; ++r) {
      const double* zv = zbar.data() + r * width;
      for (std::size_t j = 0; j < width; ++j) gb[j] += zv[j];
    }
    if (l == 1) {
      for (std::size_t r = 0; r < n; ++r) {
        const double* zv = zbar.data() + r * width;
        const double* z1 = zbar.data() + (n + r) * width;
        for (std::size_t j = 0; j < width; ++j) gW[j] += zv[j] * cache.x[r] + z1[j];
      }
      break;
    }
    const Matrix& a = cache.post[l - 2];
    // dW += zbar^T a over all 3N rows
    kernels::gemm_tn(width, in, 3 * n, zbar.data(), width, a.data(), in, nullptr, gW, in);
    abar.resize(3 * n, in);
    kernels::gemm_nn(3 * n, in, width, zbar.data(), width, W, in, abar.data(), in, false);

    // through the sine of layer l-1
    const Matrix& z = cache.pre[l - 2];
    const Matrix& sv = cache.sin_v[l - 2];
    const Matrix& cv = cache.cos_v[l - 2];
    Matrix next(3 * n, in);
    for (std::size_t r = 0; r < n; ++r) {
      const double* b0 = abar.data() + r * in;
      const double* b1 = abar.data() + (n + r) * in;
      const double* b2 = abar.data() + (2 * n + r) * in;
      const double* z1 = z.data() + (n + r) * in;
      const double* z2 = z.data() + (2 * n + r) * in;
      const double* s = sv.data() + r * in;
      const double* c = cv.data() + r * in;
      double* o0 = next.data() + r * in;
      double* o1 = next.data() + (n + r) * in;
      double* o2 = next.data() + (2 * n + r) * in;
      for (std::size_t j = 0; j < in; ++j) {
        o0[j] = b0[j] * c[j] - b1[j] * s[j] * z1[j] - b2[j] * (s[j] * z2[j] + c[j] * z1[j] * z1[j]);
        o1[j] = b1[j] * c[j] - 2.0 * b2[j] * s[j] * z1[j];
        o2[j] = b2[j] * c[j];
      }
    }
    zbar = std::move(next);
  }
}

}  // namespace tnn
