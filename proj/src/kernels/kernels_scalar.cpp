#include "tnn/kernels.hpp"

#include <cmath>

namespace tnn::kernels::scalar {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a[i * lda + kk];
      const double* brow = b + kk * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, const double* scale, double* c, std::size_t ldc) {
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = a + kk * lda;
    const double* brow = b + kk * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const double t = scale ? scale[kk] * arow[i] : arow[i];
      double* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += t * brow[j];
    }
  }
}

void gram2(std::size_t rows, const double* l, std::size_t ldl, std::size_t pl, const double* r,
           std::size_t ldr, std::size_t pr, const double* w, double* hi, double* lo,
           std::size_t ldg) {
  for (std::size_t j = 0; j < pl; ++j) {
    for (std::size_t k = 0; k < pr; ++k) {
      double s = 0.0;
      double e = 0.0;
      for (std::size_t n = 0; n < rows; ++n) {
        const double wn = w[n];
        const double lj = l[n * ldl + j];
        const double a = wn * lj;
        const double ea = std::fma(wn, lj, -a);
        const double rk = r[n * ldr + k];
        const double p = a * rk;
        const double ep = std::fma(a, rk, -p);
        const double t1 = ea * rk;
        e = e + (ep + t1);
        const double t = s + p;
        const double z = t - s;
        const double es = (s - (t - z)) + (p - z);
        s = t;
        e = e + es;
      }
      const double h = s + e;
      hi[j * ldg + k] = h;
      lo[j * ldg + k] = e - (h - s);
    }
  }
}

}  // namespace tnn::kernels::scalar
