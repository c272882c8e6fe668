#include "tnn/kernels.hpp"

#if defined(TNN_HAVE_NEON_KERNELS)

#include <arm_neon.h>

namespace tnn::kernels::neon {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a[i * lda + kk];
      const float64x2_t va = vdupq_n_f64(aik);
      const double* brow = b + kk * ldb;
      std::size_t j = 0;
      for (; j + 2 <= n; j += 2)
        vst1q_f64(crow + j, vaddq_f64(vld1q_f64(crow + j), vmulq_f64(va, vld1q_f64(brow + j))));
      for (; j < n; ++j) crow[j] += aik * brow[j];
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
      const float64x2_t vt = vdupq_n_f64(t);
      double* crow = c + i * ldc;
      std::size_t j = 0;
      for (; j + 2 <= n; j += 2)
        vst1q_f64(crow + j, vaddq_f64(vld1q_f64(crow + j), vmulq_f64(vt, vld1q_f64(brow + j))));
      for (; j < n; ++j) crow[j] += t * brow[j];
    }
  }
}

void gram2(std::size_t rows, const double* l, std::size_t ldl, std::size_t pl, const double* r,
           std::size_t ldr, std::size_t pr, const double* w, double* hi, double* lo,
           std::size_t ldg) {
  for (std::size_t j = 0; j < pl; ++j) {
    std::size_t k = 0;
    for (; k + 2 <= pr; k += 2) {
      float64x2_t s = vdupq_n_f64(0.0);
      float64x2_t e = vdupq_n_f64(0.0);
      for (std::size_t n = 0; n < rows; ++n) {
        const float64x2_t wn = vdupq_n_f64(w[n]);
        const float64x2_t lj = vdupq_n_f64(l[n * ldl + j]);
        const float64x2_t va = vmulq_f64(wn, lj);
        const float64x2_t ea = vfmaq_f64(vnegq_f64(va), wn, lj);
        const float64x2_t rk = vld1q_f64(r + n * ldr + k);
        const float64x2_t p = vmulq_f64(va, rk);
        const float64x2_t ep = vfmaq_f64(vnegq_f64(p), va, rk);
        e = vaddq_f64(e, vaddq_f64(ep, vmulq_f64(ea, rk)));
        const float64x2_t t = vaddq_f64(s, p);
        const float64x2_t z = vsubq_f64(t, s);
        const float64x2_t es = vaddq_f64(vsubq_f64(s, vsubq_f64(t, z)), vsubq_f64(p, z));
        s = t;
        e = vaddq_f64(e, es);
      }
      const float64x2_t h = vaddq_f64(s, e);
      vst1q_f64(hi + j * ldg + k, h);
      vst1q_f64(lo + j * ldg + k, vsubq_f64(e, vsubq_f64(h, s)));
    }
    if (k < pr)
      scalar::gram2(rows, l + j, ldl, 1, r + k, ldr, pr - k, w, hi + j * ldg + k,
                    lo + j * ldg + k, ldg);
  }
}

}  // namespace tnn::kernels::neon

#endif
