#include "tnn/kernels.hpp"

#if defined(TNN_HAVE_AVX2_KERNELS)

#include <immintrin.h>

#include <cmath>

namespace tnn::kernels::avx2 {

__attribute__((target("avx2,fma"))) void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
                                                 const double* a, std::size_t lda,
                                                 const double* b, std::size_t ldb, double* c,
                                                 std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a[i * lda + kk];
      const __m256d va = _mm256_set1_pd(aik);
      const double* brow = b + kk * ldb;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d vc = _mm256_loadu_pd(crow + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(va, _mm256_loadu_pd(brow + j)));
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

__attribute__((target("avx2,fma"))) void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
                                                 const double* a, std::size_t lda,
                                                 const double* b, std::size_t ldb,
                                                 const double* scale, double* c,
                                                 std::size_t ldc) {
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = a + kk * lda;
    const double* brow = b + kk * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const double t = scale ? scale[kk] * arow[i] : arow[i];
      const __m256d vt = _mm256_set1_pd(t);
      double* crow = c + i * ldc;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d vc = _mm256_loadu_pd(crow + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(vt, _mm256_loadu_pd(brow + j)));
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) crow[j] += t * brow[j];
    }
  }
}

__attribute__((target("avx2,fma"))) void gram2(std::size_t rows, const double* l,
                                               std::size_t ldl, std::size_t pl, const double* r,
                                               std::size_t ldr, std::size_t pr, const double* w,
                                               double* hi, double* lo, std::size_t ldg) {
  for (std::size_t j = 0; j < pl; ++j) {
    std::size_t k = 0;
    for (; k + 4 <= pr; k += 4) {
      __m256d s = _mm256_setzero_pd();
      __m256d e = _mm256_setzero_pd();
      for (std::size_t n = 0; n < rows; ++n) {
        const __m256d wn = _mm256_set1_pd(w[n]);
        const __m256d lj = _mm256_set1_pd(l[n * ldl + j]);
        const __m256d va = _mm256_mul_pd(wn, lj);
        const __m256d ea = _mm256_fmsub_pd(wn, lj, va);
        const __m256d rk = _mm256_loadu_pd(r + n * ldr + k);
        const __m256d p = _mm256_mul_pd(va, rk);
        const __m256d ep = _mm256_fmsub_pd(va, rk, p);
        const __m256d t1 = _mm256_mul_pd(ea, rk);
        e = _mm256_add_pd(e, _mm256_add_pd(ep, t1));
        const __m256d t = _mm256_add_pd(s, p);
        const __m256d z = _mm256_sub_pd(t, s);
        const __m256d es =
            _mm256_add_pd(_mm256_sub_pd(s, _mm256_sub_pd(t, z)), _mm256_sub_pd(p, z));
        s = t;
        e = _mm256_add_pd(e, es);
      }
      const __m256d h = _mm256_add_pd(s, e);
      _mm256_storeu_pd(hi + j * ldg + k, h);
      _mm256_storeu_pd(lo + j * ldg + k, _mm256_sub_pd(e, _mm256_sub_pd(h, s)));
    }
    if (k < pr) {
      // Column tail through the reference path, identical operation sequence.
      scalar::gram2(rows, l + j, ldl, 1, r + k, ldr, pr - k, w, hi + j * ldg + k,
                    lo + j * ldg + k, ldg);
    }
  }
}

}  // namespace tnn::kernels::avx2

#endif
