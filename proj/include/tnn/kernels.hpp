#pragma once

// Data-parallel inner loops of the solver: the dense products of the batched
// subnetwork passes and the weighted one-dimensional Gram matrices behind every
// separable integral. Each kernel has a scalar reference and SIMD variants
// (AVX2 on x86-64, NEON on aarch64) chosen at runtime. Variants perform the
// same rounding sequence as the reference, so results agree bit for bit.

#include <cstddef>

namespace tnn::kernels {

enum class Isa { Scalar, Avx2, Neon };

const char* to_string(Isa isa) noexcept;

/// Best instruction set supported by this CPU and compiled in.
Isa detected_isa() noexcept;
/// Instruction set used by the dispatching entry points below.
Isa active_isa() noexcept;
/// Pin dispatch to the scalar reference (determinism debugging, tests).
void force_scalar(bool on) noexcept;

/// C[m x n] = (accumulate ? C : 0) + A[m x k] * B[k x n]. Row-major with leading
/// dimensions; each C element accumulates over k in ascending order.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

/// C[m x n] += A^T diag(scale) B with A[k x m], B[k x n]. scale may be null.
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, const double* scale, double* c, std::size_t ldc);

/// Weighted Gram matrix G[j][k] = sum_n w[n] * L[n][j] * R[n][k] evaluated with
/// error-free transformations. The result is returned unevaluated as hi + lo,
/// accurate well beyond double precision, so long separable expansions can be
/// summed without cancellation.
void gram2(std::size_t rows, const double* l, std::size_t ldl, std::size_t pl, const double* r,
           std::size_t ldr, std::size_t pr, const double* w, double* hi, double* lo,
           std::size_t ldg);

namespace scalar {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, const double* scale, double* c, std::size_t ldc);
void gram2(std::size_t rows, const double* l, std::size_t ldl, std::size_t pl, const double* r,
           std::size_t ldr, std::size_t pr, const double* w, double* hi, double* lo,
           std::size_t ldg);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define TNN_HAVE_AVX2_KERNELS 1
namespace avx2 {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, const double* scale, double* c, std::size_t ldc);
void gram2(std::size_t rows, const double* l, std::size_t ldl, std::size_t pl, const double* r,
           std::size_t ldr, std::size_t pr, const double* w, double* hi, double* lo,
           std::size_t ldg);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define TNN_HAVE_NEON_KERNELS 1
namespace neon {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, const double* scale, double* c, std::size_t ldc);
void gram2(std::size_t rows, const double* l, std::size_t ldl, std::size_t pl, const double* r,
           std::size_t ldr, std::size_t pr, const double* w, double* hi, double* lo,
           std::size_t ldg);
}  // namespace neon
#endif

}  // namespace tnn::kernels
