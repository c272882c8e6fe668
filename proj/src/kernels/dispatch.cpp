#include <atomic>

#include "tnn/kernels.hpp"

namespace tnn::kernels {
namespace {

std::atomic<bool> g_force_scalar{false};

Isa probe() noexcept {
#if defined(TNN_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::Avx2;
#endif
#if defined(TNN_HAVE_NEON_KERNELS)
  return Isa::Neon;
#endif
  return Isa::Scalar;
}

}  // namespace

const char* to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

Isa detected_isa() noexcept {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() noexcept {
  return g_force_scalar.load(std::memory_order_relaxed) ? Isa::Scalar : detected_isa();
}

void force_scalar(bool on) noexcept { g_force_scalar.store(on, std::memory_order_relaxed); }

#define TNN_DISPATCH(fn, ...)                                   \
  switch (active_isa()) {                                       \
    case Isa::Avx2: TNN_AVX2_CALL(fn, __VA_ARGS__);             \
    case Isa::Neon: TNN_NEON_CALL(fn, __VA_ARGS__);             \
    case Isa::Scalar: break;                                    \
  }                                                             \
  return scalar::fn(__VA_ARGS__)

#if defined(TNN_HAVE_AVX2_KERNELS)
#define TNN_AVX2_CALL(fn, ...) return avx2::fn(__VA_ARGS__)
#else
#define TNN_AVX2_CALL(fn, ...) break
#endif
#if defined(TNN_HAVE_NEON_KERNELS)
#define TNN_NEON_CALL(fn, ...) return neon::fn(__VA_ARGS__)
#else
#define TNN_NEON_CALL(fn, ...) break
#endif

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  TNN_DISPATCH(gemm_nn, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, const double* scale, double* c, std::size_t ldc) {
  TNN_DISPATCH(gemm_tn, m, n, k, a, lda, b, ldb, scale, c, ldc);
}

void gram2(std::size_t rows, const double* l, std::size_t ldl, std::size_t pl, const double* r,
           std::size_t ldr, std::size_t pr, const double* w, double* hi, double* lo,
           std::size_t ldg) {
  TNN_DISPATCH(gram2, rows, l, ldl, pl, r, ldr, pr, w, hi, lo, ldg);
}

}  // namespace tnn::kernels
