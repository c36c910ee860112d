// Compiled with -mavx2 (and without -mfma, so no contraction changes rounding).
#include "veq/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace veq::kernels {

#if defined(__AVX2__)

namespace {

void mul3_avx2(const double* a, const double* b, const double* c, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    __m256d vc = _mm256_loadu_pd(c + i);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_mul_pd(va, vb), vc));
  }
  for (; i < n; ++i) out[i] = (a[i] * b[i]) * c[i];
}

inline double interval_scalar(const double* f, double w, std::size_t j) {
  if (j % 2 == 0) return ((5.0 * f[j] + 8.0 * f[j + 1]) - f[j + 2]) * w;
  return ((5.0 * f[j + 1] + 8.0 * f[j]) - f[j - 1]) * w;
}

void interval_integrals_avx2(const double* f, double h, double* out, std::size_t n) {
  const double w = h / 12.0;
  const __m256d five = _mm256_set1_pd(5.0);
  const __m256d eight = _mm256_set1_pd(8.0);
  const __m256d vw = _mm256_set1_pd(w);
  std::size_t j = 0;
  // Lanes start on an even index so the parity pattern is (even, odd, even, odd);
  // the first block needs f[j - 1] and is done in scalar code.
  for (; j < 4 && j < n; ++j) out[j] = interval_scalar(f, w, j);
  for (; j + 5 <= n; j += 4) {
    __m256d fm1 = _mm256_loadu_pd(f + j - 1);
    __m256d f0 = _mm256_loadu_pd(f + j);
    __m256d f1 = _mm256_loadu_pd(f + j + 1);
    __m256d f2 = _mm256_loadu_pd(f + j + 2);
    __m256d fwd = _mm256_mul_pd(
        _mm256_sub_pd(_mm256_add_pd(_mm256_mul_pd(five, f0), _mm256_mul_pd(eight, f1)), f2), vw);
    __m256d bwd = _mm256_mul_pd(
        _mm256_sub_pd(_mm256_add_pd(_mm256_mul_pd(five, f1), _mm256_mul_pd(eight, f0)), fm1), vw);
    _mm256_storeu_pd(out + j, _mm256_blend_pd(fwd, bwd, 0b1010));
  }
  for (; j < n; ++j) out[j] = interval_scalar(f, w, j);
}

}  // namespace

const KernelTable* avx2_kernels_impl() {
  static const KernelTable table{"avx2", mul3_avx2, interval_integrals_avx2};
  return &table;
}

#else

const KernelTable* avx2_kernels_impl() { return nullptr; }

#endif

}  // namespace veq::kernels
