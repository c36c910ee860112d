#pragma once

// Data-parallel inner loops of the grid quadrature. Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2 variant selected at
// runtime. Both variants perform the same floating-point operations in the
// same order, so their results are bit-identical.

#include <cstddef>
#include <span>
#include <string_view>

namespace veq::kernels {

struct KernelTable {
  std::string_view name;
  /// out[i] = a[i] * b[i] * c[i]
  void (*mul3)(const double* a, const double* b, const double* c, double* out, std::size_t n);
  /// Per-interval integrals of a sampled function on a uniform grid with
  /// step h, from the quadratic through three consecutive nodes:
  ///   even j: h/12 (5 f[j] + 8 f[j+1] - f[j+2])
  ///   odd  j: h/12 (-f[j-1] + 8 f[j] + 5 f[j+1])
  /// f has n + 1 entries, out has n entries, n must be even. Pairs of
  /// intervals sum to composite Simpson panels.
  void (*interval_integrals)(const double* f, double h, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();

/// AVX2 table, or nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table used by the library: AVX2 when available unless the environment
/// variable VEQ_SIMD=scalar forces the reference kernels.
const KernelTable& active_kernels();

/// Cumulative integral on a uniform grid: out[0] = 0 and out[j] = ∫_{s_0}^{s_j} f.
/// f and out have n + 1 entries; n must be even and >= 2.
void cumulative_simpson(std::span<const double> f, double h, std::span<double> out,
                        const KernelTable& k = active_kernels());

}  // namespace veq::kernels
