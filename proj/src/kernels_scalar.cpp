#include "veq/kernels.hpp"

#include <cstdlib>
#include <string_view>
#include <vector>

namespace veq::kernels {

namespace {

void mul3_scalar(const double* a, const double* b, const double* c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (a[i] * b[i]) * c[i];
}

void interval_integrals_scalar(const double* f, double h, double* out, std::size_t n) {
  const double w = h / 12.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j % 2 == 0) {
      out[j] = ((5.0 * f[j] + 8.0 * f[j + 1]) - f[j + 2]) * w;
    } else {
      out[j] = ((5.0 * f[j + 1] + 8.0 * f[j]) - f[j - 1]) * w;
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", mul3_scalar, interval_integrals_scalar};
  return table;
}

const KernelTable* avx2_kernels_impl();

const KernelTable* avx2_kernels() {
#if defined(__x86_64__) || defined(_M_X64)
  if (!__builtin_cpu_supports("avx2")) return nullptr;
  return avx2_kernels_impl();
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("VEQ_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &scalar_kernels();
    const KernelTable* simd = avx2_kernels();
    return simd != nullptr ? simd : &scalar_kernels();
  }();
  return *chosen;
}

void cumulative_simpson(std::span<const double> f, double h, std::span<double> out,
                        const KernelTable& k) {
  const std::size_t n = f.size() - 1;
  std::vector<double> pieces(n);
  k.interval_integrals(f.data(), h, pieces.data(), n);
  out[0] = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += pieces[j];
    out[j + 1] = acc;
  }
}

}  // namespace veq::kernels
