#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "veq/kernels.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

using namespace veq::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(-1e3, 1e3);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar reference kernels") {
  const KernelTable& s = scalar_kernels();
  std::vector<double> a{1, 2, 3}, b{4, 5, 6}, c{7, 8, 9}, out(3);
  s.mul3(a.data(), b.data(), c.data(), out.data(), 3);
  CHECK(out == std::vector<double>{28, 80, 162});

  // The quadratic rule is exact on quadratics: ∫₀ʲ t² with h = 1.
  std::vector<double> f(9), cum(9);
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = double(j * j);
  cumulative_simpson(f, 1.0, cum, s);
  for (std::size_t j = 0; j < f.size(); ++j) CHECK(cum[j] == doctest::Approx(double(j * j * j) / 3.0).epsilon(1e-14));
}

TEST_CASE("cumulative integral converges on smooth data") {
  const KernelTable& s = scalar_kernels();
  double prev = 0.0;
  for (std::size_t n : {16u, 32u, 64u}) {
    std::vector<double> f(n + 1), cum(n + 1);
    double h = 2.0 / double(n);
    for (std::size_t j = 0; j <= n; ++j) f[j] = std::cos(double(j) * h);
    cumulative_simpson(f, h, cum, s);
    double err = 0.0;
    for (std::size_t j = 0; j <= n; ++j) err = std::max(err, std::abs(cum[j] - std::sin(double(j) * h)));
    if (prev > 0.0) CHECK(prev / err > 7.0);
    prev = err;
  }
}

TEST_CASE("AVX2 kernels are bit-identical to the reference") {
  const KernelTable* v = avx2_kernels();
  if (v == nullptr) {
    MESSAGE("AVX2 unavailable; only the reference kernels are exercised");
    return;
  }
  const KernelTable& s = scalar_kernels();
  for (std::size_t n : {2u, 4u, 6u, 8u, 10u, 14u, 16u, 18u, 30u, 64u, 1002u, 4096u}) {
    auto a = noise(n + 1, n), b = noise(n + 1, n + 7), c = noise(n + 1, n + 13);
    std::vector<double> o1(n + 1), o2(n + 1);
    s.mul3(a.data(), b.data(), c.data(), o1.data(), n + 1);
    v->mul3(a.data(), b.data(), c.data(), o2.data(), n + 1);
    CHECK(same_bits(o1, o2));

    std::vector<double> p1(n), p2(n);
    s.interval_integrals(a.data(), 0.37, p1.data(), n);
    v->interval_integrals(a.data(), 0.37, p2.data(), n);
    CHECK(same_bits(p1, p2));

    std::vector<double> c1(n + 1), c2(n + 1);
    cumulative_simpson(a, 1.0 / double(n), c1, s);
    cumulative_simpson(a, 1.0 / double(n), c2, *v);
    CHECK(same_bits(c1, c2));
  }
  // unaligned starts
  auto a = noise(101, 1), b = noise(101, 2), c = noise(101, 3);
  std::vector<double> o1(101), o2(101);
  s.mul3(a.data() + 1, b.data() + 1, c.data() + 1, o1.data() + 1, 99);
  v->mul3(a.data() + 1, b.data() + 1, c.data() + 1, o2.data() + 1, 99);
  CHECK(same_bits(o1, o2));
}

TEST_CASE("active table") {
  const KernelTable& k = active_kernels();
  CHECK((k.name == "scalar" || k.name == "avx2"));
}
