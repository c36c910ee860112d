#pragma once

// Adaptive Gauss-Kronrod quadrature for Volterra-type integrals ∫_a^x f(t) dt.
//
// The integral is computed after the substitution t = a + (x - a) s^2, which
// clusters nodes near the lower limit and turns integrable (t - a)^(-1/2)
// endpoint singularities into smooth integrands. All Kronrod nodes are
// interior, so f is never evaluated at a or at x.

#include "veq/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <vector>

namespace veq::quad {

struct IntegrateOptions {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;
  std::size_t max_panels = std::size_t{1} << 14;
};

struct IntegrateResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t panels = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double lo, hi, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// 15-point Kronrod rule with the embedded 7-point Gauss rule (QUADPACK qk15).
template <class G>
Panel kronrod15(G& g, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = g(center);
  double resg = fc * kWg[3];
  double resk = fc * kWgk[7];
  double resabs = std::abs(resk);
  std::array<double, 7> f1{}, f2{};
  for (int j = 0; j < 3; ++j) {
    int jtw = 2 * j + 1;
    double dx = half * kXgk[jtw];
    double a = g(center - dx);
    double b = g(center + dx);
    f1[jtw] = a;
    f2[jtw] = b;
    resg += kWg[j] * (a + b);
    resk += kWgk[jtw] * (a + b);
    resabs += kWgk[jtw] * (std::abs(a) + std::abs(b));
  }
  for (int j = 0; j < 4; ++j) {
    int jtwm1 = 2 * j;
    double dx = half * kXgk[jtwm1];
    double a = g(center - dx);
    double b = g(center + dx);
    f1[jtwm1] = a;
    f2[jtwm1] = b;
    resk += kWgk[jtwm1] * (a + b);
    resabs += kWgk[jtwm1] * (std::abs(a) + std::abs(b));
  }
  const double reskh = resk * 0.5;
  double resasc = kWgk[7] * std::abs(fc - reskh);
  for (int j = 0; j < 7; ++j)
    resasc += kWgk[j] * (std::abs(f1[j] - reskh) + std::abs(f2[j] - reskh));
  const double result = resk * half;
  resasc *= std::abs(half);
  resabs *= std::abs(half);
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  return {lo, hi, result, err};
}

}  // namespace detail

/// Adaptive integration of g over [lo, hi] without substitution.
template <class G>
IntegrateResult integrate_plain(G&& g, double lo, double hi, const IntegrateOptions& opt = {}) {
  IntegrateResult out;
  if (lo == hi) return out;
  std::priority_queue<detail::Panel> heap;
  detail::Panel first = detail::kronrod15(g, lo, hi);
  if (!std::isfinite(first.value)) throw DomainError("integrand is not finite on the integration range");
  heap.push(first);
  double total = first.value;
  double total_err = first.error;
  const double eps = std::numeric_limits<double>::epsilon();
  std::size_t panels = 1;
  auto converged = [&] {
    double target = std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
    return total_err <= target || total_err <= 64.0 * eps * std::abs(total);
  };
  while (!converged()) {
    if (panels >= opt.max_panels) {
      throw QuadratureError("adaptive quadrature did not converge (estimated error " +
                            std::to_string(total_err) + " after " + std::to_string(panels) +
                            " panels)");
    }
    detail::Panel worst = heap.top();
    heap.pop();
    double mid = 0.5 * (worst.lo + worst.hi);
    if (mid <= std::min(worst.lo, worst.hi) || mid >= std::max(worst.lo, worst.hi)) {
      // Panel can no longer be split in double precision; accept its estimate.
      total_err -= worst.error;
      worst.error = 0.0;
      heap.push(worst);
      continue;
    }
    detail::Panel left = detail::kronrod15(g, worst.lo, mid);
    detail::Panel right = detail::kronrod15(g, mid, worst.hi);
    // Refinement only reaches non-finite values by closing in on a
    // non-integrable singularity.
    if (!std::isfinite(left.value) || !std::isfinite(right.value))
      throw QuadratureError("integral appears to diverge near " + std::to_string(mid));
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed accumulated cancellation from the running updates.
  double sum = 0.0;
  double err = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = sum;
  out.error = err;
  out.panels = panels;
  return out;
}

/// ∫_a^x f(t) dt using the graded substitution t = a + (x - a) s^2.
template <class F>
IntegrateResult integrate_detailed(F&& f, double a, double x, const IntegrateOptions& opt = {}) {
  if (a == x) return {};
  const double span = x - a;
  auto g = [&](double s) { return f(a + span * s * s) * 2.0 * span * s; };
  return integrate_plain(g, 0.0, 1.0, opt);
}

template <class F>
double integrate(F&& f, double a, double x, double tol = 1e-10) {
  IntegrateOptions opt;
  opt.abs_tol = tol;
  return integrate_detailed(std::forward<F>(f), a, x, opt).value;
}

}  // namespace veq::quad
