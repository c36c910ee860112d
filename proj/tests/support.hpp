#pragma once

// Random generators and fixtures shared by the test binaries.

#include "veq/coef.hpp"
#include "veq/ir.hpp"
#include "veq/shuffle.hpp"

#include <random>
#include <string>
#include <vector>

namespace veq::testing {

using coef::CoefFn;
using coef::CoefPoly;
using coef::VarMonomial;
using coef::VolterraOpSpec;

inline CoefFn X() { return CoefFn::x(); }

inline VolterraOpSpec make_op(const std::string& name, const Scalar& a, CoefFn k, CoefFn h) {
  return {name, a, std::move(k), std::move(h)};
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
  bool coin() { return gen() % 2 == 0; }
  long small_nonzero() {
    long v = static_cast<long>(below(5)) + 1;
    return coin() ? v : -v;
  }
};

/// Coefficient functions that stay smooth and finite on (0, 4].
inline std::vector<CoefFn> coef_pool() {
  CoefFn x = X();
  return {CoefFn(1), x, x * x + 1, CoefFn::exp(-x), CoefFn::cos(x), x * CoefFn::exp(x)};
}

struct RandomSpec {
  std::vector<std::string> ops = {"P", "Q"};
  std::vector<std::string> unknowns = {"y", "z"};
  int max_depth = 3;
  int max_width = 3;
  /// Every bracket payload contains an unknown (the free relative algebra).
  bool payload_unknowns = true;
};

inline VarMonomial random_vars(Rng& r, const RandomSpec& s, bool nonempty) {
  VarMonomial m;
  for (const auto& u : s.unknowns)
    if (r.below(3) == 0) m = m * VarMonomial::var(u, Scalar(long(1 + r.below(2))));
  if (nonempty && m.empty()) m = VarMonomial::var(s.unknowns[r.below(s.unknowns.size())]);
  return m;
}

inline ir::OperatedExpr random_operated(Rng& r, const RandomSpec& s, int depth, bool need_unknown,
                                        const ir::Context& ctx = {}) {
  auto pool = coef_pool();
  ir::OperatedExpr e;
  // Nested payloads stay narrow; brackets distribute over sums, so wide
  // payloads multiply the size of the expansion.
  std::size_t max_width = depth == s.max_depth ? s.max_width : 2;
  std::size_t width = 1 + r.below(max_width);
  for (std::size_t i = 0; i < width; ++i) {
    std::size_t nb = depth > 0 ? r.below(depth == s.max_depth ? 3 : 2) : 0;
    bool vars_needed = need_unknown && nb == 0;
    ir::OperatedExpr term(CoefPoly(pool[r.below(pool.size())] * r.small_nonzero(), random_vars(r, s, vars_needed)));
    for (std::size_t b = 0; b < nb; ++b) {
      auto payload = random_operated(r, s, depth - 1, s.payload_unknowns, ctx);
      term = term * ir::bracket(s.ops[r.below(s.ops.size())], payload, ctx);
    }
    e = e + term;
  }
  return e;
}

inline shuffle::TensorExpr random_tensor(Rng& r, const RandomSpec& s, std::size_t max_words, std::size_t max_len) {
  auto pool = coef_pool();
  std::vector<shuffle::TensorWord> ws;
  std::size_t n = 1 + r.below(max_words);
  for (std::size_t i = 0; i < n; ++i) {
    shuffle::TensorWord w;
    w.head = CoefPoly(pool[r.below(pool.size())] * r.small_nonzero(), random_vars(r, s, false));
    if (r.coin()) w.head = w.head + CoefPoly(pool[r.below(pool.size())], random_vars(r, s, true));
    std::size_t len = r.below(max_len + 1);
    for (std::size_t k = 0; k < len; ++k)
      w.tail.push_back({s.ops[r.below(s.ops.size())], CoefPoly(pool[r.below(pool.size())], random_vars(r, s, true))});
    ws.push_back(std::move(w));
  }
  return shuffle::TensorExpr::from_words(std::move(ws));
}

}  // namespace veq::testing
