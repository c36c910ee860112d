// Acceptance criteria 1-9: one PASS/FAIL line each, exit status 1 if any fails.

#include "support.hpp"
#include "veq/cli.hpp"
#include "veq/dsl.hpp"
#include "veq/quad.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

using namespace veq;
using namespace veq::testing;
using quad::Assignment;
using shuffle::Letter;
using shuffle::TensorExpr;
using shuffle::TensorWord;

namespace {

const std::string kRoot = VEQ_SOURCE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Cli {
  int code;
  std::string out;
};

Cli veq_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str() + err.str()};
}

std::string problem(const std::string& n) { return kRoot + "/problems/" + n + ".veq"; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

VolterraOpSpec op(const std::string& name, long a, CoefFn k, CoefFn h) { return make_op(name, Scalar(a), k, h); }

CoefFn E(const CoefFn& f) { return CoefFn::exp(f); }

/// Every monomial carries at most one bracket, at every nesting level.
bool operator_linear(const ir::OperatedMonomial& m) {
  if (m.brackets.size() > 1) return false;
  for (const auto& b : m.brackets)
    if (!operator_linear(*b.payload)) return false;
  return true;
}

bool operator_linear(const ir::OperatedExpr& e) {
  for (const auto& t : e.terms())
    if (!operator_linear(t.mono)) return false;
  return true;
}

// ---------------------------------------------------------------------------

Outcome c1_rb_counterexample() {
  // K(x,t) = x, a = 0, f = g = 1: P(1)P(1) = x⁴ while P(P(1)) + P(P(1)) = 2x⁴/3.
  coef::OpTable ops({op("P", 0, X(), CoefFn(1))});
  ir::Context formal{nullptr, nullptr, 8};
  auto one = ir::OperatedExpr(CoefFn(1));
  auto p1 = ir::bracket("P", one, formal);
  auto lhs = p1 * p1;
  auto rhs = ir::bracket("P", p1, formal) + ir::bracket("P", p1, formal);
  Outcome o;
  double worst = 0.0;
  for (double x : {0.5, 1.0, 1.5}) {
    double l = quad::eval_operated(lhs, ops, {}, x), r = quad::eval_operated(rhs, ops, {}, x);
    worst = std::max({worst, std::abs(l - std::pow(x, 4)), std::abs(r - 2.0 / 3.0 * std::pow(x, 4))});
  }
  double res = quad::eval_operated(lhs - rhs, ops, {}, 1.0);
  o.pass = std::abs(res - 1.0 / 3.0) <= 1e-7 && worst <= 1e-7;
  o.detail = "residual at x=1: " + fmt(res) + " (|err| " + fmt(std::abs(res - 1.0 / 3.0)) + ")";
  return o;
}

Outcome c2_mtrba() {
  struct Family {
    std::vector<VolterraOpSpec> ops;
    Interval iv;
    double anchor;
  };
  std::vector<Family> families = {
      {{op("E", 1, E(-X()), E(X()))}, {1.0, 3.0}, 1.0},
      {{op("M", 1, X(), X()), op("T", 1, CoefFn(1), X())}, {1.0, 3.0}, 1.0},
      {{op("S", 0, CoefFn(1), X().pow(Scalar(-1, 2)))}, {0.0, 2.0}, 0.0},
  };
  Outcome o;
  std::size_t checks = 0;
  double worst = 0.0;
  for (const auto& fam : families) {
    coef::Domain dom(fam.iv, fam.anchor, 42);
    auto pool = quad::test_pool(dom);
    auto xs = dom.draw_points(5, 42);
    for (const auto& a : fam.ops)
      for (const auto& b : fam.ops)
        for (const auto& [fn, f] : pool)
          for (const auto& [gn, g] : pool) {
            auto rep = quad::check_mtrba(a, b, f, g, xs, 1e-7);
            o.pass = o.pass && rep.pass;
            worst = std::max(worst, rep.max_rel);
            checks += rep.residuals.size();
          }
  }
  o.detail = std::to_string(checks) + " residuals, max rel " + fmt(worst);
  return o;
}

Outcome c3_reynolds() {
  auto R = op("R", 0, E(-X()), E(X()));
  coef::Domain dom({0.0, 2.0}, 0.0, 42);
  auto pool = quad::test_pool(dom);
  auto xs = dom.draw_points(5, 42);
  Outcome o;
  double worst = 0.0;
  for (const auto& [fn, f] : pool)
    for (const auto& [gn, g] : pool) {
      auto rep = quad::check_reynolds(R, f, g, xs, 1e-7);
      o.pass = o.pass && rep.pass;
      worst = std::max(worst, rep.max_rel);
    }
  o.detail = "max rel " + fmt(worst);
  return o;
}

Outcome c4_thomas_fermi() {
  Outcome o;
  auto lin = veq_run({"linearize", problem("thomas_fermi")});
  bool golden = lin.code == 0 && lin.out == slurp(kRoot + "/tests/golden/thomas_fermi.txt");

  // The operator part is exactly x ⊗ (ω₂ ⊗ y^{3/2}) − 1 ⊗ (ω₂ ⊗ x y^{3/2}) (with the
  // equation's minus sign in front).
  auto p = dsl::parse_file(problem("thomas_fermi"));
  auto dom = p.domain();
  ir::Context ctx{&p.ops, &dom, 8};
  TensorExpr t = shuffle::linearize(p.expr, ctx);
  std::vector<TensorWord> op_words;
  for (const auto& w : t.words())
    if (!w.tail.empty()) op_words.push_back(w);
  CoefPoly y32 = CoefPoly::unknown("y", Scalar(3, 2));
  TensorExpr expected = TensorExpr(TensorWord{CoefPoly(X()), {{"P2", y32}}}) -
                        TensorExpr(TensorWord{CoefPoly::one(), {{"P2", y32.scaled(X())}}});
  bool two_words = TensorExpr::from_words(op_words) == -expected && op_words.size() == 2;

  // σ(y) = t²: ∫₀ˣ∫₀ᵗ s^{-1/2} s³ ds dt = 4/63 x^{9/2}
  Assignment sigma{{"y", X() * X()}};
  double worst = 0.0;
  for (double x : {0.5, 1.0, 2.0}) {
    double v = quad::eval_tensor(expected, p.ops, sigma, x);
    double exact = 4.0 / 63.0 * std::pow(x, 4.5);
    worst = std::max(worst, std::abs(v - exact) / exact);
  }
  auto ver = veq_run({"verify", problem("thomas_fermi"), "--assign", "y=t^2", "--at", "0.5,1,2", "--tol", "1e-6"});
  o.pass = golden && two_words && worst <= 1e-6 && ver.code == 0;
  o.detail = std::string("golden ") + (golden ? "ok" : "MISMATCH") + ", words " + (two_words ? "ok" : "MISMATCH") +
             ", closed form rel " + fmt(worst) + ", verify exit " + std::to_string(ver.code);
  return o;
}

Outcome c5_worked_examples() {
  Outcome o;
  std::string detail;
  for (const char* name : {"exp_kernel", "xt_kernel"}) {
    auto p = dsl::parse_file(problem(name));
    auto dom = p.domain();
    ir::Context ctx{&p.ops, &dom, 8};
    TensorExpr t = shuffle::linearize(p.expr, ctx);
    bool linear = operator_linear(shuffle::to_operated(t, ctx)) && operator_linear(shuffle::to_operated(t, ctx, true)) &&
                  shuffle::tails_in_augmentation(t);
    auto ver = veq_run({"verify", problem(name), "--tol", "1e-6"});
    o.pass = o.pass && linear && ver.code == 0;
    detail += std::string(name) + ": " + (linear ? "linear" : "NOT LINEAR") + ", verify exit " +
              std::to_string(ver.code) + "; ";
    if (std::string(name) == "exp_kernel") {
      // e^{-2x} ⊗ [(P, eˣh), (P, f), (P, eˣg)] − (g ↔ h)
      auto w = [](const char* inner, const char* outer) {
        return TensorExpr(TensorWord{CoefPoly(E(-2 * X())),
                                     {{"P", CoefPoly::unknown(outer).scaled(E(X()))},
                                      {"P", CoefPoly::unknown("f")},
                                      {"P", CoefPoly::unknown(inner).scaled(E(X()))}}});
      };
      bool display = t == w("g", "h") - w("h", "g");
      auto lin = veq_run({"linearize", problem(name)});
      bool golden = lin.out == slurp(kRoot + "/tests/golden/exp_kernel.txt");
      o.pass = o.pass && display && golden;
      detail += std::string("display ") + (display ? "ok" : "MISMATCH") + ", golden " + (golden ? "ok" : "MISMATCH") + "; ";
    }
  }
  o.detail = detail;
  return o;
}

Outcome c6_free_algebra() {
  Outcome o;
  std::size_t failures = 0;
  coef::OpTable ops({op("P", 0, CoefFn(1), CoefFn(1)), op("Q", 0, E(-X()), E(X()) + 1)});
  coef::Domain dom({0.0, 4.0}, 0.0);
  ir::Context ctx{&ops, &dom, 8};
  ir::Context formal{&ops, nullptr, 8};
  Rng rng(2024);
  RandomSpec spec;

  for (int i = 0; i < 200; ++i) {  // word ↔ tree
    auto e = random_operated(rng, spec, 1 + i % 3, false);
    if (!(ir::tree_to_word(ir::word_to_tree(e)) == e)) ++failures;
  }
  for (int i = 0; i < 100; ++i) {  // graft
    auto pick = [&] { return ir::word_to_tree(random_operated(rng, spec, 2, false).terms()[0].mono); };
    auto a = pick(), b = pick(), d = pick();
    if (graft(a, b).key() != graft(b, a).key()) ++failures;
    if (graft(graft(a, b), d).key() != graft(a, graft(b, d)).key()) ++failures;
    if (graft(a, ir::vertex(CoefFn(1))).key() != a.key()) ++failures;
  }
  TensorExpr one = TensorExpr::coefficient(CoefPoly::one());
  for (int i = 0; i < 20; ++i) {  // ⋄
    auto u = random_tensor(rng, spec, 3, 3), v = random_tensor(rng, spec, 3, 3), w = random_tensor(rng, spec, 2, 2);
    if (!(shuffle::shuffle(u, v, formal) == shuffle::shuffle(v, u, formal))) ++failures;
    if (!(shuffle::shuffle(u, one, formal) == u)) ++failures;
    if (!(shuffle::shuffle(shuffle::shuffle(u, v, formal), w, formal) ==
          shuffle::shuffle(u, shuffle::shuffle(v, w, formal), formal)))
      ++failures;
  }
  const std::vector<std::string> names = {"P", "Q"};
  for (int i = 0; i < 100; ++i) {  // matching Rota-Baxter law for pf_apply
    auto u = random_tensor(rng, spec, 2, 2), v = random_tensor(rng, spec, 2, 2);
    const auto& a = names[rng.below(2)];
    const auto& b = names[rng.below(2)];
    auto pu = shuffle::pf_apply(a, u, ctx), pv = shuffle::pf_apply(b, v, ctx);
    auto lhs = shuffle::shuffle(pu, pv, ctx);
    auto rhs = shuffle::pf_apply(a, shuffle::shuffle(u, pv, ctx), ctx) + shuffle::pf_apply(b, shuffle::shuffle(pu, v, ctx), ctx);
    if (!shuffle::equivalent(lhs, rhs, ctx)) ++failures;
  }
  coef::OpTable tops({op("P", 0, E(-X()), E(X())), op("Q", 0, X() + 1, CoefFn(1))});
  ir::Context tctx{&tops, &dom, 8};
  for (int i = 0; i < 100; ++i) {  // matching twisted law for pf_twisted
    auto u = random_tensor(rng, spec, 2, 2), v = random_tensor(rng, spec, 2, 2);
    const auto& a = names[rng.below(2)];
    const auto& b = names[rng.below(2)];
    CoefPoly ta(coef::twist(tops.get(a))), tb(coef::twist(tops.get(b)));
    CoefPoly ta_inv(coef::twist(tops.get(a)).recip()), tb_inv(coef::twist(tops.get(b)).recip());
    auto pu = shuffle::pf_twisted(a, u, tctx), pv = shuffle::pf_twisted(b, v, tctx);
    auto lhs = shuffle::shuffle(pu, pv, tctx);
    auto rhs = shuffle::scale_head(ta, shuffle::pf_twisted(b, shuffle::shuffle(shuffle::scale_head(ta_inv, pu), v, tctx), tctx)) +
               shuffle::scale_head(tb, shuffle::pf_twisted(a, shuffle::shuffle(shuffle::scale_head(tb_inv, u), pv, tctx), tctx));
    if (!shuffle::equivalent(lhs, rhs, tctx)) ++failures;
  }
  o.pass = failures == 0;
  o.detail = "200 roundtrips, 300 graft, 60 shuffle, 100 + 100 laws; failures " + std::to_string(failures);
  return o;
}

Outcome c7_soundness() {
  coef::OpTable ops({op("P", 0, CoefFn(1), CoefFn(1)), op("Q", 0, E(-X()), E(X()))});
  coef::Domain dom({0.0, 4.0}, 0.0, 42);
  ir::Context ctx{&ops, &dom, 8};
  Rng rng(777);
  RandomSpec spec;  // ops {P, Q}, unknowns {y, z}, depth ≤ 3
  auto xs = dom.draw_points(3, 7);
  Outcome o;
  double worst = 0.0;
  std::size_t bad_tails = 0, failed = 0;
  for (int i = 0; i < 100; ++i) {
    auto e = random_operated(rng, spec, 1 + i % 3, false);
    auto t = shuffle::linearize(e, ctx);
    if (!shuffle::tails_in_augmentation(t)) ++bad_tails;
    auto pool = quad::pool_assignments({"y", "z"}, dom, false, 3, 100 + i);
    auto rep = quad::check_identity(
        "soundness", [&](const Assignment& s, double x) { return quad::eval_operated(e, ops, s, x); },
        [&](const Assignment& s, double x) { return quad::eval_tensor(t, ops, s, x); }, pool, xs, 1e-6);
    worst = std::max(worst, rep.max_rel);
    if (!rep.pass) ++failed;
  }
  o.pass = failed == 0 && bad_tails == 0;
  o.detail = "900 comparisons, max rel " + fmt(worst) + ", failing expressions " + std::to_string(failed) +
             ", tails without unknowns " + std::to_string(bad_tails);
  return o;
}

Outcome c8_lemma() {
  std::vector<VolterraOpSpec> family = {op("A", 1, X(), X()), op("B", 1, E(-X()), E(X()))};
  coef::Domain dom({1.0, 3.0}, 1.0, 42);
  auto pool = quad::test_pool(dom);
  auto xs = dom.draw_points(5, 42);
  Outcome o;
  double worst = 0.0;
  std::size_t n = 0;
  for (const auto& [fn, f] : pool)
    for (const auto& [gn, g] : pool) {
      auto rep = quad::check_lemma(family, f, g, xs, 1e-7);
      o.pass = o.pass && rep.pass;
      worst = std::max(worst, rep.max_rel);
      n += rep.residuals.size();
    }
  o.detail = std::to_string(n) + " residuals, max rel " + fmt(worst);
  return o;
}

Outcome c9_oracles() {
  coef::OpTable ops({op("P", 0, CoefFn(1), CoefFn(1)), op("Q", 0, E(-X()), E(X())),
                     op("R", 0, X() + 1, CoefFn::cos(X())), op("S", 0, CoefFn(1), X().pow(Scalar(-1, 2)))});
  coef::Domain dom({0.0, 4.0}, 0.0);
  auto pool = quad::test_pool(dom, true);
  Rng rng(4242);
  RandomSpec spec;
  spec.ops = {"P", "Q", "R", "S"};
  Outcome o;
  double worst = 0.0;
  int words = 0, singular = 0;
  while (words < 50) {
    TensorWord w;
    w.head = CoefPoly(coef_pool()[rng.below(6)]);
    std::size_t len = 1 + rng.below(3);
    for (std::size_t k = 0; k < len; ++k)
      w.tail.push_back({spec.ops[rng.below(4)], CoefPoly(coef_pool()[rng.below(6)], random_vars(rng, spec, true))});
    if (words == 0) w.tail[0].op = "S";
    for (const auto& l : w.tail)
      if (l.op == "S") {
        ++singular;
        break;
      }
    Assignment s{{"y", pool[rng.below(pool.size())].second}, {"z", pool[rng.below(pool.size())].second}};
    double x = 0.25 + 3.5 * double(rng.below(1000)) / 1000.0;
    double g = quad::eval_word(w, ops, s, x), n = quad::eval_word_naive(w, ops, s, x);
    double err = std::abs(g - n) / std::max(1.0, std::abs(n));
    worst = std::max(worst, err);
    ++words;
  }
  TensorWord sq{CoefPoly::one(), {{"S", CoefPoly::unknown("y")}}};
  double half = quad::eval_word(sq, ops, {{"y", CoefFn(1)}}, 1.0);
  o.pass = worst <= 1e-6 && std::abs(half - 2.0) <= 1e-8 && singular > 0;
  o.detail = "50 words (" + std::to_string(singular) + " with t^(-1/2)), max diff " + fmt(worst) +
             ", int_0^1 t^(-1/2) = 2 " + (std::abs(half - 2.0) <= 1e-8 ? "ok" : "off by " + fmt(half - 2.0));
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
    double budget_s;  // 0: no runtime bound
  };
  std::vector<Criterion> all = {
      {1, "Rota-Baxter counterexample K=x", c1_rb_counterexample, 1.0},
      {2, "MTRBA certification", c2_mtrba, 30.0},
      {3, "Reynolds identity", c3_reynolds, 0.0},
      {4, "Thomas-Fermi linearization", c4_thomas_fermi, 0.0},
      {5, "worked product examples", c5_worked_examples, 0.0},
      {6, "free-algebra properties", c6_free_algebra, 0.0},
      {7, "linearizer soundness sweep", c7_soundness, 300.0},
      {8, "Lemma identities", c8_lemma, 0.0},
      {9, "grid vs naive quadrature", c9_oracles, 0.0},
  };
  int failed = 0;
  for (const auto& c : all) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = c.budget_s <= 0.0 || secs < c.budget_s;
    bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s criterion %d: %s -- %s [%.2fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
