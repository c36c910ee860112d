#include "veq/quad.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

namespace veq::quad {

using shuffle::Letter;
using shuffle::TensorExpr;
using shuffle::TensorWord;

double eval_poly(const CoefPoly& p, const Assignment& sigma, double x, double tol) {
  coef::EvalOptions opt;
  opt.quad_tol = tol;
  double total = 0.0;
  for (const auto& [m, c] : p.terms()) {
    double v = coef::eval(c, x, opt);
    for (const auto& [name, e] : m.exponents()) {
      auto it = sigma.find(name);
      if (it == sigma.end()) throw UnassignedUnknownError("no function assigned to unknown '" + name + "'");
      double b = coef::eval(it->second, x, opt);
      if (!e.is_integer() && b < 0.0)
        throw DomainError("unknown '" + name + "' is negative under a fractional power at x = " + std::to_string(x));
      v *= std::pow(b, e.to_double());
    }
    total += v;
  }
  return total;
}

namespace {

double common_lower_limit(const std::vector<Letter>& tail, const OpTable& ops) {
  const Scalar& a = ops.get(tail.front().op).a;
  for (const auto& l : tail)
    if (ops.get(l.op).a != a) throw Error("iterated integral mixes lower limits");
  return a.to_double();
}

/// Iterated integrals of the words of one expression at one x, sharing the
/// graded grid and every common suffix.
class GridEvaluator {
 public:
  GridEvaluator(const OpTable& ops, const Assignment& sigma, double x, const EvalConfig& cfg)
      : ops_(ops),
        sigma_(sigma),
        x_(x),
        n_(cfg.grid_intervals),
        tol_(cfg.tol),
        k_(cfg.kernels != nullptr ? *cfg.kernels : kernels::active_kernels()) {
    if (n_ < 4 || n_ % 2 != 0) throw Error("grid size must be even and at least 4");
  }

  double word(const TensorWord& w) {
    double head = eval_poly(w.head, sigma_, x_, tol_ * 1e-2);
    if (w.tail.empty() || head == 0.0) return head;
    a_ = common_lower_limit(w.tail, ops_);
    if (x_ == a_) return 0.0;
    if (a_set_ && a_ != grid_a_) {
      cache_.clear();
      factors_.clear();
      weights_.clear();
    }
    grid_a_ = a_;
    a_set_ = true;
    return head * level(w.tail, 0).back();
  }

 private:
  double t_at(std::size_t j) const {
    double s = double(j) / double(n_);
    return a_ + (x_ - a_) * s * s;
  }

  const std::vector<double>& factor(const CoefPoly& p) {
    auto key = p.key();
    auto it = factors_.find(key);
    if (it != factors_.end()) return it->second;
    std::vector<double> v(n_ + 1, 0.0);
    for (std::size_t j = 1; j <= n_; ++j) v[j] = eval_poly(p, sigma_, t_at(j), tol_ * 1e-2);
    return factors_.emplace(std::move(key), std::move(v)).first->second;
  }

  /// h(t) k(t) dt/ds on the grid.
  const std::vector<double>& weight(const std::string& op) {
    auto it = weights_.find(op);
    if (it != weights_.end()) return it->second;
    const auto& s = ops_.get(op);
    CoefFn hk = s.h * s.k;
    std::vector<double> v(n_ + 1, 0.0);
    for (std::size_t j = 1; j <= n_; ++j) {
      double sj = double(j) / double(n_);
      v[j] = coef::eval(hk, t_at(j)) * 2.0 * (x_ - a_) * sj;
    }
    return weights_.emplace(op, std::move(v)).first->second;
  }

  const std::vector<double>& ones() {
    if (ones_.size() != n_ + 1) ones_.assign(n_ + 1, 1.0);
    return ones_;
  }

  /// J_i(t_j) = ∫_a^{t_j} h_i k_i u_i J_{i+1} dt for the suffix starting at i.
  const std::vector<double>& level(const std::vector<Letter>& tail, std::size_t i) {
    std::string key;
    for (std::size_t k = i; k < tail.size(); ++k) key += tail[k].op + "(" + tail[k].factor.key() + "),";
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const std::vector<double>& inner = i + 1 < tail.size() ? level(tail, i + 1) : ones();
    const std::vector<double>& w = weight(tail[i].op);
    const std::vector<double>& u = factor(tail[i].factor);
    std::vector<double> g(n_ + 1, 0.0);
    k_.mul3(w.data() + 1, u.data() + 1, inner.data() + 1, g.data() + 1, n_);
    // The integrand at s = 0 (t = a) may be singular in t but is finite in
    // s; extrapolate it from the first interior nodes.
    g[0] = 3.0 * g[1] - 3.0 * g[2] + g[3];
    std::vector<double> out(n_ + 1);
    kernels::cumulative_simpson(g, 1.0 / double(n_), out, k_);
    return cache_.emplace(std::move(key), std::move(out)).first->second;
  }

  const OpTable& ops_;
  const Assignment& sigma_;
  double x_;
  std::size_t n_;
  double tol_;
  const kernels::KernelTable& k_;
  double a_ = 0.0;
  double grid_a_ = 0.0;
  bool a_set_ = false;
  std::vector<double> ones_;
  std::unordered_map<std::string, std::vector<double>> cache_;
  std::unordered_map<std::string, std::vector<double>> factors_;
  std::unordered_map<std::string, std::vector<double>> weights_;
};

double naive_level(const std::vector<Letter>& tail, std::size_t i, const OpTable& ops, const Assignment& sigma,
                   double a, double t, double tol) {
  const auto& s = ops.get(tail[i].op);
  CoefFn hk = s.h * s.k;
  auto g = [&](double u) {
    double v = coef::eval(hk, u) * eval_poly(tail[i].factor, sigma, u, tol * 1e-2);
    if (v == 0.0 || i + 1 == tail.size()) return v;
    return v * naive_level(tail, i + 1, ops, sigma, a, u, tol);
  };
  IntegrateOptions opt;
  opt.abs_tol = tol;
  opt.rel_tol = tol;
  return integrate_detailed(g, a, t, opt).value;
}

}  // namespace

double eval_word(const TensorWord& w, const OpTable& ops, const Assignment& sigma, double x, const EvalConfig& cfg) {
  if (cfg.oracle == Oracle::Naive) return eval_word_naive(w, ops, sigma, x, cfg.tol);
  GridEvaluator ge(ops, sigma, x, cfg);
  return ge.word(w);
}

double eval_word_naive(const TensorWord& w, const OpTable& ops, const Assignment& sigma, double x, double tol) {
  double head = eval_poly(w.head, sigma, x, tol * 1e-2);
  if (w.tail.empty() || head == 0.0) return head;
  double a = common_lower_limit(w.tail, ops);
  return head * naive_level(w.tail, 0, ops, sigma, a, x, tol);
}

double eval_tensor(const TensorExpr& e, const OpTable& ops, const Assignment& sigma, double x, const EvalConfig& cfg) {
  double total = 0.0;
  if (cfg.oracle == Oracle::Naive) {
    for (const auto& w : e.words()) total += eval_word_naive(w, ops, sigma, x, cfg.tol);
    return total;
  }
  GridEvaluator ge(ops, sigma, x, cfg);
  for (const auto& w : e.words()) total += ge.word(w);
  return total;
}

namespace {

double eval_monomial(const ir::OperatedMonomial& m, const OpTable& ops, const Assignment& sigma, double x,
                     double tol) {
  double v = eval_poly(CoefPoly(m.head, m.vars), sigma, x, tol * 1e-2);
  for (const auto& b : m.brackets) {
    if (v == 0.0) return 0.0;
    const auto& s = ops.get(b.op);
    const double a = s.a.to_double();
    auto g = [&](double t) {
      double h = coef::eval(s.h, t);
      if (h == 0.0) return 0.0;
      return h * eval_monomial(*b.payload, ops, sigma, t, tol);
    };
    IntegrateOptions opt;
    opt.abs_tol = tol;
    opt.rel_tol = tol;
    v *= coef::eval(s.k, x) * integrate_detailed(g, a, x, opt).value;
  }
  return v;
}

}  // namespace

double eval_operated(const ir::OperatedExpr& e, const OpTable& ops, const Assignment& sigma, double x, double tol) {
  double total = 0.0;
  for (const auto& t : e.terms()) total += t.coef.to_double() * eval_monomial(t.mono, ops, sigma, x, tol);
  return total;
}

// ---------------------------------------------------------------------------

void CheckReport::add(const std::string& label, double x, double lhs, double rhs) {
  Residual r{label, x, lhs, rhs, std::abs(lhs - rhs), 0.0};
  double mag = std::max(std::abs(lhs), std::abs(rhs));
  r.rel_err = mag < kMagnitudeFloor ? r.abs_err : r.abs_err / mag;
  if (!std::isfinite(lhs) || !std::isfinite(rhs)) {
    r.abs_err = r.rel_err = std::numeric_limits<double>::infinity();
  }
  max_abs = std::max(max_abs, r.abs_err);
  max_rel = std::max(max_rel, r.rel_err);
  if (!(r.rel_err <= tol)) pass = false;
  residuals.push_back(std::move(r));
}

void CheckReport::merge(const CheckReport& other) {
  max_abs = std::max(max_abs, other.max_abs);
  max_rel = std::max(max_rel, other.max_rel);
  pass = pass && other.pass;
  residuals.insert(residuals.end(), other.residuals.begin(), other.residuals.end());
}

CheckReport check_identity(const std::string& name, const Side& lhs, const Side& rhs,
                           const std::vector<Assignment>& pool, const std::vector<double>& xs, double tol) {
  CheckReport rep;
  rep.name = name;
  rep.tol = tol;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    std::string label = "#" + std::to_string(i);
    for (double x : xs) {
      double l = 0.0, r = 0.0;
      try {
        l = lhs(pool[i], x);
      } catch (const DomainError&) {
        l = std::numeric_limits<double>::quiet_NaN();
      }
      try {
        r = rhs(pool[i], x);
      } catch (const DomainError&) {
        r = std::numeric_limits<double>::quiet_NaN();
      }
      rep.add(label, x, l, r);
    }
  }
  return rep;
}

NumericOp::NumericOp(VolterraOpSpec s, double t) : spec(std::move(s)), a(spec.a.to_double()), tol(t) {}

double NumericOp::operator()(const Fn& f, double x) const {
  auto g = [&](double t) { return coef::eval(spec.h, t) * f(t); };
  IntegrateOptions opt;
  opt.abs_tol = tol;
  opt.rel_tol = tol;
  return coef::eval(spec.k, x) * integrate_detailed(g, a, x, opt).value;
}

Fn NumericOp::apply(Fn f) const {
  return [op = *this, f = std::move(f)](double x) { return op(f, x); };
}

Fn NumericOp::twist() const {
  double ka = coef::eval(coef::substitute_x(spec.k, spec.a), 0.0);
  if (ka == 0.0 || !std::isfinite(ka)) throw MissingTwistError("operator " + spec.name + " has k(a) = 0");
  return [k = spec.k, ka](double x) { return coef::eval(k, x) / ka; };
}

namespace {

Fn numeric(const CoefFn& f) {
  return [f](double x) { return coef::eval(f, x); };
}

std::string pair_label(const VolterraOpSpec& a, const VolterraOpSpec& b) { return a.name + "," + b.name; }

}  // namespace

CheckReport check_mtrba(const VolterraOpSpec& alpha, const VolterraOpSpec& beta, const CoefFn& f,
                        const CoefFn& g, const std::vector<double>& xs, double tol) {
  NumericOp pa(alpha), pb(beta);
  Fn ta = pa.twist(), tb = pb.twist();
  Fn F = numeric(f), G = numeric(g);
  CheckReport rep;
  rep.name = "mtrba";
  rep.tol = tol;
  Fn paf = pa.apply(F), pbg = pb.apply(G);
  for (double x : xs) {
    double lhs = paf(x) * pbg(x);
    double r1 = ta(x) * pb([&](double t) { return paf(t) * G(t) / ta(t); }, x);
    double r2 = tb(x) * pa([&](double t) { return F(t) * pbg(t) / tb(t); }, x);
    rep.add(pair_label(alpha, beta), x, lhs, r1 + r2);
  }
  return rep;
}

CheckReport check_rb(const VolterraOpSpec& alpha, const VolterraOpSpec& beta, const CoefFn& f, const CoefFn& g,
                     const std::vector<double>& xs, double tol) {
  NumericOp pa(alpha), pb(beta);
  Fn F = numeric(f), G = numeric(g);
  Fn paf = pa.apply(F), pbg = pb.apply(G);
  CheckReport rep;
  rep.name = "rota-baxter";
  rep.tol = tol;
  for (double x : xs) {
    double lhs = paf(x) * pbg(x);
    double rhs = pa([&](double t) { return F(t) * pbg(t); }, x) + pb([&](double t) { return paf(t) * G(t); }, x);
    rep.add(pair_label(alpha, beta), x, lhs, rhs);
  }
  return rep;
}

CheckReport check_reynolds(const VolterraOpSpec& r, const CoefFn& f, const CoefFn& g,
                           const std::vector<double>& xs, double tol) {
  NumericOp R(r);
  Fn F = numeric(f), G = numeric(g);
  Fn rf = R.apply(F), rg = R.apply(G);
  CheckReport rep;
  rep.name = "reynolds";
  rep.tol = tol;
  for (double x : xs) {
    double lhs = rf(x) * rg(x);
    double rhs = R([&](double t) { return F(t) * rg(t); }, x) + R([&](double t) { return rf(t) * G(t); }, x) -
                 R([&](double t) { return rf(t) * rg(t); }, x);
    rep.add(r.name, x, lhs, rhs);
  }
  return rep;
}

CheckReport check_lemma(const std::vector<VolterraOpSpec>& family, const CoefFn& f, const CoefFn& g,
                        const std::vector<double>& xs, double tol) {
  std::vector<NumericOp> P;
  std::vector<Fn> tw;
  for (const auto& s : family) {
    P.emplace_back(s);
    tw.push_back(P.back().twist());
  }
  // P̌_{w,w'}(z)(x) = 𝔞_{w'}(x)⁻¹ P_w(𝔞_{w'} z)(x)
  auto check = [&](std::size_t w, std::size_t wp, const Fn& z) -> Fn {
    return [&, w, wp, z](double x) {
      return P[w]([&](double t) { return tw[wp](t) * z(t); }, x) / tw[wp](x);
    };
  };
  Fn F = numeric(f), G = numeric(g);
  CheckReport rep;
  rep.name = "lemma";
  rep.tol = tol;
  const std::size_t n = family.size();
  for (std::size_t al = 0; al < n; ++al)
    for (std::size_t be = 0; be < n; ++be)
      for (std::size_t ga = 0; ga < n; ++ga) {
        Fn paf = P[al].apply(F);
        Fn cbg = check(be, ga, G);
        std::string label = "1:" + family[al].name + "," + family[be].name + "," + family[ga].name;
        for (double x : xs) {
          double lhs = paf(x) * cbg(x);
          double r1 = tw[al](x) * check(be, ga, [&](double t) { return paf(t) * G(t) / tw[al](t); })(x);
          double r2 = tw[be](x) * check(al, ga, [&](double t) { return F(t) * cbg(t) / tw[be](t); })(x);
          rep.add(label, x, lhs, r1 + r2);
        }
        for (std::size_t et = 0; et < n; ++et) {
          Fn caf = check(al, et, F);
          std::string label2 = "2:" + family[al].name + "," + family[et].name + "," + family[be].name + "," +
                               family[ga].name;
          for (double x : xs) {
            double lhs = caf(x) * cbg(x);
            double r1 = tw[al](x) / tw[et](x) *
                        check(be, ga, [&](double t) { return tw[et](t) / tw[al](t) * caf(t) * G(t); })(x);
            double r2 = tw[be](x) / tw[ga](x) *
                        check(al, et, [&](double t) { return tw[ga](t) / tw[be](t) * F(t) * cbg(t); })(x);
            rep.add(label2, x, lhs, r1 + r2);
          }
        }
      }
  return rep;
}

std::vector<std::pair<std::string, CoefFn>> test_pool(const coef::Domain& dom, bool positive_only) {
  const CoefFn t = CoefFn::x();
  std::vector<std::pair<std::string, CoefFn>> all = {
      {"1", CoefFn(1)},
      {"t", t},
      {"t^2", t * t},
      {"sin(t)", CoefFn::sin(t)},
      {"exp(t)", CoefFn::exp(t)},
      {"1/(1+t^2)", (CoefFn(1) + t * t).recip()},
  };
  if (!positive_only) return all;
  std::vector<std::pair<std::string, CoefFn>> out;
  for (auto& [name, f] : all) {
    bool positive = true;
    for (double p : dom.scan_points(64)) {
      if (!dom.interval().interior(p)) continue;
      if (!(coef::eval(f, p) > 0.0)) {
        positive = false;
        break;
      }
    }
    if (positive) out.emplace_back(name, f);
  }
  return out;
}

std::vector<Assignment> pool_assignments(const std::vector<std::string>& unknowns, const coef::Domain& dom,
                                         bool positive_only, std::size_t count, std::uint64_t seed) {
  auto pool = test_pool(dom, positive_only);
  std::vector<Assignment> out;
  if (unknowns.empty()) return {Assignment{}};
  if (unknowns.size() == 1) {
    for (const auto& [name, f] : pool) out.push_back({{unknowns[0], f}});
    return out;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Assignment a;
    for (const auto& u : unknowns) a[u] = pool[rng() % pool.size()].second;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace veq::quad
