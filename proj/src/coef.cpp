#include "veq/coef.hpp"

#include "veq/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace veq {

bool Interval::contains(double x) const {
  bool above = lo_open ? x > lo : x >= lo;
  bool below = hi_open ? x < hi : x <= hi;
  return above && below;
}

bool Interval::bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

namespace coef {

struct Node {
  Kind kind = Kind::Const;
  Scalar num;
  double num_d = 0.0;
  std::string name;
  double probe = 0.0;
  std::vector<CoefFn> args;
  std::vector<Factor> factors;
  std::vector<double> exp_d;
  std::vector<char> exp_int;
  std::string key;
  bool has_x = false;
  bool has_int = false;
};

namespace {

const std::vector<CoefFn> kNoArgs;
const std::vector<Factor> kNoFactors;
const std::string kNoName;

double name_probe(const std::string& name) {
  // FNV-1a, so probes are stable across platforms.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return 0.75 + static_cast<double>(h % 1000) / 2000.0;
}

}  // namespace

struct Builder {
  static CoefFn make(Node n) {
    switch (n.kind) {
      case Kind::Const:
        n.key = "0" + n.num.str();
        break;
      case Kind::X:
        n.key = "2";
        n.has_x = true;
        break;
      case Kind::Param:
        n.key = "1" + n.name;
        break;
      case Kind::Sum: {
        n.key = "4(";
        for (std::size_t i = 0; i < n.args.size(); ++i) {
          if (i) n.key += ',';
          n.key += n.args[i].key();
        }
        n.key += ')';
        break;
      }
      case Kind::Prod: {
        n.key = "3(" + n.num.str() + ";";
        for (std::size_t i = 0; i < n.factors.size(); ++i) {
          if (i) n.key += ',';
          n.key += n.factors[i].base.key() + "^" + n.factors[i].exponent.str();
          n.exp_d.push_back(n.factors[i].exponent.to_double());
          n.exp_int.push_back(n.factors[i].exponent.is_integer() ? 1 : 0);
        }
        n.key += ')';
        break;
      }
      case Kind::Exp:
        n.key = "5(" + n.args[0].key() + ")";
        break;
      case Kind::Sin:
        n.key = "6(" + n.args[0].key() + ")";
        break;
      case Kind::Cos:
        n.key = "7(" + n.args[0].key() + ")";
        break;
      case Kind::Int:
        n.key = "8(" + n.num.str() + ";" + n.args[0].key() + ")";
        n.has_x = true;
        n.has_int = true;
        break;
    }
    n.num_d = n.num.to_double();
    for (const auto& a : n.args) {
      n.has_x = n.has_x || a.depends_on_x();
      n.has_int = n.has_int || a.contains_integral();
    }
    for (const auto& f : n.factors) {
      n.has_x = n.has_x || f.base.depends_on_x();
      n.has_int = n.has_int || f.base.contains_integral();
    }
    return CoefFn(std::make_shared<const Node>(std::move(n)));
  }

  static CoefFn constant(const Scalar& c) {
    static const CoefFn zero = [] {
      Node n;
      n.kind = Kind::Const;
      return make(std::move(n));
    }();
    static const CoefFn one = [] {
      Node n;
      n.kind = Kind::Const;
      n.num = Scalar(1);
      return make(std::move(n));
    }();
    if (c.is_zero()) return zero;
    if (c.is_one()) return one;
    Node n;
    n.kind = Kind::Const;
    n.num = c;
    return make(std::move(n));
  }

  static CoefFn unary(Kind k, const CoefFn& arg) {
    Node n;
    n.kind = k;
    n.args.push_back(arg);
    return make(std::move(n));
  }

  /// Builds a product from already-normalized, key-sorted factors.
  static CoefFn from_term(const Scalar& c, std::vector<Factor> fs) {
    if (c.is_zero()) return constant(Scalar(0));
    if (fs.empty()) return constant(c);
    if (c.is_one() && fs.size() == 1 && fs[0].exponent.is_one()) return fs[0].base;
    Node n;
    n.kind = Kind::Prod;
    n.num = c;
    n.factors = std::move(fs);
    return make(std::move(n));
  }

  static CoefFn integral_node(const Scalar& lower, const CoefFn& integrand) {
    Node n;
    n.kind = Kind::Int;
    n.num = lower;
    n.args.push_back(integrand);
    return make(std::move(n));
  }
};

namespace {

struct Term {
  Scalar coef;
  std::vector<Factor> factors;
};

Term as_term(const CoefFn& f) {
  switch (f.kind()) {
    case Kind::Const:
      return {f.number(), {}};
    case Kind::Prod:
      return {f.number(), f.factors()};
    default:
      return {Scalar(1), {{f, Scalar(1)}}};
  }
}

CoefFn pow_int_sum(const CoefFn& s, long n) {
  CoefFn acc(1);
  for (long i = 0; i < n; ++i) acc = acc * s;
  return acc;
}

constexpr long kMaxExpand = 8;

CoefFn build_term(Scalar coef, const std::vector<Factor>& raw) {
  if (coef.is_zero()) return CoefFn();
  std::map<std::string, Factor> merged;
  CoefFn exp_arg;
  bool have_exp = false;
  for (const auto& f : raw) {
    if (f.exponent.is_zero()) continue;
    const CoefFn& b = f.base;
    if (b.kind() == Kind::Const) {
      if (b.number().is_one()) continue;
      if (b.number().is_zero()) {
        if (f.exponent.sign() > 0) return CoefFn();
        throw DomainError("division by zero");
      }
    }
    if (b.kind() == Kind::Exp) {
      exp_arg = exp_arg + CoefFn(f.exponent) * b.args()[0];
      have_exp = true;
      continue;
    }
    auto it = merged.find(b.key());
    if (it == merged.end()) {
      merged.emplace(b.key(), f);
    } else {
      it->second.exponent += f.exponent;
    }
  }

  std::vector<Factor> out;
  std::vector<std::pair<CoefFn, long>> expand;
  std::vector<Factor> reinject;
  for (auto& [key, f] : merged) {
    if (f.exponent.is_zero()) continue;
    const CoefFn& b = f.base;
    if (b.kind() == Kind::Const) {
      const Scalar& c = b.number();
      mpz_class fl = f.exponent.floor();
      Scalar whole{mpq_class(fl)};
      Scalar frac = f.exponent - whole;
      coef *= c.pow(fl.get_si());
      if (!frac.is_zero()) {
        if (auto r = c.exact_root_pow(frac)) {
          coef *= *r;
        } else {
          if (c.sign() < 0) throw DomainError("fractional power of a negative constant");
          out.push_back({b, frac});
        }
      }
      continue;
    }
    if (b.kind() == Kind::Sum && f.exponent.is_integer() && f.exponent.sign() > 0 &&
        f.exponent <= Scalar(kMaxExpand)) {
      expand.emplace_back(b, *f.exponent.to_long());
      continue;
    }
    if (b.kind() == Kind::Prod && f.exponent.is_integer()) {
      coef *= b.number().pow(*f.exponent.to_long());
      for (const auto& inner : b.factors()) reinject.push_back({inner.base, inner.exponent * f.exponent});
      continue;
    }
    out.push_back(f);
  }
  if (have_exp && !exp_arg.is_zero()) out.push_back({CoefFn::exp(exp_arg), Scalar(1)});
  if (!reinject.empty()) {
    for (auto& f : out) reinject.push_back(f);
    CoefFn r = build_term(coef, reinject);
    for (auto& [s, n] : expand) r = r * pow_int_sum(s, n);
    return r;
  }
  std::sort(out.begin(), out.end(),
            [](const Factor& a, const Factor& b) { return a.base.key() < b.base.key(); });
  CoefFn r = Builder::from_term(coef, std::move(out));
  for (auto& [s, n] : expand) r = r * pow_int_sum(s, n);
  return r;
}

CoefFn add_all(const std::vector<CoefFn>& parts) {
  // rest key -> (coefficient, rest factors)
  std::map<std::string, std::pair<Scalar, std::vector<Factor>>> acc;
  auto push = [&](const CoefFn& t) {
    if (t.is_zero()) return;
    Term term = as_term(t);
    CoefFn rest = Builder::from_term(Scalar(1), term.factors);
    auto it = acc.find(rest.key());
    if (it == acc.end()) {
      acc.emplace(rest.key(), std::make_pair(term.coef, std::move(term.factors)));
    } else {
      it->second.first += term.coef;
    }
  };
  for (const auto& p : parts) {
    if (p.kind() == Kind::Sum) {
      for (const auto& t : p.args()) push(t);
    } else {
      push(p);
    }
  }
  std::vector<CoefFn> terms;
  for (auto& [key, cf] : acc) {
    if (cf.first.is_zero()) continue;
    terms.push_back(Builder::from_term(cf.first, cf.second));
  }
  if (terms.empty()) return CoefFn();
  if (terms.size() == 1) return terms[0];
  Node n;
  n.kind = Kind::Sum;
  n.args = std::move(terms);
  return Builder::make(std::move(n));
}

/// q when f is q*x, otherwise nullopt.
std::optional<Scalar> linear_coefficient(const CoefFn& f) {
  if (f.kind() == Kind::X) return Scalar(1);
  if (f.kind() == Kind::Prod && f.factors().size() == 1 && f.factors()[0].base.kind() == Kind::X &&
      f.factors()[0].exponent.is_one())
    return f.number();
  return std::nullopt;
}

/// ∫_lower^x of a monic, x-dependent product of factors.
CoefFn integrate_monic(const Scalar& lower, const std::vector<Factor>& fs) {
  const CoefFn X = CoefFn::x();
  if (fs.size() == 1) {
    const Factor& f = fs[0];
    if (f.base.kind() == Kind::X && f.exponent != Scalar(-1)) {
      Scalar q = f.exponent + Scalar(1);
      std::optional<CoefFn> at_lower;
      if (lower.is_zero()) {
        if (q.sign() > 0) at_lower = CoefFn();
      } else if (lower.sign() > 0 || q.is_integer()) {
        at_lower = CoefFn(lower).pow(q);
      }
      if (at_lower) return (X.pow(q) - *at_lower) * CoefFn(Scalar(1) / q);
    }
    if (f.exponent.is_one()) {
      const CoefFn& b = f.base;
      if (b.kind() == Kind::Exp) {
        if (auto q = linear_coefficient(b.args()[0])) {
          return (b - CoefFn::exp(CoefFn(*q * lower))) * CoefFn(Scalar(1) / *q);
        }
      }
      if (b.kind() == Kind::Sin && b.args()[0].kind() == Kind::X)
        return CoefFn::cos(CoefFn(lower)) - CoefFn::cos(X);
      if (b.kind() == Kind::Cos && b.args()[0].kind() == Kind::X)
        return CoefFn::sin(X) - CoefFn::sin(CoefFn(lower));
    }
  }
  return Builder::integral_node(lower, Builder::from_term(Scalar(1), fs));
}

double pow_d(double b, double e, bool integer) {
  if (integer) {
    if (b == 0.0 && e < 0) throw DomainError("division by zero");
    return std::pow(b, e);
  }
  if (b < 0.0) throw DomainError("fractional power of a negative value");
  if (b == 0.0 && e < 0) throw DomainError("division by zero");
  return std::pow(b, e);
}

}  // namespace

// ---------------------------------------------------------------------------

CoefFn::CoefFn() : CoefFn(Builder::constant(Scalar(0))) {}
CoefFn::CoefFn(Scalar c) : CoefFn(Builder::constant(c)) {}

CoefFn CoefFn::x() {
  static const CoefFn v = [] {
    Node n;
    n.kind = Kind::X;
    return Builder::make(std::move(n));
  }();
  return v;
}

CoefFn CoefFn::param(const std::string& name) { return param(name, name_probe(name)); }

CoefFn CoefFn::param(const std::string& name, double probe) {
  Node n;
  n.kind = Kind::Param;
  n.name = name;
  n.probe = probe;
  return Builder::make(std::move(n));
}

CoefFn CoefFn::exp(const CoefFn& arg) {
  if (arg.is_zero()) return CoefFn(1);
  return Builder::unary(Kind::Exp, arg);
}

CoefFn CoefFn::sin(const CoefFn& arg) {
  if (arg.is_zero()) return CoefFn();
  return Builder::unary(Kind::Sin, arg);
}

CoefFn CoefFn::cos(const CoefFn& arg) {
  if (arg.is_zero()) return CoefFn(1);
  return Builder::unary(Kind::Cos, arg);
}

CoefFn CoefFn::integral(const Scalar& lower, const CoefFn& integrand) {
  if (integrand.is_zero()) return CoefFn();
  if (integrand.kind() == Kind::Sum) {
    std::vector<CoefFn> parts;
    for (const auto& t : integrand.args()) parts.push_back(integral(lower, t));
    return add_all(parts);
  }
  Term t = as_term(integrand);
  std::vector<Factor> xfree, xdep;
  for (const auto& f : t.factors) (f.base.depends_on_x() ? xdep : xfree).push_back(f);
  CoefFn c = Builder::from_term(t.coef, xfree);
  if (xdep.empty()) return c * (CoefFn::x() - CoefFn(lower));
  return c * integrate_monic(lower, xdep);
}

CoefFn CoefFn::pow(const Scalar& e) const {
  if (e.is_zero()) return CoefFn(1);
  if (e.is_one()) return *this;
  switch (kind()) {
    case Kind::Const:
      if (number().is_zero()) {
        if (e.sign() > 0) return *this;
        throw DomainError("division by zero");
      }
      return build_term(Scalar(1), {{*this, e}});
    case Kind::Exp:
      return CoefFn::exp(args()[0] * CoefFn(e));
    case Kind::Sum: {
      if (e.is_integer() && e.sign() > 0 && e <= Scalar(kMaxExpand)) return pow_int_sum(*this, *e.to_long());
      auto [content, prim] = split_content();
      if (!content.is_one() && (content.sign() > 0 || e.is_integer()))
        return CoefFn(content).pow(e) * build_term(Scalar(1), {{prim, e}});
      return build_term(Scalar(1), {{*this, e}});
    }
    case Kind::Prod: {
      if (e.is_integer()) {
        std::vector<Factor> fs;
        for (const auto& f : factors()) fs.push_back({f.base, f.exponent * e});
        return build_term(number().pow(*e.to_long()), fs);
      }
      if (number().sign() < 0) return build_term(Scalar(1), {{*this, e}});
      std::vector<Factor> fs;
      std::vector<Factor> general;
      for (const auto& f : factors()) {
        if (f.base.kind() == Kind::Const) {
          fs.push_back({f.base, f.exponent * e});
        } else {
          general.push_back(f);
        }
      }
      CoefFn r = CoefFn(number()).pow(e);
      if (general.size() == 1 && mpz_odd_p(general[0].exponent.num().get_mpz_t())) {
        fs.push_back({general[0].base, general[0].exponent * e});
      } else if (!general.empty()) {
        fs.push_back({Builder::from_term(Scalar(1), general), e});
      }
      return r * build_term(Scalar(1), fs);
    }
    default:
      return build_term(Scalar(1), {{*this, e}});
  }
}

CoefFn operator+(const CoefFn& a, const CoefFn& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return add_all({a, b});
}

CoefFn operator-(const CoefFn& a, const CoefFn& b) { return a + (-b); }

CoefFn CoefFn::operator-() const { return CoefFn(Scalar(-1)) * *this; }

CoefFn operator*(const CoefFn& a, const CoefFn& b) {
  if (a.is_zero() || b.is_zero()) return CoefFn();
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  if (a.kind() == Kind::Sum || b.kind() == Kind::Sum) {
    const std::vector<CoefFn> single_a{a}, single_b{b};
    const auto& ta = a.kind() == Kind::Sum ? a.args() : single_a;
    const auto& tb = b.kind() == Kind::Sum ? b.args() : single_b;
    std::vector<CoefFn> parts;
    parts.reserve(ta.size() * tb.size());
    for (const auto& x : ta)
      for (const auto& y : tb) parts.push_back(x * y);
    return add_all(parts);
  }
  Term ta = as_term(a);
  Term tb = as_term(b);
  std::vector<Factor> fs = ta.factors;
  fs.insert(fs.end(), tb.factors.begin(), tb.factors.end());
  return build_term(ta.coef * tb.coef, fs);
}

CoefFn operator/(const CoefFn& a, const CoefFn& b) { return a * b.recip(); }

Kind CoefFn::kind() const { return node_->kind; }
const std::string& CoefFn::key() const { return node_->key; }
const Scalar& CoefFn::number() const { return node_->num; }
const std::string& CoefFn::name() const { return node_->kind == Kind::Param ? node_->name : kNoName; }
double CoefFn::probe() const { return node_->probe; }
const std::vector<CoefFn>& CoefFn::args() const { return node_->args.empty() ? kNoArgs : node_->args; }
const std::vector<Factor>& CoefFn::factors() const {
  return node_->factors.empty() ? kNoFactors : node_->factors;
}
bool CoefFn::depends_on_x() const { return node_->has_x; }
bool CoefFn::contains_integral() const { return node_->has_int; }

std::optional<Scalar> CoefFn::as_const() const {
  if (kind() == Kind::Const) return number();
  return std::nullopt;
}

std::pair<Scalar, CoefFn> CoefFn::split_content() const {
  switch (kind()) {
    case Kind::Const:
      if (is_zero()) return {Scalar(1), *this};
      return {number(), CoefFn(1)};
    case Kind::Prod:
      if (number().is_one()) return {Scalar(1), *this};
      return {number(), Builder::from_term(Scalar(1), factors())};
    case Kind::Sum: {
      Scalar c = args()[0].split_content().first;
      return {c, *this * CoefFn(Scalar(1) / c)};
    }
    default:
      return {Scalar(1), *this};
  }
}

CoefFn substitute_x(const CoefFn& f, const Scalar& value) {
  if (!f.depends_on_x()) return f;
  switch (f.kind()) {
    case Kind::X:
      return CoefFn(value);
    case Kind::Sum: {
      CoefFn acc;
      for (const auto& t : f.args()) acc = acc + substitute_x(t, value);
      return acc;
    }
    case Kind::Prod: {
      CoefFn acc(f.number());
      for (const auto& fa : f.factors()) acc = acc * substitute_x(fa.base, value).pow(fa.exponent);
      return acc;
    }
    case Kind::Exp:
      return CoefFn::exp(substitute_x(f.args()[0], value));
    case Kind::Sin:
      return CoefFn::sin(substitute_x(f.args()[0], value));
    case Kind::Cos:
      return CoefFn::cos(substitute_x(f.args()[0], value));
    case Kind::Int:
      if (f.number() == value) return CoefFn();
      throw Error("cannot evaluate an unevaluated integral symbolically");
    default:
      return f;
  }
}

double eval(const CoefFn& f, double x, const EvalOptions& opt) {
  const Node& n = *f.node();
  double v = 0.0;
  switch (n.kind) {
    case Kind::Const:
      return n.num_d;
    case Kind::X:
      return x;
    case Kind::Param:
      return n.probe;
    case Kind::Sum:
      for (const auto& t : n.args) v += eval(t, x, opt);
      break;
    case Kind::Prod:
      v = n.num_d;
      for (std::size_t i = 0; i < n.factors.size(); ++i)
        v *= pow_d(eval(n.factors[i].base, x, opt), n.exp_d[i], n.exp_int[i] != 0);
      break;
    case Kind::Exp:
      v = std::exp(eval(n.args[0], x, opt));
      break;
    case Kind::Sin:
      v = std::sin(eval(n.args[0], x, opt));
      break;
    case Kind::Cos:
      v = std::cos(eval(n.args[0], x, opt));
      break;
    case Kind::Int: {
      quad::IntegrateOptions io;
      io.abs_tol = opt.quad_tol;
      io.rel_tol = opt.quad_tol;
      const CoefFn& g = n.args[0];
      v = quad::integrate_detailed([&](double t) { return eval(g, t, opt); }, n.num_d, x, io).value;
      break;
    }
  }
  if (!std::isfinite(v)) throw DomainError("coefficient function is not finite at x = " + std::to_string(x));
  return v;
}

// ---------------------------------------------------------------------------

VarMonomial VarMonomial::var(const std::string& name, const Scalar& exponent) {
  VarMonomial m;
  if (exponent.sign() <= 0) throw DomainError("unknowns may only carry positive exponents");
  m.exps_[name] = exponent;
  return m;
}

bool VarMonomial::has_fractional_exponent() const {
  return std::any_of(exps_.begin(), exps_.end(), [](const auto& kv) { return !kv.second.is_integer(); });
}

VarMonomial VarMonomial::operator*(const VarMonomial& o) const {
  VarMonomial r = *this;
  for (const auto& [name, e] : o.exps_) r.exps_[name] += e;
  return r;
}

VarMonomial VarMonomial::pow(const Scalar& e) const {
  if (e.sign() < 0) throw DomainError("unknowns may only carry positive exponents");
  VarMonomial r;
  if (e.is_zero()) return r;
  for (const auto& [name, x] : exps_) r.exps_[name] = x * e;
  return r;
}

std::string VarMonomial::key() const {
  std::string s;
  for (const auto& [name, e] : exps_) {
    if (!s.empty()) s += '*';
    s += name;
    if (!e.is_one()) s += "^" + e.str();
  }
  return s;
}

bool operator<(const VarMonomial& a, const VarMonomial& b) {
  return std::lexicographical_compare(
      a.exps_.begin(), a.exps_.end(), b.exps_.begin(), b.exps_.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first < y.first;
        return x.second < y.second;
      });
}

CoefPoly::CoefPoly(const CoefFn& c) { add_term(VarMonomial{}, c); }
CoefPoly::CoefPoly(const CoefFn& c, const VarMonomial& m) { add_term(m, c); }

CoefPoly CoefPoly::unknown(const std::string& name, const Scalar& exponent) {
  return CoefPoly(CoefFn(1), VarMonomial::var(name, exponent));
}

const CoefPoly::Terms& CoefPoly::empty_terms() {
  static const Terms empty;
  return empty;
}

CoefPoly::Terms& CoefPoly::mut() {
  key_.reset();
  if (!terms_) {
    terms_ = std::make_shared<Terms>();
  } else if (terms_.use_count() > 1) {
    terms_ = std::make_shared<Terms>(*terms_);
  }
  return const_cast<Terms&>(*terms_);
}

void CoefPoly::add_term(const VarMonomial& m, const CoefFn& c) {
  if (c.is_zero()) return;
  Terms& t = mut();
  auto it = t.find(m);
  if (it == t.end()) {
    t.emplace(m, c);
    return;
  }
  CoefFn s = it->second + c;
  if (s.is_zero()) {
    t.erase(it);
  } else {
    it->second = s;
  }
}

CoefFn CoefPoly::a_part() const {
  auto it = terms().find(VarMonomial{});
  return it == terms().end() ? CoefFn() : it->second;
}

CoefPoly CoefPoly::plus_part() const {
  if (in_augmentation()) return *this;
  CoefPoly r = *this;
  r.mut().erase(VarMonomial{});
  return r;
}

bool CoefPoly::is_one() const {
  return size() == 1 && terms().begin()->first.empty() && terms().begin()->second.is_one();
}

CoefPoly operator+(const CoefPoly& a, const CoefPoly& b) {
  CoefPoly r = a;
  for (const auto& [m, c] : b.terms()) r.add_term(m, c);
  return r;
}

CoefPoly operator-(const CoefPoly& a, const CoefPoly& b) { return a + (-b); }

CoefPoly CoefPoly::operator-() const { return scaled(CoefFn(-1)); }

CoefPoly operator*(const CoefPoly& a, const CoefPoly& b) {
  CoefPoly r;
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) r.add_term(ma * mb, ca * cb);
  return r;
}

CoefPoly poly_mul(const CoefPoly& p, const CoefPoly& q) { return p * q; }

CoefPoly CoefPoly::scaled(const CoefFn& c) const {
  CoefPoly r;
  if (c.is_one()) return *this;
  for (const auto& [m, x] : terms()) r.add_term(m, x * c);
  return r;
}

CoefPoly CoefPoly::pruned(const Domain& dom) const {
  CoefPoly r;
  for (const auto& [m, c] : terms())
    if (!dom.is_zero(c)) r.mut().emplace(m, c);
  return r;
}

std::string CoefPoly::key() const {
  if (key_) return *key_;
  std::string s;
  for (const auto& [m, c] : terms()) {
    s += m.key();
    s += ':';
    s += c.key();
    s += '|';
  }
  key_ = std::make_shared<const std::string>(s);
  return s;
}

std::pair<CoefPoly, CoefPoly> aug_split(const CoefPoly& p) { return {CoefPoly(p.a_part()), p.plus_part()}; }

// ---------------------------------------------------------------------------

CoefFn twist(const VolterraOpSpec& op) {
  CoefFn ka;
  try {
    ka = substitute_x(op.k, op.a);
  } catch (const Error& e) {
    throw MissingTwistError("operator " + op.name + ": k(a) is not defined (" + e.what() + ")");
  }
  double v = 0.0;
  try {
    v = eval(ka, 0.0);
  } catch (const DomainError&) {
    v = std::numeric_limits<double>::quiet_NaN();
  }
  if (ka.is_zero() || !std::isfinite(v) || v == 0.0)
    throw MissingTwistError("operator " + op.name + ": k(a) = 0 at a = " + op.a.str() +
                            ", so the twist k(x)/k(a) does not exist");
  return op.k / ka;
}

CoefFn apply_rho(const VolterraOpSpec& op, const CoefFn& f) {
  return op.k * CoefFn::integral(op.a, op.h * f);
}

CoefFn apply_rho_check(const VolterraOpSpec& op, const CoefFn& f) {
  return CoefFn::integral(op.a, op.h * op.k * f);
}

VolterraOpSpec check_operator(const VolterraOpSpec& op) {
  return {std::string(kCheckPrefix) + op.name, op.a, CoefFn(1), op.h * op.k, true};
}

OpTable::OpTable(std::vector<VolterraOpSpec> ops) {
  for (auto& op : ops) add(std::move(op));
}

void OpTable::add(VolterraOpSpec op) {
  derived_[std::string(kCheckPrefix) + op.name] = check_operator(op);
  ops_.push_back(std::move(op));
}

const VolterraOpSpec& OpTable::get(const std::string& name) const {
  for (const auto& op : ops_)
    if (op.name == name) return op;
  auto it = derived_.find(name);
  if (it != derived_.end()) return it->second;
  throw Error("unknown operator '" + name + "'");
}

bool OpTable::contains(const std::string& name) const {
  return derived_.contains(name) ||
         std::any_of(ops_.begin(), ops_.end(), [&](const auto& op) { return op.name == name; });
}

std::optional<Scalar> OpTable::lower_limit() const {
  if (ops_.empty()) return std::nullopt;
  for (const auto& op : ops_)
    if (op.a != ops_[0].a) return std::nullopt;
  return ops_[0].a;
}

// ---------------------------------------------------------------------------

namespace {

std::pair<double, double> sampling_window(const Interval& iv, std::optional<double> anchor) {
  constexpr double kWidth = 2.0;
  double base = anchor ? *anchor : (std::isfinite(iv.lo) ? iv.lo : (std::isfinite(iv.hi) ? iv.hi : -1.0));
  if (base < iv.hi) {
    double lo = std::max(iv.lo, base);
    return {lo, std::min(iv.hi, lo + kWidth)};
  }
  return {std::max(iv.lo, iv.hi - kWidth), iv.hi};
}

std::vector<double> uniform_points(std::pair<double, double> w, int n, std::uint64_t seed) {
  const double margin = 0.05 * (w.second - w.first);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(w.first + margin, w.second - margin);
  std::vector<double> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) p = dist(rng);
  std::sort(pts.begin(), pts.end());
  return pts;
}

}  // namespace

Domain::Domain(Interval interval, std::optional<double> anchor, std::uint64_t seed)
    : interval_(interval), window_(sampling_window(interval, anchor)) {
  points_ = uniform_points(window_, kSamplePoints, seed);
}

std::vector<double> Domain::draw_points(int n, std::uint64_t seed) const {
  return uniform_points(window_, n, seed);
}

std::vector<double> Domain::scan_points(int n) const {
  std::vector<double> pts;
  auto [lo, hi] = interval_.bounded() ? std::pair{interval_.lo, interval_.hi} : window_;
  for (int i = 0; i < n; ++i) pts.push_back(lo + (hi - lo) * (i + 0.5) / n);
  if (!std::isfinite(interval_.hi)) {
    for (double d = 4.0; d <= 256.0; d *= 4.0) pts.push_back(window_.first + d);
  }
  if (!std::isfinite(interval_.lo)) {
    for (double d = 4.0; d <= 256.0; d *= 4.0) pts.push_back(window_.second - d);
  }
  return pts;
}

const std::vector<double>& Domain::fingerprint(const CoefFn& f) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(f.node());
  if (it != cache_.end()) return it->second.second;
  std::vector<double> vals;
  vals.reserve(points_.size());
  for (double p : points_) vals.push_back(eval(f, p, eval_options));
  return cache_.emplace(f.node(), std::make_pair(f, std::move(vals))).first->second.second;
}

bool Domain::is_zero(const CoefFn& f) const {
  if (f.kind() == Kind::Const) return f.is_zero();
  const auto& v = fingerprint(f);
  std::vector<double> scale(v.size(), 0.0);
  if (f.kind() == Kind::Sum) {
    for (const auto& t : f.args()) {
      const auto& tv = fingerprint(t);
      for (std::size_t i = 0; i < v.size(); ++i) scale[i] += std::abs(tv[i]);
    }
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) scale[i] = std::abs(v[i]);
  }
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > rel_tol * scale[i] + abs_floor) return false;
  return true;
}

std::optional<Scalar> Domain::as_constant(const CoefFn& f, long max_den) const {
  if (f.kind() == Kind::Const) return f.number();
  if (!f.depends_on_x()) return std::nullopt;
  const auto& v = fingerprint(f);
  double v0 = v.front();
  if (!std::isfinite(v0) || std::abs(v0) > 1e9) return std::nullopt;
  // Best rational approximation by continued fractions.
  long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double r = std::abs(v0);
  std::optional<Scalar> best;
  for (int it = 0; it < 24; ++it) {
    double a = std::floor(r);
    if (a > 1e9) break;
    long ai = static_cast<long>(a);
    long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    best = Scalar(v0 < 0 ? -p1 : p1, q1);
    if (r - a < 1e-12) break;
    r = 1.0 / (r - a);
  }
  if (!best || !equal(f, CoefFn(*best))) return std::nullopt;
  return best;
}

bool Domain::equal(const CoefFn& f, const CoefFn& g) const {
  if (f == g) return true;
  const auto& a = fingerprint(f);
  const auto& b = fingerprint(g);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double tol = rel_tol * std::max(std::abs(a[i]), std::abs(b[i])) + abs_floor;
    if (std::abs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

bool coef_eq(const CoefFn& f, const CoefFn& g, const Domain& dom) { return dom.equal(f, g); }

double coef_eval(const CoefFn& f, double x, double tol) {
  EvalOptions opt;
  opt.quad_tol = tol;
  return eval(f, x, opt);
}

bool certify_zero_free(const CoefFn& f, const Domain& dom, int samples) {
  int sign = 0;
  for (double p : dom.scan_points(samples)) {
    if (!dom.interval().interior(p)) continue;
    double v = 0.0;
    try {
      v = eval(f, p, dom.eval_options);
    } catch (const DomainError&) {
      return false;
    }
    int s = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (s == 0) return false;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

}  // namespace coef
}  // namespace veq
