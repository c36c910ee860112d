#include "veq/ir.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace veq::ir {

std::string Bracket::key() const { return op + "[" + payload->key() + "]"; }

OperatedMonomial::OperatedMonomial(CoefFn h, VarMonomial v, std::vector<Bracket> b)
    : head(std::move(h)), vars(std::move(v)), brackets(std::move(b)) {
  std::vector<std::pair<std::string, Bracket>> keyed;
  keyed.reserve(brackets.size());
  for (auto& br : brackets) keyed.emplace_back(br.key(), std::move(br));
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  brackets.clear();
  shape_key_ = vars.key() + "{";
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i) shape_key_ += ';';
    shape_key_ += keyed[i].first;
    brackets.push_back(std::move(keyed[i].second));
  }
  shape_key_ += '}';
  key_ = head.key() + "|" + shape_key_;
}

int OperatedMonomial::depth() const {
  int d = 0;
  for (const auto& b : brackets) d = std::max(d, 1 + b.payload->depth());
  return d;
}

bool OperatedMonomial::has_unknowns() const {
  if (!vars.empty()) return true;
  return std::any_of(brackets.begin(), brackets.end(), [](const Bracket& b) { return b.payload->has_unknowns(); });
}

namespace {

/// Shape with every coefficient erased; candidates for semantic merging.
std::string erased_key(const OperatedMonomial& m) {
  std::vector<std::string> parts;
  for (const auto& b : m.brackets) parts.push_back(b.op + "[" + erased_key(*b.payload) + "]");
  std::sort(parts.begin(), parts.end());
  std::string s = m.vars.key() + "{";
  for (const auto& p : parts) s += p + ";";
  return s + "}";
}

bool same_brackets(const OperatedMonomial& a, const OperatedMonomial& b, const coef::Domain& dom);

bool same_monomial(const OperatedMonomial& a, const OperatedMonomial& b, const coef::Domain& dom) {
  return dom.equal(a.head, b.head) && same_brackets(a, b, dom);
}

bool same_brackets(const OperatedMonomial& a, const OperatedMonomial& b, const coef::Domain& dom) {
  if (!(a.vars == b.vars) || a.brackets.size() != b.brackets.size()) return false;
  std::vector<bool> used(b.brackets.size(), false);
  for (const auto& x : a.brackets) {
    bool found = false;
    for (std::size_t j = 0; j < b.brackets.size() && !found; ++j) {
      if (used[j] || b.brackets[j].op != x.op) continue;
      if (same_monomial(*x.payload, *b.brackets[j].payload, dom)) {
        used[j] = true;
        found = true;
      }
    }
    if (!found) return false;
  }
  return true;
}

void collect(const OperatedMonomial& m, std::set<std::string>& ops, std::set<std::string>& vars) {
  for (const auto& [v, e] : m.vars.exponents()) vars.insert(v);
  for (const auto& b : m.brackets) {
    ops.insert(b.op);
    collect(*b.payload, ops, vars);
  }
}

}  // namespace

OperatedExpr::OperatedExpr(const CoefFn& c) : OperatedExpr(CoefPoly(c)) {}

OperatedExpr::OperatedExpr(const CoefPoly& p) {
  std::vector<Term> ts;
  for (const auto& [m, c] : p.terms()) ts.push_back({Scalar(1), OperatedMonomial(c, m)});
  *this = from_terms(std::move(ts));
}

OperatedExpr OperatedExpr::unknown(const std::string& name, const Scalar& exponent) {
  return OperatedExpr(CoefPoly::unknown(name, exponent));
}

OperatedExpr OperatedExpr::monomial(const Scalar& c, OperatedMonomial m) {
  std::vector<Term> ts;
  ts.push_back({c, std::move(m)});
  return from_terms(std::move(ts));
}

OperatedExpr OperatedExpr::from_terms(std::vector<Term> terms, const Context& ctx) {
  struct Acc {
    CoefFn head;
    const OperatedMonomial* mono;
  };
  std::map<std::string, Acc> by_shape;
  for (const auto& t : terms) {
    if (t.coef.is_zero() || t.mono.head.is_zero()) continue;
    CoefFn h = CoefFn(t.coef) * t.mono.head;
    auto it = by_shape.find(t.mono.shape_key());
    if (it == by_shape.end()) {
      by_shape.emplace(t.mono.shape_key(), Acc{h, &t.mono});
    } else {
      it->second.head = it->second.head + h;
    }
  }
  std::vector<Acc> accs;
  accs.reserve(by_shape.size());
  for (auto& [k, a] : by_shape) accs.push_back(a);

  if (ctx.dom != nullptr) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < accs.size(); ++i) {
      if (!accs[i].mono->brackets.empty()) groups[erased_key(*accs[i].mono)].push_back(i);
    }
    for (auto& [k, idx] : groups) {
      for (std::size_t p = 0; p < idx.size(); ++p) {
        Acc& keep = accs[idx[p]];
        if (keep.head.is_zero()) continue;
        for (std::size_t q = p + 1; q < idx.size(); ++q) {
          Acc& other = accs[idx[q]];
          if (other.head.is_zero()) continue;
          if (same_brackets(*keep.mono, *other.mono, *ctx.dom)) {
            keep.head = keep.head + other.head;
            other.head = CoefFn();
          }
        }
      }
    }
  }

  OperatedExpr out;
  for (const auto& a : accs) {
    if (a.head.is_zero()) continue;
    CoefFn head = a.head;
    if (ctx.dom != nullptr) {
      if (ctx.dom->is_zero(head)) continue;
      // Sums such as sin² + cos² that are constant on the domain.
      if (head.kind() == coef::Kind::Sum)
        if (auto c = ctx.dom->as_constant(head)) head = CoefFn(*c);
    }
    auto [c, prim] = head.split_content();
    out.terms_.push_back({c, OperatedMonomial(prim, a.mono->vars, a.mono->brackets)});
  }
  std::sort(out.terms_.begin(), out.terms_.end(),
            [](const Term& a, const Term& b) { return a.mono.key() < b.mono.key(); });
  return out;
}

int OperatedExpr::depth() const {
  int d = 0;
  for (const auto& t : terms_) d = std::max(d, t.mono.depth());
  return d;
}

std::string OperatedExpr::key() const {
  std::string s;
  for (const auto& t : terms_) s += t.coef.str() + "*" + t.mono.key() + "+";
  return s;
}

OperatedExpr operator+(const OperatedExpr& a, const OperatedExpr& b) {
  std::vector<OperatedExpr::Term> ts = a.terms_;
  ts.insert(ts.end(), b.terms_.begin(), b.terms_.end());
  return OperatedExpr::from_terms(std::move(ts));
}

OperatedExpr operator-(const OperatedExpr& a, const OperatedExpr& b) { return a + (-b); }

OperatedMonomial mono_mul(const OperatedMonomial& a, const OperatedMonomial& b, Scalar* content) {
  auto [c, prim] = (a.head * b.head).split_content();
  if (content != nullptr) *content *= c;
  std::vector<Bracket> br = a.brackets;
  br.insert(br.end(), b.brackets.begin(), b.brackets.end());
  return OperatedMonomial(prim, a.vars * b.vars, std::move(br));
}

OperatedExpr operator*(const OperatedExpr& a, const OperatedExpr& b) {
  std::vector<OperatedExpr::Term> ts;
  ts.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& x : a.terms_) {
    for (const auto& y : b.terms_) {
      Scalar c = x.coef * y.coef;
      OperatedMonomial m = mono_mul(x.mono, y.mono, &c);
      ts.push_back({c, std::move(m)});
    }
  }
  return OperatedExpr::from_terms(std::move(ts));
}

OperatedExpr OperatedExpr::scaled(const Scalar& c) const {
  if (c.is_zero()) return {};
  OperatedExpr r = *this;
  for (auto& t : r.terms_) t.coef *= c;
  return r;
}

OperatedExpr OperatedExpr::times(const CoefFn& c) const { return *this * OperatedExpr(c); }

OperatedExpr OperatedExpr::pow(long n) const {
  OperatedExpr acc(CoefFn(1));
  for (long i = 0; i < n; ++i) acc = acc * *this;
  return acc;
}

OperatedExpr bracket(const std::string& op, const OperatedExpr& e, const Context& ctx) {
  std::vector<OperatedExpr::Term> ts;
  for (const auto& t : e.terms()) {
    if (t.mono.is_coefficient() && ctx.ops != nullptr) {
      CoefFn f = coef::apply_rho(ctx.ops->get(op), t.mono.head);
      ts.push_back({t.coef, OperatedMonomial(f, {})});
      continue;
    }
    if (1 + t.mono.depth() > ctx.depth_cap)
      throw DepthCapError("operator nesting depth exceeds the cap of " + std::to_string(ctx.depth_cap));
    std::vector<Bracket> br{Bracket{op, std::make_shared<const OperatedMonomial>(t.mono)}};
    ts.push_back({t.coef, OperatedMonomial(CoefFn(1), {}, std::move(br))});
  }
  return OperatedExpr::from_terms(std::move(ts), ctx);
}

namespace {

OperatedExpr canonical_monomial(const OperatedMonomial& m, const Context& ctx) {
  std::vector<OperatedExpr::Term> base;
  base.push_back({Scalar(1), OperatedMonomial(m.head, m.vars)});
  OperatedExpr acc = OperatedExpr::from_terms(std::move(base), ctx);
  for (const auto& b : m.brackets) {
    OperatedExpr payload = canonical_monomial(*b.payload, ctx);
    acc = acc * bracket(b.op, payload, ctx);
  }
  return acc;
}

}  // namespace

OperatedExpr canonicalize(const OperatedExpr& e, const Context& ctx) {
  std::vector<OperatedExpr::Term> ts;
  for (const auto& t : e.terms()) {
    OperatedExpr part = canonical_monomial(t.mono, ctx);
    for (const auto& p : part.terms()) ts.push_back({p.coef * t.coef, p.mono});
  }
  return OperatedExpr::from_terms(std::move(ts), ctx);
}

bool equivalent(const OperatedExpr& a, const OperatedExpr& b, const Context& ctx) {
  return canonicalize(a - b, ctx).is_zero();
}

std::vector<std::string> operators_in(const OperatedExpr& e) {
  std::set<std::string> ops, vars;
  for (const auto& t : e.terms()) collect(t.mono, ops, vars);
  return {ops.begin(), ops.end()};
}

std::vector<std::string> unknowns_in(const OperatedExpr& e) {
  std::set<std::string> ops, vars;
  for (const auto& t : e.terms()) collect(t.mono, ops, vars);
  return {vars.begin(), vars.end()};
}

// ---------------------------------------------------------------------------

DecoratedTree::DecoratedTree(CoefFn f, VarMonomial v, std::vector<Edge> kids)
    : deco_fn(std::move(f)), deco_vars(std::move(v)), children(std::move(kids)) {
  std::sort(children.begin(), children.end(), [](const Edge& a, const Edge& b) {
    if (a.op != b.op) return a.op < b.op;
    return a.child->key() < b.child->key();
  });
  key_ = "(" + deco_fn.key() + "|" + deco_vars.key();
  for (const auto& e : children) key_ += ":" + e.op + e.child->key();
  key_ += ")";
}

int DecoratedTree::height() const {
  int h = 0;
  for (const auto& e : children) h = std::max(h, 1 + e.child->height());
  return h;
}

std::size_t DecoratedTree::vertex_count() const {
  std::size_t n = 1;
  for (const auto& e : children) n += e.child->vertex_count();
  return n;
}

DecoratedTree vertex(const CoefFn& c, const VarMonomial& m) { return DecoratedTree(c, m); }

DecoratedTree graft(const DecoratedTree& t, const DecoratedTree& u) {
  std::vector<Edge> kids = t.children;
  kids.insert(kids.end(), u.children.begin(), u.children.end());
  return DecoratedTree(t.deco_fn * u.deco_fn, t.deco_vars * u.deco_vars, std::move(kids));
}

DecoratedTree extend(const std::string& op, const DecoratedTree& t) {
  return DecoratedTree(CoefFn(1), {}, {Edge{op, std::make_shared<const DecoratedTree>(t)}});
}

TreeExpr TreeExpr::from_terms(std::vector<Term> terms) {
  std::map<std::string, Term> merged;
  for (auto& t : terms) {
    if (t.coef.is_zero()) continue;
    auto it = merged.find(t.tree.key());
    if (it == merged.end()) {
      std::string k = t.tree.key();
      merged.emplace(std::move(k), std::move(t));
    } else {
      it->second.coef += t.coef;
    }
  }
  TreeExpr out;
  for (auto& [k, t] : merged)
    if (!t.coef.is_zero()) out.terms_.push_back(std::move(t));
  return out;
}

std::string TreeExpr::key() const {
  std::string s;
  for (const auto& t : terms_) s += t.coef.str() + "*" + t.tree.key() + "+";
  return s;
}

DecoratedTree word_to_tree(const OperatedMonomial& m) {
  DecoratedTree t = vertex(m.head, m.vars);
  for (const auto& b : m.brackets) t = graft(t, extend(b.op, word_to_tree(*b.payload)));
  return t;
}

TreeExpr word_to_tree(const OperatedExpr& e) {
  std::vector<TreeExpr::Term> ts;
  for (const auto& t : e.terms()) ts.push_back({t.coef, word_to_tree(t.mono)});
  return TreeExpr::from_terms(std::move(ts));
}

OperatedExpr tree_to_word(const DecoratedTree& t) {
  OperatedExpr acc(CoefPoly(t.deco_fn, t.deco_vars));
  for (const auto& e : t.children) acc = acc * bracket(e.op, tree_to_word(*e.child));
  return acc;
}

OperatedExpr tree_to_word(const TreeExpr& t) {
  OperatedExpr acc;
  for (const auto& term : t.terms()) acc = acc + tree_to_word(term.tree).scaled(term.coef);
  return acc;
}

}  // namespace veq::ir
