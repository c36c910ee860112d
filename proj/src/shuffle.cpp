#include "veq/shuffle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

namespace veq::shuffle {

namespace {

std::string letters_key(const std::vector<Letter>& tail) {
  std::string s;
  for (const auto& l : tail) {
    s += l.op;
    s += '(';
    s += l.factor.key();
    s += ')';
    s += ',';
  }
  return s;
}

/// Orders by tail length, then operator names, then the full tail key.
std::string sort_key(const TensorWord& w) {
  char len[16];
  std::snprintf(len, sizeof len, "%08zu", w.tail.size());
  std::string s = len;
  for (const auto& l : w.tail) {
    s += l.op;
    s += '\x01';
  }
  s += '\x02';
  s += letters_key(w.tail);
  return s;
}

/// Monic single-term pieces of a tail factor with their rational contents.
std::vector<std::pair<Scalar, CoefPoly>> split_factor(const CoefPoly& p) {
  std::vector<std::pair<Scalar, CoefPoly>> out;
  if (p.size() == 1) {
    const CoefFn& f = p.terms().begin()->second;
    if (f.kind() != coef::Kind::Sum && f.split_content().first.is_one()) {
      out.emplace_back(Scalar(1), p);
      return out;
    }
  }
  for (const auto& [m, f] : p.terms()) {
    std::vector<CoefFn> summands;
    if (f.kind() == coef::Kind::Sum) {
      summands = f.args();
    } else {
      summands.push_back(f);
    }
    for (const auto& s : summands) {
      auto [c, prim] = s.split_content();
      out.emplace_back(c, CoefPoly(prim, m));
    }
  }
  return out;
}

/// The only coefficient of a normalized tail factor.
const CoefFn& factor_fn(const CoefPoly& p) { return p.terms().begin()->second; }

std::string erased_tail_key(const std::vector<Letter>& tail) {
  std::string s;
  for (const auto& l : tail) s += l.op + "(" + l.factor.terms().begin()->first.key() + "),";
  return s;
}

bool same_tail(const std::vector<Letter>& a, const std::vector<Letter>& b, const coef::Domain& dom) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!dom.equal(factor_fn(a[i].factor), factor_fn(b[i].factor))) return false;
  return true;
}

/// Whether the words of one shape sum to zero as a function of
/// (x₀, x₁, …, xₙ): multilinear evaluation on tuples of sample points.
bool group_cancels(const std::vector<const TensorWord*>& group, const coef::Domain& dom) {
  const std::size_t n = group.front()->tail.size();
  auto pts = dom.sample_points();
  const std::size_t np = pts.size();
  std::vector<std::vector<std::size_t>> tuples;
  double total = std::pow(double(np), double(n + 1));
  if (total <= 4096.0) {
    std::vector<std::size_t> idx(n + 1, 0);
    for (;;) {
      tuples.push_back(idx);
      std::size_t k = 0;
      while (k <= n && ++idx[k] == np) idx[k++] = 0;
      if (k > n) break;
    }
  } else {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 1024; ++i) {
      std::vector<std::size_t> idx(n + 1);
      for (auto& v : idx) v = rng() % np;
      tuples.push_back(idx);
    }
  }
  std::set<coef::VarMonomial> monos;
  for (const auto* w : group)
    for (const auto& [m, c] : w->head.terms()) monos.insert(m);
  for (const auto& m : monos) {
    for (const auto& t : tuples) {
      double sum = 0.0, scale = 0.0;
      for (const auto* w : group) {
        auto it = w->head.terms().find(m);
        if (it == w->head.terms().end()) continue;
        double v = dom.fingerprint(it->second)[t[0]];
        for (std::size_t i = 0; i < n; ++i) v *= dom.fingerprint(factor_fn(w->tail[i].factor))[t[i + 1]];
        sum += v;
        scale += std::abs(v);
      }
      if (std::abs(sum) > dom.rel_tol * scale + dom.abs_floor) return false;
    }
  }
  return true;
}

const coef::VolterraOpSpec& spec(const Context& ctx, const std::string& op) {
  if (ctx.ops == nullptr) throw Error("operator table required to apply " + op);
  return ctx.ops->get(op);
}

std::vector<Letter> with_front(Letter first, const std::vector<Letter>& rest, std::size_t skip) {
  std::vector<Letter> t;
  t.reserve(rest.size() + 1);
  t.push_back(std::move(first));
  t.insert(t.end(), rest.begin() + static_cast<std::ptrdiff_t>(skip), rest.end());
  return t;
}

// Structural (domain-free) versions used inside the recursions.

TensorExpr pf_raw(const std::string& op, const TensorExpr& e, const Context& ctx) {
  std::vector<TensorWord> out;
  const std::string letter = letter_name(op);
  for (const auto& w : e.words()) {
    auto [a_part, plus] = coef::aug_split(w.head);
    if (!a_part.is_zero()) {
      CoefFn phi = coef::apply_rho_check(spec(ctx, op), a_part.a_part());
      if (w.tail.empty()) {
        out.push_back({CoefPoly(phi), {}});
      } else {
        out.push_back({CoefPoly(phi), w.tail});
        Letter first{w.tail[0].op, w.tail[0].factor.scaled(phi)};
        out.push_back({CoefPoly(CoefFn(-1)), with_front(std::move(first), w.tail, 1)});
      }
    }
    if (!plus.is_zero()) out.push_back({CoefPoly::one(), with_front(Letter{letter, plus}, w.tail, 0)});
  }
  return TensorExpr::from_words(std::move(out));
}

TensorExpr pf_twisted_raw(const std::string& op, const TensorExpr& e, const Context& ctx) {
  const coef::VolterraOpSpec& s = spec(ctx, op);
  const CoefFn tw = coef::twist(s);
  const CoefFn tw_inv = tw.recip();
  const std::string letter = letter_name(op);
  std::vector<TensorWord> out;
  for (const auto& w : e.words()) {
    auto [a_part, plus] = coef::aug_split(w.head);
    if (!a_part.is_zero()) {
      CoefFn r = coef::apply_rho(s, a_part.a_part());
      if (w.tail.empty()) {
        out.push_back({CoefPoly(r), {}});
      } else {
        out.push_back({CoefPoly(r), w.tail});
        Letter first{w.tail[0].op, w.tail[0].factor.scaled(tw_inv * r)};
        out.push_back({CoefPoly(-tw), with_front(std::move(first), w.tail, 1)});
      }
    }
    if (!plus.is_zero())
      out.push_back({CoefPoly(tw), with_front(Letter{letter, plus.scaled(tw_inv)}, w.tail, 0)});
  }
  return TensorExpr::from_words(std::move(out));
}

class Shuffler {
 public:
  explicit Shuffler(const Context& ctx) : ctx_(ctx) {}

  TensorExpr expr(const TensorExpr& u, const TensorExpr& v) {
    std::vector<TensorWord> out;
    for (const auto& a : u.words())
      for (const auto& b : v.words()) {
        const TensorExpr& r = words(a, b);
        out.insert(out.end(), r.words().begin(), r.words().end());
      }
    return TensorExpr::from_words(std::move(out));
  }

 private:
  const TensorExpr& words(const TensorWord& a, const TensorWord& b) {
    std::string ka = a.key(), kb = b.key();
    std::string key = ka < kb ? ka + "#" + kb : kb + "#" + ka;
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    TensorExpr r;
    if (a.tail.empty()) {
      r = TensorExpr(TensorWord{a.head * b.head, b.tail});
    } else if (b.tail.empty()) {
      r = TensorExpr(TensorWord{a.head * b.head, a.tail});
    } else {
      TensorWord abar{a.tail[0].factor, {a.tail.begin() + 1, a.tail.end()}};
      TensorWord bbar{b.tail[0].factor, {b.tail.begin() + 1, b.tail.end()}};
      TensorExpr pa = pf_raw(a.tail[0].op, TensorExpr(abar), ctx_);
      TensorExpr pb = pf_raw(b.tail[0].op, TensorExpr(bbar), ctx_);
      TensorExpr s = pf_raw(a.tail[0].op, expr(TensorExpr(abar), pb), ctx_) +
                     pf_raw(b.tail[0].op, expr(pa, TensorExpr(bbar)), ctx_);
      r = scale_head(a.head * b.head, s);
    }
    return memo_.emplace(std::move(key), std::move(r)).first->second;
  }

  const Context& ctx_;
  std::unordered_map<std::string, TensorExpr> memo_;
};

}  // namespace

std::string letter_name(const std::string& op) {
  if (op.rfind(coef::kCheckPrefix, 0) == 0) return op.substr(coef::kCheckPrefix.size());
  return op;
}

std::string TensorWord::tail_key() const { return letters_key(tail); }

std::string TensorWord::key() const { return head.key() + "@" + tail_key(); }

TensorExpr::TensorExpr(TensorWord w) { *this = from_words({std::move(w)}); }

TensorExpr TensorExpr::coefficient(const CoefPoly& c) { return TensorExpr(TensorWord{c, {}}); }

TensorExpr TensorExpr::from_words(std::vector<TensorWord> words, const Context& ctx) {
  std::map<std::string, TensorWord> merged;
  for (auto& w : words) {
    if (w.head.is_zero()) continue;
    std::vector<std::pair<Scalar, std::vector<Letter>>> splits{{Scalar(1), {}}};
    for (const auto& l : w.tail) {
      auto pieces = split_factor(l.factor);
      std::vector<std::pair<Scalar, std::vector<Letter>>> next;
      next.reserve(splits.size() * pieces.size());
      for (const auto& [c, t] : splits) {
        for (const auto& [pc, pp] : pieces) {
          auto t2 = t;
          t2.push_back({l.op, pp});
          next.emplace_back(c * pc, std::move(t2));
        }
      }
      splits = std::move(next);
    }
    for (auto& [c, tail] : splits) {
      std::string k = letters_key(tail);
      CoefPoly h = w.head.scaled(CoefFn(c));
      auto it = merged.find(k);
      if (it == merged.end()) {
        merged.emplace(std::move(k), TensorWord{std::move(h), std::move(tail)});
      } else {
        it->second.head = it->second.head + h;
      }
    }
  }

  std::vector<TensorWord> kept;
  kept.reserve(merged.size());
  for (auto& [k, w] : merged)
    if (!w.head.is_zero()) kept.push_back(std::move(w));

  if (ctx.dom != nullptr) {
    const coef::Domain& dom = *ctx.dom;
    std::vector<TensorWord> live;
    for (auto& w : kept) {
      bool vanishing = std::any_of(w.tail.begin(), w.tail.end(),
                                   [&](const Letter& l) { return dom.is_zero(factor_fn(l.factor)); });
      if (!vanishing) live.push_back(std::move(w));
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < live.size(); ++i) groups[erased_tail_key(live[i].tail)].push_back(i);
    std::vector<bool> drop(live.size(), false);
    for (auto& [k, idx] : groups) {
      for (std::size_t p = 0; p < idx.size(); ++p) {
        if (drop[idx[p]]) continue;
        for (std::size_t q = p + 1; q < idx.size(); ++q) {
          if (drop[idx[q]]) continue;
          if (same_tail(live[idx[p]].tail, live[idx[q]].tail, dom)) {
            live[idx[p]].head = live[idx[p]].head + live[idx[q]].head;
            drop[idx[q]] = true;
          }
        }
      }
      std::vector<const TensorWord*> group;
      for (std::size_t i : idx) {
        if (drop[i]) continue;
        live[i].head = live[i].head.pruned(dom);
        if (live[i].head.is_zero()) {
          drop[i] = true;
        } else {
          group.push_back(&live[i]);
        }
      }
      if (group.size() >= 2 && group_cancels(group, dom))
        for (std::size_t i : idx) drop[i] = true;
    }
    kept.clear();
    for (std::size_t i = 0; i < live.size(); ++i)
      if (!drop[i]) kept.push_back(std::move(live[i]));
  }

  // Sort on precomputed keys; tail_key() is too costly inside comparisons.
  std::vector<std::pair<std::string, std::size_t>> order;
  order.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) order.emplace_back(sort_key(kept[i]), i);
  std::sort(order.begin(), order.end());
  TensorExpr out;
  out.words_.reserve(kept.size());
  for (const auto& [k, i] : order) out.words_.push_back(std::move(kept[i]));
  return out;
}

std::string TensorExpr::key() const {
  std::string s;
  for (const auto& w : words_) s += w.key() + "+";
  return s;
}

std::size_t TensorExpr::max_length() const {
  std::size_t n = 0;
  for (const auto& w : words_) n = std::max(n, w.tail.size());
  return n;
}

TensorExpr operator+(const TensorExpr& a, const TensorExpr& b) {
  std::vector<TensorWord> ws = a.words_;
  ws.insert(ws.end(), b.words_.begin(), b.words_.end());
  return TensorExpr::from_words(std::move(ws));
}

TensorExpr operator-(const TensorExpr& a, const TensorExpr& b) { return a + (-b); }

TensorExpr TensorExpr::scaled(const Scalar& c) const {
  if (c.is_zero()) return {};
  TensorExpr r = *this;
  for (auto& w : r.words_) w.head = w.head.scaled(CoefFn(c));
  return r;
}

TensorExpr normalize(const TensorExpr& e, const Context& ctx) {
  return TensorExpr::from_words(e.words(), ctx);
}

bool equivalent(const TensorExpr& a, const TensorExpr& b, const Context& ctx) {
  return normalize(a - b, ctx).is_zero();
}

TensorExpr scale_head(const CoefPoly& c, const TensorExpr& e) {
  std::vector<TensorWord> ws;
  for (const auto& w : e.words()) ws.push_back({c * w.head, w.tail});
  return TensorExpr::from_words(std::move(ws));
}

TensorExpr pf_apply(const std::string& op, const TensorExpr& e, const Context& ctx) {
  return normalize(pf_raw(op, e, ctx), ctx);
}

TensorExpr pf_twisted(const std::string& op, const TensorExpr& e, const Context& ctx) {
  return normalize(pf_twisted_raw(op, e, ctx), ctx);
}

TensorExpr shuffle(const TensorExpr& u, const TensorExpr& v, const Context& ctx) {
  Shuffler sh(ctx);
  return normalize(sh.expr(u, v), ctx);
}

namespace {

TensorExpr linearize_monomial(const ir::OperatedMonomial& m, const Context& ctx, Shuffler& sh,
                              std::unordered_map<std::string, TensorExpr>& memo) {
  auto it = memo.find(m.key());
  if (it != memo.end()) return it->second;
  TensorExpr acc = TensorExpr::coefficient(CoefPoly(m.head, m.vars));
  for (const auto& b : m.brackets) {
    TensorExpr inner = linearize_monomial(*b.payload, ctx, sh, memo);
    acc = sh.expr(acc, pf_twisted_raw(b.op, inner, ctx));
  }
  memo.emplace(m.key(), acc);
  return acc;
}

}  // namespace

TensorExpr linearize(const ir::OperatedExpr& e, const Context& ctx) {
  if (e.depth() > ctx.depth_cap)
    throw DepthCapError("operator nesting depth " + std::to_string(e.depth()) + " exceeds the cap of " +
                        std::to_string(ctx.depth_cap));
  Shuffler sh(ctx);
  std::unordered_map<std::string, TensorExpr> memo;
  std::vector<TensorWord> out;
  for (const auto& t : e.terms()) {
    TensorExpr part = linearize_monomial(t.mono, ctx, sh, memo).scaled(t.coef);
    out.insert(out.end(), part.words().begin(), part.words().end());
  }
  return TensorExpr::from_words(std::move(out), ctx);
}

ir::OperatedExpr to_operated(const TensorExpr& e, const Context& ctx, bool twisted) {
  ir::Context formal;
  formal.depth_cap = 1 << 20;
  std::vector<ir::OperatedExpr::Term> all;
  auto collect = [&all](const ir::OperatedExpr& part) {
    all.insert(all.end(), part.terms().begin(), part.terms().end());
  };
  for (const auto& w : e.words()) {
    if (w.tail.empty()) {
      collect(ir::OperatedExpr(w.head));
      continue;
    }
    ir::OperatedExpr acc(w.tail.back().factor);
    for (std::size_t i = w.tail.size(); i-- > 0;) {
      const std::string& op = w.tail[i].op;
      const CoefPoly& outer = i == 0 ? w.head : w.tail[i - 1].factor;
      if (twisted) {
        CoefFn tw = coef::twist(spec(ctx, op));
        acc = ir::OperatedExpr(outer).times(tw.recip()) * ir::bracket(op, acc.times(tw), formal);
      } else {
        acc = ir::OperatedExpr(outer) * ir::bracket(std::string(coef::kCheckPrefix) + op, acc, formal);
      }
    }
    collect(acc);
  }
  return ir::OperatedExpr::from_terms(std::move(all));
}

bool tails_in_augmentation(const TensorExpr& e) {
  for (const auto& w : e.words())
    for (const auto& l : w.tail)
      if (l.factor.is_zero() || !l.factor.in_augmentation()) return false;
  return true;
}

}  // namespace veq::shuffle
