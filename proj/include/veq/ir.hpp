#pragma once

// The free relative operated algebra in two presentations: bracketed words
// (OperatedExpr) and vertex/edge decorated rooted trees (TreeExpr).

#include "veq/coef.hpp"

#include <memory>
#include <string>
#include <vector>

namespace veq::ir {

using coef::CoefFn;
using coef::CoefPoly;
using coef::VarMonomial;

/// What canonicalization may consult. Without a table, brackets around
/// unknown-free payloads are kept formal; without a domain, merging and
/// zero-dropping are purely structural.
struct Context {
  const coef::OpTable* ops = nullptr;
  const coef::Domain* dom = nullptr;
  int depth_cap = 8;
};

struct OperatedMonomial;

struct Bracket {
  std::string op;
  std::shared_ptr<const OperatedMonomial> payload;

  std::string key() const;
};

/// head · vars · ⌊u₁⌋_{ω₁} ⋯ ⌊u_k⌋_{ω_k}. The head's rational content is
/// hoisted into the enclosing expression, so heads and payloads are monic;
/// brackets are sorted by key (the product is commutative).
struct OperatedMonomial {
  CoefFn head = CoefFn(1);
  VarMonomial vars;
  std::vector<Bracket> brackets;

  OperatedMonomial() : OperatedMonomial(CoefFn(1), {}) {}
  OperatedMonomial(CoefFn h, VarMonomial v, std::vector<Bracket> b = {});

  const std::string& key() const { return key_; }
  /// Key of everything but the head: terms with equal shape keys merge by
  /// adding heads.
  const std::string& shape_key() const { return shape_key_; }
  int depth() const;
  bool is_coefficient() const { return vars.empty() && brackets.empty(); }
  bool has_unknowns() const;

 private:
  std::string key_;
  std::string shape_key_;
};

/// 𝕜-linear combination of operated monomials, merged by shape.
class OperatedExpr {
 public:
  struct Term {
    Scalar coef;
    OperatedMonomial mono;
  };

  OperatedExpr() = default;
  OperatedExpr(const CoefFn& c);  // NOLINT(google-explicit-constructor)
  OperatedExpr(const CoefPoly& p);  // NOLINT(google-explicit-constructor)
  static OperatedExpr unknown(const std::string& name, const Scalar& exponent = Scalar(1));
  static OperatedExpr monomial(const Scalar& c, OperatedMonomial m);
  /// Normal form of an arbitrary list of terms.
  static OperatedExpr from_terms(std::vector<Term> terms, const Context& ctx = {});

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int depth() const;
  std::string key() const;

  friend OperatedExpr operator+(const OperatedExpr& a, const OperatedExpr& b);
  friend OperatedExpr operator-(const OperatedExpr& a, const OperatedExpr& b);
  friend OperatedExpr operator*(const OperatedExpr& a, const OperatedExpr& b);
  OperatedExpr operator-() const { return scaled(Scalar(-1)); }
  OperatedExpr scaled(const Scalar& c) const;
  OperatedExpr times(const CoefFn& c) const;
  /// Integer power (repeated product).
  OperatedExpr pow(long n) const;

  friend bool operator==(const OperatedExpr& a, const OperatedExpr& b) { return a.key() == b.key(); }

 private:
  std::vector<Term> terms_;
};

OperatedMonomial mono_mul(const OperatedMonomial& a, const OperatedMonomial& b, Scalar* content);

/// ⌊e⌋_op, distributed over the terms of e. Payloads without unknowns are
/// folded into the coefficient ρ_op(payload) when ctx has an operator table.
/// Throws DepthCapError beyond ctx.depth_cap.
OperatedExpr bracket(const std::string& op, const OperatedExpr& e, const Context& ctx = {});

/// Rebuilds e bottom-up: distributes brackets, folds coefficient payloads,
/// sorts, merges like monomials (semantically when ctx has a domain) and
/// drops vanishing terms. Idempotent.
OperatedExpr canonicalize(const OperatedExpr& e, const Context& ctx);

/// Semantic equality of canonical expressions on the domain.
bool equivalent(const OperatedExpr& a, const OperatedExpr& b, const Context& ctx);

/// Operators occurring anywhere in e.
std::vector<std::string> operators_in(const OperatedExpr& e);
/// Unknowns occurring anywhere in e.
std::vector<std::string> unknowns_in(const OperatedExpr& e);

// ---------------------------------------------------------------------------

struct DecoratedTree;
using TreePtr = std::shared_ptr<const DecoratedTree>;

struct Edge {
  std::string op;
  TreePtr child;
};

/// Nonplanar rooted tree: vertices carry a single-term decoration
/// (coefficient times monomial), edges carry operator names. Children are
/// kept sorted by (edge, child key).
struct DecoratedTree {
  CoefFn deco_fn = CoefFn(1);
  VarMonomial deco_vars;
  std::vector<Edge> children;

  DecoratedTree() : DecoratedTree(CoefFn(1), {}) {}
  DecoratedTree(CoefFn f, VarMonomial v, std::vector<Edge> kids = {});

  const std::string& key() const { return key_; }
  int height() const;
  std::size_t vertex_count() const;

 private:
  std::string key_;
};

/// •(c·m): a single vertex.
DecoratedTree vertex(const CoefFn& c, const VarMonomial& m = {});
/// Merges the roots; decorations multiply, children are unioned.
DecoratedTree graft(const DecoratedTree& t, const DecoratedTree& u);
/// New root decorated by 1 joined to t's root by an edge labelled op.
DecoratedTree extend(const std::string& op, const DecoratedTree& t);

class TreeExpr {
 public:
  struct Term {
    Scalar coef;
    DecoratedTree tree;
  };
  TreeExpr() = default;
  static TreeExpr from_terms(std::vector<Term> terms);
  const std::vector<Term>& terms() const { return terms_; }
  std::string key() const;
  friend bool operator==(const TreeExpr& a, const TreeExpr& b) { return a.key() == b.key(); }

 private:
  std::vector<Term> terms_;
};

/// η: c·∏⌊uᵢ⌋_{ωᵢ} ↦ •c ⊗̄ ∏ extend(ωᵢ, η(uᵢ)).
DecoratedTree word_to_tree(const OperatedMonomial& m);
TreeExpr word_to_tree(const OperatedExpr& e);
OperatedExpr tree_to_word(const DecoratedTree& t);
OperatedExpr tree_to_word(const TreeExpr& t);

}  // namespace veq::ir
