#pragma once

// Operator-linear normal form: the tensor module
//   Sha(A, B) = ⊕_k 𝔄 ⊗ (𝕜Ω ⊗ 𝔄⁺)^{⊗k}
// with the operators P_ω, their twisted variants, the shuffle product, the
// linearization map from bracketed words, and readback to integrals.
//
// A word u₀ ⊗ (ω₁ ⊗ u₁) ⊗ ⋯ ⊗ (ωₙ ⊗ uₙ) denotes the iterated integral
//   u₀ · ρ̌_{ω₁}(u₁ · ρ̌_{ω₂}(u₂ ⋯ ρ̌_{ωₙ}(uₙ)))
// where ρ̌_ω f = ∫_a^x h_ω k_ω f dt.

#include "veq/coef.hpp"
#include "veq/ir.hpp"

#include <string>
#include <vector>

namespace veq::shuffle {

using coef::CoefFn;
using coef::CoefPoly;
using ir::Context;

struct Letter {
  std::string op;
  CoefPoly factor;
};

struct TensorWord {
  CoefPoly head;
  std::vector<Letter> tail;

  std::string tail_key() const;
  std::string key() const;
};

/// 𝕜-linear combination of tensor words in normal form: tail factors are
/// single monic terms (rational content and sums moved out by
/// multilinearity), words with equal tails are merged by adding heads, and
/// words are ordered by tail length, then operator names, then key.
class TensorExpr {
 public:
  TensorExpr() = default;
  TensorExpr(TensorWord w);  // NOLINT(google-explicit-constructor)
  static TensorExpr coefficient(const CoefPoly& c);
  /// Normal form; with a domain in ctx, also merges semantically equal
  /// tails, prunes vanishing heads and drops groups of words that cancel.
  static TensorExpr from_words(std::vector<TensorWord> words, const Context& ctx = {});

  const std::vector<TensorWord>& words() const { return words_; }
  bool is_zero() const { return words_.empty(); }
  std::string key() const;
  std::size_t max_length() const;

  friend TensorExpr operator+(const TensorExpr& a, const TensorExpr& b);
  friend TensorExpr operator-(const TensorExpr& a, const TensorExpr& b);
  TensorExpr operator-() const { return scaled(Scalar(-1)); }
  TensorExpr scaled(const Scalar& c) const;

  friend bool operator==(const TensorExpr& a, const TensorExpr& b) { return a.key() == b.key(); }

 private:
  std::vector<TensorWord> words_;
};

TensorExpr normalize(const TensorExpr& e, const Context& ctx);
/// Semantic equality (normalize(a - b) is empty).
bool equivalent(const TensorExpr& a, const TensorExpr& b, const Context& ctx);

/// Head multiplied by c; tail unchanged.
TensorExpr scale_head(const CoefPoly& c, const TensorExpr& e);

/// The operator P_ω on Sha with φ_ω = ρ̌_ω (needs ctx.ops for A-parts).
TensorExpr pf_apply(const std::string& op, const TensorExpr& e, const Context& ctx);
/// The twisted operator: 𝔞_ω P_ω(𝔞_ω^{-1} ·) written out by cases with ρ_ω.
TensorExpr pf_twisted(const std::string& op, const TensorExpr& e, const Context& ctx);

/// Shuffle product ⋄.
TensorExpr shuffle(const TensorExpr& u, const TensorExpr& v, const Context& ctx);

/// Products become ⋄ and ⌊·⌋_ω becomes the twisted P_ω. Operators named
/// "Int_ω" (the conjugates) are untwisted.
TensorExpr linearize(const ir::OperatedExpr& e, const Context& ctx);

/// Readback: nested ρ̌ brackets "Int_ω" by default; with `twisted`, the
/// form u₀ 𝔞₁⁻¹ ⌊𝔞₁ u₁ 𝔞₂⁻¹ ⌊𝔞₂ u₂ ⋯⌋_{ω₂}⌋_{ω₁} over the declared operators.
ir::OperatedExpr to_operated(const TensorExpr& e, const Context& ctx, bool twisted = false);

/// Every tail factor lies in the augmentation ideal.
bool tails_in_augmentation(const TensorExpr& e);

/// Letter name for an operator: conjugate names map to their base operator.
std::string letter_name(const std::string& op);

}  // namespace veq::shuffle
