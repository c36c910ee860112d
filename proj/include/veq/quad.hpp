#pragma once

// Numeric oracle: evaluation of tensor words (iterated integrals) on a shared
// graded grid, naive nested quadrature, true Volterra evaluation of operated
// expressions, and numeric certification of identities.

#include "veq/coef.hpp"
#include "veq/integrate.hpp"
#include "veq/ir.hpp"
#include "veq/kernels.hpp"
#include "veq/shuffle.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace veq::quad {

using coef::CoefFn;
using coef::CoefPoly;
using coef::OpTable;
using coef::VolterraOpSpec;

/// Values substituted for the unknowns.
using Assignment = std::map<std::string, CoefFn>;

enum class Oracle { Grid, Naive };

struct EvalConfig {
  double tol = 1e-10;
  /// Grid intervals in the graded variable s, t = a + (x - a) s².
  std::size_t grid_intervals = 4096;
  Oracle oracle = Oracle::Grid;
  const kernels::KernelTable* kernels = nullptr;  // nullptr: active_kernels()
};

/// p(x) with the unknowns replaced by their assigned functions.
double eval_poly(const CoefPoly& p, const Assignment& sigma, double x, double tol = 1e-12);

/// u₀(x) · ρ̌_{ω₁}(u₁ ρ̌_{ω₂}(⋯)) (x) by cumulative Simpson on a graded grid,
/// innermost level first.
double eval_word(const shuffle::TensorWord& w, const OpTable& ops, const Assignment& sigma, double x,
                 const EvalConfig& cfg = {});
/// Same value by nested adaptive quadrature (exponential in the length).
double eval_word_naive(const shuffle::TensorWord& w, const OpTable& ops, const Assignment& sigma, double x,
                       double tol = 1e-11);

/// Sum over words; the grid oracle shares inner levels between words with
/// a common suffix.
double eval_tensor(const shuffle::TensorExpr& e, const OpTable& ops, const Assignment& sigma, double x,
                   const EvalConfig& cfg = {});

/// Operator applications evaluated as Volterra integrals
/// k(x) ∫_a^x h(t) (…)(t) dt by nested adaptive quadrature.
double eval_operated(const ir::OperatedExpr& e, const OpTable& ops, const Assignment& sigma, double x,
                     double tol = 1e-11);

struct Residual {
  std::string label;
  double x = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

struct CheckReport {
  std::string name;
  double max_abs = 0.0;
  double max_rel = 0.0;
  double tol = 0.0;
  bool pass = true;
  std::vector<Residual> residuals;

  void add(const std::string& label, double x, double lhs, double rhs);
  void merge(const CheckReport& other);
};

/// Magnitude below which residuals are judged absolutely.
inline constexpr double kMagnitudeFloor = 1e-12;

/// Numeric function of x.
using Fn = std::function<double(double)>;

/// A numeric side of an identity given an assignment.
using Side = std::function<double(const Assignment&, double)>;

CheckReport check_identity(const std::string& name, const Side& lhs, const Side& rhs,
                           const std::vector<Assignment>& pool, const std::vector<double>& xs, double tol);

/// Numeric realization of an operator: F ↦ k(x) ∫_a^x h(t) F(t) dt.
struct NumericOp {
  VolterraOpSpec spec;
  double a;
  double tol;

  NumericOp(VolterraOpSpec s, double tol = 1e-12);
  double operator()(const Fn& f, double x) const;
  Fn apply(Fn f) const;
  /// x ↦ k(x)/k(a).
  Fn twist() const;
};

/// P_α(f)P_β(g) = 𝔞_α P_β(𝔞_α⁻¹ P_α(f) g) + 𝔞_β P_α(𝔞_β⁻¹ f P_β(g)).
CheckReport check_mtrba(const VolterraOpSpec& alpha, const VolterraOpSpec& beta, const CoefFn& f,
                        const CoefFn& g, const std::vector<double>& xs, double tol);
/// Plain weight-0 identity P_α(f)P_β(g) = P_α(f P_β(g)) + P_β(P_α(f) g).
CheckReport check_rb(const VolterraOpSpec& alpha, const VolterraOpSpec& beta, const CoefFn& f, const CoefFn& g,
                     const std::vector<double>& xs, double tol);
/// R(f)R(g) = R(f R(g)) + R(R(f) g) − R(R(f) R(g)).
CheckReport check_reynolds(const VolterraOpSpec& r, const CoefFn& f, const CoefFn& g,
                           const std::vector<double>& xs, double tol);
/// Both identities for the mixed conjugates P̌_{ω,ω'} = 𝔞_{ω'}⁻¹ P_ω 𝔞_{ω'}
/// over all choices of α, β, γ, η in `family`.
CheckReport check_lemma(const std::vector<VolterraOpSpec>& family, const CoefFn& f, const CoefFn& g,
                        const std::vector<double>& xs, double tol);

/// {1, t, t², sin t, eᵗ, 1/(1+t²)}, keeping only functions that are positive
/// on the interval when `positive_only`.
std::vector<std::pair<std::string, CoefFn>> test_pool(const coef::Domain& dom, bool positive_only = false);

/// Pool assignments for the unknowns: every pool function for a single
/// unknown, otherwise `count` seeded random combinations.
std::vector<Assignment> pool_assignments(const std::vector<std::string>& unknowns, const coef::Domain& dom,
                                         bool positive_only, std::size_t count, std::uint64_t seed);

}  // namespace veq::quad
