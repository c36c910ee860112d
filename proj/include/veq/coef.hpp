#pragma once

// Coefficient algebra: functions of one real variable (CoefFn), monomials in
// the unknown functions (VarMonomial), the polynomial algebra A[Y] over the
// coefficient functions (CoefPoly) and separable Volterra operators acting on
// coefficient functions.

#include "veq/errors.hpp"
#include "veq/scalar.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace veq {

/// An open, closed or half-open interval of the real line; either end may be
/// infinite.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool lo_open = true;
  bool hi_open = true;

  bool contains(double x) const;
  bool interior(double x) const { return x > lo && x < hi; }
  bool bounded() const;
};

namespace coef {

enum class Kind { Const, X, Param, Sum, Prod, Exp, Sin, Cos, Int };

class CoefFn;
struct Node;

/// base^exponent inside a product.
struct Factor;

/// Immutable symbolic function of x, kept in a structural canonical form:
/// sums are flattened with like terms merged, products are power products
/// with a rational coefficient, products of sums are expanded, exponentials
/// are merged, and integrals are linear in their integrand. Values are
/// shared and never mutated after construction.
class CoefFn {
 public:
  CoefFn();  // the zero function
  CoefFn(Scalar c);  // NOLINT(google-explicit-constructor)
  CoefFn(long c) : CoefFn(Scalar(c)) {}  // NOLINT(google-explicit-constructor)

  static CoefFn x();
  /// Opaque named constant. `probe` is the value used when evaluating.
  static CoefFn param(const std::string& name);
  static CoefFn param(const std::string& name, double probe);
  static CoefFn exp(const CoefFn& arg);
  static CoefFn sin(const CoefFn& arg);
  static CoefFn cos(const CoefFn& arg);
  /// x ↦ ∫_lower^x integrand(t) dt. Polynomial, exp(qt), sin t and cos t
  /// integrands are integrated exactly; everything else stays opaque.
  static CoefFn integral(const Scalar& lower, const CoefFn& integrand);

  CoefFn pow(const Scalar& e) const;
  CoefFn recip() const { return pow(Scalar(-1)); }

  friend CoefFn operator+(const CoefFn& a, const CoefFn& b);
  friend CoefFn operator-(const CoefFn& a, const CoefFn& b);
  friend CoefFn operator*(const CoefFn& a, const CoefFn& b);
  friend CoefFn operator/(const CoefFn& a, const CoefFn& b);
  CoefFn operator-() const;

  Kind kind() const;
  /// Canonical structural key; two functions are structurally equal iff
  /// their keys are equal.
  const std::string& key() const;
  /// Const value, Prod coefficient, or Int lower limit.
  const Scalar& number() const;
  const std::string& name() const;
  double probe() const;
  /// Sum terms; single argument of Exp/Sin/Cos; integrand of Int.
  const std::vector<CoefFn>& args() const;
  const std::vector<Factor>& factors() const;

  bool is_zero() const { return kind() == Kind::Const && number().is_zero(); }
  bool is_one() const { return kind() == Kind::Const && number().is_one(); }
  std::optional<Scalar> as_const() const;
  bool depends_on_x() const;
  bool contains_integral() const;
  /// Rational content and the remaining function: f = content * primitive,
  /// where the primitive's leading rational coefficient is 1.
  std::pair<Scalar, CoefFn> split_content() const;

  friend bool operator==(const CoefFn& a, const CoefFn& b) { return a.key() == b.key(); }
  friend bool operator<(const CoefFn& a, const CoefFn& b) { return a.key() < b.key(); }

  const Node* node() const { return node_.get(); }

 private:
  explicit CoefFn(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
  friend struct Builder;
};

struct Factor {
  CoefFn base;
  Scalar exponent;
};

/// Replaces x by a rational constant. Throws DomainError at a pole and
/// Error when an integral node would need a numeric value.
CoefFn substitute_x(const CoefFn& f, const Scalar& value);

struct EvalOptions {
  double quad_tol = 1e-12;
};

/// f(x); integral nodes are evaluated by adaptive quadrature.
double eval(const CoefFn& f, double x, const EvalOptions& opt = {});

// ---------------------------------------------------------------------------

/// Monomial in the unknown functions with positive rational exponents.
class VarMonomial {
 public:
  VarMonomial() = default;
  static VarMonomial var(const std::string& name, const Scalar& exponent = Scalar(1));

  bool empty() const { return exps_.empty(); }
  const std::map<std::string, Scalar>& exponents() const { return exps_; }
  bool has_fractional_exponent() const;
  VarMonomial operator*(const VarMonomial& o) const;
  VarMonomial pow(const Scalar& e) const;
  std::string key() const;

  friend bool operator==(const VarMonomial& a, const VarMonomial& b) { return a.exps_ == b.exps_; }
  friend bool operator<(const VarMonomial& a, const VarMonomial& b);

 private:
  std::map<std::string, Scalar> exps_;
};

class Domain;

/// Element of A[Y]: coefficient functions times monomials in the unknowns,
/// at most one term per monomial and no structurally-zero coefficients.
class CoefPoly {
 public:
  using Terms = std::map<VarMonomial, CoefFn>;

  CoefPoly() = default;
  CoefPoly(const CoefFn& c);  // NOLINT(google-explicit-constructor)
  CoefPoly(const CoefFn& c, const VarMonomial& m);
  static CoefPoly one() { return CoefPoly(CoefFn(1)); }
  static CoefPoly unknown(const std::string& name, const Scalar& exponent = Scalar(1));

  const Terms& terms() const { return terms_ ? *terms_ : empty_terms(); }
  bool is_zero() const { return terms().empty(); }
  std::size_t size() const { return terms().size(); }
  /// Coefficient of the empty monomial (the A-part).
  CoefFn a_part() const;
  /// Everything but the A-part.
  CoefPoly plus_part() const;
  bool in_a() const { return is_zero() || (size() == 1 && terms().begin()->first.empty()); }
  bool in_augmentation() const { return !terms().contains(VarMonomial{}); }
  bool is_one() const;

  friend CoefPoly operator+(const CoefPoly& a, const CoefPoly& b);
  friend CoefPoly operator-(const CoefPoly& a, const CoefPoly& b);
  friend CoefPoly operator*(const CoefPoly& a, const CoefPoly& b);
  CoefPoly operator-() const;
  CoefPoly scaled(const CoefFn& c) const;

  /// Drops terms whose coefficient vanishes on the domain's sample points.
  CoefPoly pruned(const Domain& dom) const;
  std::string key() const;

  friend bool operator==(const CoefPoly& a, const CoefPoly& b) { return a.key() == b.key(); }

 private:
  void add_term(const VarMonomial& m, const CoefFn& c);
  static const Terms& empty_terms();
  /// Unshared terms for mutation (copy on write).
  Terms& mut();
  std::shared_ptr<const Terms> terms_;
  // Lazily computed; not safe for concurrent first use.
  mutable std::shared_ptr<const std::string> key_;
};

CoefPoly poly_mul(const CoefPoly& p, const CoefPoly& q);
/// (A-part, augmentation part); their sum is p.
std::pair<CoefPoly, CoefPoly> aug_split(const CoefPoly& p);

// ---------------------------------------------------------------------------

/// Separable Volterra operator f ↦ k(x) ∫_a^x h(t) f(t) dt.
struct VolterraOpSpec {
  std::string name;
  Scalar a;
  CoefFn k;
  CoefFn h;
  /// Derived operators (ρ̌ of a declared operator) are not user declarations.
  bool derived = false;
};

/// Prefix naming the conjugated operator ρ̌_ω = 𝔞_ω^{-1} ρ_ω 𝔞_ω.
inline constexpr std::string_view kCheckPrefix = "Int_";

/// k(x)/k(a). Throws MissingTwistError when k(a) is zero or not finite.
CoefFn twist(const VolterraOpSpec& op);
/// k(x) · ∫_a^x h(t) f(t) dt.
CoefFn apply_rho(const VolterraOpSpec& op, const CoefFn& f);
/// ∫_a^x h(t) k(t) f(t) dt, which equals 𝔞^{-1} ρ(𝔞 f).
CoefFn apply_rho_check(const VolterraOpSpec& op, const CoefFn& f);
/// The phantom operator with kernel h(t)k(t) realizing ρ̌_ω.
VolterraOpSpec check_operator(const VolterraOpSpec& op);

/// Operators of one problem, looked up by name. Names with the "Int_"
/// prefix resolve to the conjugate of the named operator.
class OpTable {
 public:
  OpTable() = default;
  explicit OpTable(std::vector<VolterraOpSpec> ops);

  void add(VolterraOpSpec op);
  const VolterraOpSpec& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  /// Declared operators in declaration order.
  const std::vector<VolterraOpSpec>& declared() const { return ops_; }
  std::optional<Scalar> lower_limit() const;

 private:
  std::vector<VolterraOpSpec> ops_;
  std::map<std::string, VolterraOpSpec> derived_;
};

// ---------------------------------------------------------------------------

/// Evaluation context for semantic equality: a problem interval, a sampling
/// window inside it near the common lower limit, and a fixed-seed set of
/// sample points. Fingerprints (values at the sample points) are memoized.
class Domain {
 public:
  static constexpr int kSamplePoints = 7;

  explicit Domain(Interval interval = {}, std::optional<double> anchor = std::nullopt,
                  std::uint64_t seed = 42);

  const Interval& interval() const { return interval_; }
  std::pair<double, double> window() const { return window_; }
  std::span<const double> sample_points() const { return points_; }
  /// n points strictly inside the sampling window, drawn from `seed`.
  std::vector<double> draw_points(int n, std::uint64_t seed) const;
  /// n evenly spread points covering the whole interval (or the window when
  /// the interval is unbounded).
  std::vector<double> scan_points(int n) const;

  const std::vector<double>& fingerprint(const CoefFn& f) const;
  /// True iff f vanishes at every sample point, relative to the magnitude
  /// of its terms (rel_tol), with an absolute floor.
  bool is_zero(const CoefFn& f) const;
  bool equal(const CoefFn& f, const CoefFn& g) const;
  /// The rational c with small denominator that f equals on the sample
  /// points, if any.
  std::optional<Scalar> as_constant(const CoefFn& f, long max_den = 1000) const;

  double rel_tol = 1e-9;
  double abs_floor = 1e-12;
  EvalOptions eval_options{};

 private:
  Interval interval_;
  std::pair<double, double> window_;
  std::vector<double> points_;
  mutable std::mutex mu_;
  mutable std::unordered_map<const Node*, std::pair<CoefFn, std::vector<double>>> cache_;
};

/// Semantic equality on the domain's sample points.
bool coef_eq(const CoefFn& f, const CoefFn& g, const Domain& dom);
double coef_eval(const CoefFn& f, double x, double tol);

/// Constant sign over `samples` points spread across the interval.
bool certify_zero_free(const CoefFn& f, const Domain& dom, int samples = 64);

}  // namespace coef
}  // namespace veq
