#pragma once

#include <gmpxx.h>

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace veq {

/// Exact rational number of the ground field. Always held in lowest terms
/// with a positive denominator.
class Scalar {
 public:
  Scalar() = default;
  Scalar(long v) : q_(v) {}  // NOLINT(google-explicit-constructor)
  Scalar(long num, long den);
  explicit Scalar(const mpq_class& q) : q_(q) { q_.canonicalize(); }

  /// Parses "3", "-7/2" or a finite decimal such as "0.25" exactly.
  static std::optional<Scalar> parse(std::string_view text);

  const mpq_class& raw() const { return q_; }
  mpz_class num() const { return q_.get_num(); }
  mpz_class den() const { return q_.get_den(); }

  bool is_zero() const { return sgn(q_) == 0; }
  bool is_one() const { return q_ == 1; }
  bool is_integer() const { return q_.get_den() == 1; }
  int sign() const { return sgn(q_); }
  double to_double() const { return q_.get_d(); }
  std::optional<long> to_long() const;

  std::string str() const { return q_.get_str(); }
  std::size_t hash() const { return std::hash<std::string>{}(str()); }

  Scalar operator-() const { return Scalar(mpq_class(-q_)); }
  Scalar& operator+=(const Scalar& o) { q_ += o.q_; return *this; }
  Scalar& operator-=(const Scalar& o) { q_ -= o.q_; return *this; }
  Scalar& operator*=(const Scalar& o) { q_ *= o.q_; return *this; }
  Scalar& operator/=(const Scalar& o);

  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(Scalar a, const Scalar& b) { return a *= b; }
  friend Scalar operator/(Scalar a, const Scalar& b) { return a /= b; }

  friend bool operator==(const Scalar& a, const Scalar& b) { return a.q_ == b.q_; }
  friend std::strong_ordering operator<=>(const Scalar& a, const Scalar& b) {
    int c = cmp(a.q_, b.q_);
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

  Scalar abs() const { return sign() < 0 ? -*this : *this; }
  /// Integer power; throws DomainError for 0 to a negative power.
  Scalar pow(long e) const;
  /// Exact q^(p/r) when the result is rational, std::nullopt otherwise.
  std::optional<Scalar> exact_root_pow(const Scalar& e) const;
  /// Largest integer <= this.
  mpz_class floor() const;

 private:
  mpq_class q_{0};
};

}  // namespace veq
