#include "veq/scalar.hpp"

#include "veq/errors.hpp"

#include <cctype>

namespace veq {

Scalar::Scalar(long num, long den) : q_(num, den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  q_.canonicalize();
}

Scalar& Scalar::operator/=(const Scalar& o) {
  if (o.is_zero()) throw DomainError("division by zero");
  q_ /= o.q_;
  return *this;
}

std::optional<Scalar> Scalar::parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::string s(text);
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  std::string digits;
  std::string frac;
  std::string den;
  bool seen_dot = false;
  bool seen_slash = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      if (seen_slash) den += c;
      else if (seen_dot) frac += c;
      else digits += c;
    } else if (c == '.' && !seen_dot && !seen_slash) {
      seen_dot = true;
    } else if (c == '/' && !seen_slash && !seen_dot) {
      seen_slash = true;
    } else {
      return std::nullopt;
    }
  }
  if (digits.empty() && frac.empty()) return std::nullopt;
  if (seen_slash && den.empty()) return std::nullopt;
  mpz_class n(digits.empty() ? std::string("0") : digits);
  mpz_class d(1);
  if (!frac.empty()) {
    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, frac.size());
    n = n * scale + mpz_class(frac);
    d = scale;
  }
  if (seen_slash) {
    d = mpz_class(den);
    if (d == 0) return std::nullopt;
  }
  mpq_class q(n, d);
  q.canonicalize();
  if (neg) q = -q;
  return Scalar(q);
}

std::optional<long> Scalar::to_long() const {
  if (!is_integer() || !q_.get_num().fits_slong_p()) return std::nullopt;
  return q_.get_num().get_si();
}

Scalar Scalar::pow(long e) const {
  if (e == 0) return Scalar(1);
  if (is_zero()) {
    if (e < 0) throw DomainError("zero raised to a negative power");
    return Scalar(0);
  }
  unsigned long m = static_cast<unsigned long>(e < 0 ? -e : e);
  mpz_class n, d;
  mpz_pow_ui(n.get_mpz_t(), q_.get_num_mpz_t(), m);
  mpz_pow_ui(d.get_mpz_t(), q_.get_den_mpz_t(), m);
  mpq_class r(n, d);
  r.canonicalize();
  if (e < 0) r = 1 / r;
  return Scalar(r);
}

std::optional<Scalar> Scalar::exact_root_pow(const Scalar& e) const {
  if (e.is_integer()) {
    auto k = e.to_long();
    if (!k) return std::nullopt;
    return pow(*k);
  }
  if (sign() < 0) return std::nullopt;
  if (is_zero()) {
    if (e.sign() > 0) return Scalar(0);
    return std::nullopt;
  }
  mpz_class r = e.den();
  mpz_class p = e.num();
  if (!r.fits_ulong_p() || !p.fits_slong_p()) return std::nullopt;
  unsigned long root = r.get_ui();
  mpz_class n, d;
  if (mpz_root(n.get_mpz_t(), q_.get_num_mpz_t(), root) == 0) return std::nullopt;
  if (mpz_root(d.get_mpz_t(), q_.get_den_mpz_t(), root) == 0) return std::nullopt;
  Scalar base(mpq_class(n, d));
  return base.pow(p.get_si());
}

mpz_class Scalar::floor() const {
  mpz_class out;
  mpz_fdiv_q(out.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
  return out;
}

}  // namespace veq
