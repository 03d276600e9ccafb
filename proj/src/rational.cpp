#include "iselab/rational.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iselab {

int RootTwo::sign() const {
  const int sa = sgn(a_);
  const int sb = sgn(b_);
  if (sb == 0) return sa;
  if (sa == 0) return sb;
  if (sa == sb) return sa;
  // Opposite signs: compare |a| against |b*sqrt2| via squares.
  const Rational diff = a_ * a_ - 2 * b_ * b_;
  const int sd = sgn(diff);
  if (sd == 0) return 0;  // unreachable for a,b != 0 since sqrt2 is irrational
  return sd > 0 ? sa : sb;
}

RootTwo& RootTwo::operator+=(const RootTwo& o) {
  a_ += o.a_;
  b_ += o.b_;
  return *this;
}

RootTwo& RootTwo::operator-=(const RootTwo& o) {
  a_ -= o.a_;
  b_ -= o.b_;
  return *this;
}

RootTwo& RootTwo::operator*=(const RootTwo& o) {
  const Rational a = a_ * o.a_ + 2 * b_ * o.b_;
  const Rational b = a_ * o.b_ + b_ * o.a_;
  a_ = a;
  b_ = b;
  return *this;
}

RootTwo RootTwo::inverse() const {
  const Rational n = norm();
  if (n == 0) throw std::domain_error("RootTwo: inverse of zero");
  return RootTwo(a_ / n, -b_ / n);
}

RootTwo& RootTwo::operator/=(const RootTwo& o) { return *this *= o.inverse(); }

namespace {

// Bits of magnitude of a rational, i.e. roughly log2 |q| (negative when
// |q| < 1). Only used to size float precision, so off-by-one is fine.
long magnitude_bits(const Rational& q) {
  if (q == 0) return 0;
  const long num = static_cast<long>(mpz_sizeinbase(q.get_num_mpz_t(), 2));
  const long den = static_cast<long>(mpz_sizeinbase(q.get_den_mpz_t(), 2));
  return num - den;
}

}  // namespace

double RootTwo::to_double() const {
  if (b_ == 0) return a_.get_d();
  if (a_ == 0) return b_.get_d() * 1.4142135623730950488;
  // The two parts can be huge while their sum is tiny; the field norm bounds
  // the value from below, |a + b sqrt2| >= |a^2 - 2 b^2| / (|a| + sqrt2 |b|),
  // which gives the precision needed for a faithful sum.
  const long upper = std::max(magnitude_bits(a_), magnitude_bits(b_)) + 2;
  const long norm_bits = magnitude_bits(norm());
  const long prec = std::max(192L, 2 * upper - norm_bits + 96);
  mpf_class acc(0, static_cast<unsigned long>(prec));
  mpf_class root(2, static_cast<unsigned long>(prec));
  root = sqrt(root);
  acc = mpf_class(a_, static_cast<unsigned long>(prec)) +
        mpf_class(b_, static_cast<unsigned long>(prec)) * root;
  return acc.get_d();
}

std::string RootTwo::to_string() const {
  if (b_ == 0) return a_.get_str();
  std::string out = a_.get_str();
  if (sgn(b_) >= 0) out += "+";
  out += b_.get_str();
  out += "*sqrt2";
  return out;
}

Rational rational_from_double(double x) {
  mpq_class q;
  q = x;  // exact: doubles are dyadic rationals
  q.canonicalize();
  return q;
}

double log_rational(const Rational& q) {
  if (q <= 0) throw std::domain_error("log of a nonpositive rational");
  long num_exp = 0, den_exp = 0;
  const double num = mpz_get_d_2exp(&num_exp, q.get_num_mpz_t());
  const double den = mpz_get_d_2exp(&den_exp, q.get_den_mpz_t());
  constexpr double ln2 = 0.6931471805599453094;
  return std::log(num) - std::log(den) + (num_exp - den_exp) * ln2;
}

Rational parse_rational(const std::string& text) {
  const auto is_int = [](const std::string& s) {
    if (s.empty()) return false;
    const size_t start = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (start == s.size()) return false;
    for (size_t i = start; i < s.size(); ++i)
      if (s[i] < '0' || s[i] > '9') return false;
    return true;
  };
  const size_t slash = text.find('/');
  const std::string num = text.substr(0, slash);
  if (!is_int(num)) throw std::invalid_argument("bad rational: " + text);
  if (slash != std::string::npos) {
    const std::string den = text.substr(slash + 1);
    if (!is_int(den) || den[0] == '-' || den[0] == '+' ||
        mpz_class(den) == 0)
      throw std::invalid_argument("bad rational: " + text);
  }
  Rational q(text);
  q.canonicalize();
  return q;
}

}  // namespace iselab
