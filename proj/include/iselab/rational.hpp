#pragma once

#include <gmpxx.h>

#include <string>

namespace iselab {

using Rational = mpq_class;

// Element of the quadratic field Q(sqrt2), stored as a + b*sqrt2 with exact
// rational a, b. Closed under +, -, *, / because the field norm a^2 - 2 b^2
// vanishes only at 0.
class RootTwo {
 public:
  RootTwo() : a_(0), b_(0) {}
  RootTwo(long v) : a_(v), b_(0) {}  // NOLINT(google-explicit-constructor)
  RootTwo(Rational v) : a_(std::move(v)), b_(0) {}  // NOLINT
  RootTwo(Rational a, Rational b) : a_(std::move(a)), b_(std::move(b)) {}

  const Rational& rational_part() const { return a_; }
  const Rational& sqrt2_part() const { return b_; }

  bool is_zero() const { return a_ == 0 && b_ == 0; }
  Rational norm() const { return a_ * a_ - 2 * b_ * b_; }

  // Exact sign of the real value a + b*sqrt2.
  int sign() const;

  RootTwo operator-() const { return RootTwo(-a_, -b_); }
  RootTwo& operator+=(const RootTwo& o);
  RootTwo& operator-=(const RootTwo& o);
  RootTwo& operator*=(const RootTwo& o);
  RootTwo& operator/=(const RootTwo& o);

  friend RootTwo operator+(RootTwo x, const RootTwo& y) { return x += y; }
  friend RootTwo operator-(RootTwo x, const RootTwo& y) { return x -= y; }
  friend RootTwo operator*(RootTwo x, const RootTwo& y) { return x *= y; }
  friend RootTwo operator/(RootTwo x, const RootTwo& y) { return x /= y; }
  friend bool operator==(const RootTwo& x, const RootTwo& y) {
    return x.a_ == y.a_ && x.b_ == y.b_;
  }
  friend bool operator!=(const RootTwo& x, const RootTwo& y) { return !(x == y); }

  RootTwo inverse() const;

  // Conversion through 256-bit floats so that cancellation between the two
  // parts cannot contaminate the double result.
  double to_double() const;

  // "p/q" when b = 0, otherwise "p/q+r/s*sqrt2" (with canonical mpq printing).
  std::string to_string() const;

 private:
  Rational a_;
  Rational b_;
};

// Exact rational made from a double (doubles are dyadic rationals).
Rational rational_from_double(double x);

// Parse "p" or "p/q" (optional sign, decimal digits); canonicalized.
Rational parse_rational(const std::string& text);

// Natural log of a positive rational, safe far outside double range.
double log_rational(const Rational& q);

}  // namespace iselab
