#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "iselab/errors.hpp"
#include "iselab/genfun.hpp"
#include "iselab/ise.hpp"
#include "iselab/rational.hpp"
#include "iselab/shapes.hpp"

using namespace iselab;

namespace {

// Naive exact series helpers, independent of the rationalized recurrence in
// the library: multiply term by term, invert by the standard recursion, and
// take powers by repeated multiplication.
std::vector<RootTwo> naive_mul(const std::vector<RootTwo>& a,
                               const std::vector<RootTwo>& b, int N) {
  std::vector<RootTwo> out(N + 1);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; i + j <= N; ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::vector<RootTwo> naive_invert(const std::vector<RootTwo>& d, int N) {
  std::vector<RootTwo> u(N + 1);
  u[0] = d[0].inverse();
  for (int n = 1; n <= N; ++n) {
    RootTwo acc;
    for (int r = 1; r <= n; ++r) acc += d[r] * u[n - r];
    u[n] = -(acc * u[0]);
  }
  return u;
}

std::vector<RootTwo> denominator_series(const Rational& alpha, int N) {
  const auto w = sqrt_one_minus_z_series(N);
  std::vector<RootTwo> d(N + 1);
  d[0] = RootTwo(alpha, 2 * w[0]);
  for (int n = 1; n <= N; ++n) d[n] = RootTwo(Rational(0), 2 * w[n]);
  return d;
}

std::vector<RootTwo> naive_resolvent_power(const Rational& alpha, int power,
                                           int N) {
  const auto inv = naive_invert(denominator_series(alpha, N), N);
  auto acc = inv;
  for (int p = 1; p < power; ++p) acc = naive_mul(acc, inv, N);
  return acc;
}

// Double trapezoid sums over |z| = rz, |zeta| = 1: a numeric route to the
// joint coefficients that only uses the closed-form evaluation.
double double_contour_joint_coeff(double k2, int n, int s) {
  const int N = 256;
  const double rz = 0.6;
  std::complex<double> acc(0.0, 0.0);
  for (int a = 0; a < N; ++a) {
    const double theta = 2.0 * std::numbers::pi * a / N;
    const std::complex<double> z = std::polar(rz, theta);
    for (int b = 0; b < N; ++b) {
      const double phi = 2.0 * std::numbers::pi * b / N;
      const std::complex<double> zeta = std::polar(1.0, phi);
      acc += eval_edge(k2, z, zeta) *
             std::polar(1.0, -(n * theta + s * phi));
    }
  }
  acc /= static_cast<double>(N) * N;
  return acc.real() * std::pow(rz, -n);
}

double to_d(const RootTwo& x) { return x.to_double(); }

}  // namespace

TEST_CASE("quadratic field arithmetic is exact") {
  const RootTwo one_plus(Rational(1), Rational(1));
  const RootTwo one_minus(Rational(1), Rational(-1));
  CHECK(one_plus * one_minus == RootTwo(Rational(-1), Rational(0)));
  CHECK(one_plus.inverse() == RootTwo(Rational(-1), Rational(1)));
  CHECK((one_plus / one_plus) == RootTwo(1));
  CHECK(one_plus.norm() == Rational(-1));

  CHECK(RootTwo(Rational(-3), Rational(2)).sign() == -1);
  CHECK(RootTwo(Rational(3), Rational(-2)).sign() == 1);
  CHECK(RootTwo(Rational(-2), Rational(2)).sign() == 1);
  CHECK(RootTwo().sign() == 0);
  CHECK(RootTwo(Rational(0), Rational(-5)).sign() == -1);

  CHECK(RootTwo(Rational(0), Rational(1)).to_double() ==
        doctest::Approx(std::numbers::sqrt2).epsilon(1e-15));
  CHECK(RootTwo(Rational(1, 3), Rational(0)).to_string() == "1/3");
  CHECK(RootTwo(Rational(1), Rational(-1, 2)).to_string() == "1-1/2*sqrt2");
  CHECK_THROWS_AS(RootTwo().inverse(), std::domain_error);
}

TEST_CASE("square root series has the right leading terms and squares back") {
  const auto w = sqrt_one_minus_z_series(8);
  CHECK(w[0] == Rational(1));
  CHECK(w[1] == Rational(-1, 2));
  CHECK(w[2] == Rational(-1, 8));
  CHECK(w[3] == Rational(-1, 16));
  CHECK(w[4] == Rational(-5, 128));

  std::vector<RootTwo> wr(w.size());
  for (size_t i = 0; i < w.size(); ++i) wr[i] = RootTwo(w[i]);
  const auto sq = naive_mul(wr, wr, 8);
  CHECK(sq[0] == RootTwo(1));
  CHECK(sq[1] == RootTwo(-1));
  for (int n = 2; n <= 8; ++n) CHECK(sq[n].is_zero());
}

TEST_CASE("rationalized power recurrence matches naive series inversion") {
  const int N = 25;
  for (const Rational& alpha : {Rational(2), Rational(3), Rational(7, 3)}) {
    for (int power : {1, 2, 5}) {
      CAPTURE(alpha.get_str());
      CAPTURE(power);
      const auto fast = edge_resolvent_power_series(alpha, power, N);
      const auto slow = naive_resolvent_power(alpha, power, N);
      REQUIRE(fast.size() == slow.size());
      for (int n = 0; n <= N; ++n) CHECK(fast[n] == slow[n]);
    }
  }
  CHECK_THROWS_AS(edge_resolvent_power_series(Rational(2), 0, 5),
                  std::invalid_argument);
}

TEST_CASE("zero-frequency mass coefficients match the central binomial form") {
  const auto series = edge_marginal_series(Rational(0), 40);
  for (long n = 0; n <= 40; ++n) {
    CAPTURE(n);
    CHECK(series[n] == exact_mass_coeff_two_zero(n));
    CHECK(exact_mass_coeff_zero(2, n) == exact_mass_coeff_two_zero(n));
  }
  // n = 0 value is sqrt2 / 2.
  CHECK(exact_mass_coeff_two_zero(0) == RootTwo(Rational(0), Rational(1, 2)));
}

TEST_CASE("multi-edge products at zero frequency hit the closed form") {
  const auto m3 = product_marginal_series(std::vector<Rational>(3, Rational(0)), 20);
  for (long n = 0; n <= 20; ++n) CHECK(m3[n] == exact_mass_coeff_zero(3, n));
  const auto m4 = product_marginal_series(std::vector<Rational>(5, Rational(0)), 12);
  for (long n = 0; n <= 12; ++n) CHECK(m4[n] == exact_mass_coeff_zero(4, n));
}

TEST_CASE("closed-form evaluation agrees with the exact series on a disk point") {
  for (double k2 : {0.0, 1.0}) {
    const auto series = edge_marginal_series(rational_from_double(k2), 80);
    const double z = 0.3;
    double sum = 0.0;
    double zp = 1.0;
    for (int n = 0; n <= 80; ++n) {
      sum += to_d(series[n]) * zp;
      zp *= z;
    }
    const auto direct = eval_edge(k2, {z, 0.0}, {1.0, 0.0});
    CHECK(direct.imag() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(sum == doctest::Approx(direct.real()).epsilon(1e-12));
  }
  CHECK(eval_edge(0.0, {0.0, 0.0}, {0.0, 0.0}).real() ==
        doctest::Approx(std::numbers::sqrt2 - 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(eval_edge(0.0, {1.5, 0.0}, {0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(eval_edge(0.0, {0.0, 0.0}, {2.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(eval_edge(-1.0, {0.0, 0.0}, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("joint coefficients agree with a double contour oracle") {
  for (double k2 : {0.0, 1.0}) {
    for (int n : {0, 1, 3, 6}) {
      for (int s : {0, 1, 4}) {
        CAPTURE(k2);
        CAPTURE(n);
        CAPTURE(s);
        const double exact =
            to_d(edge_joint_coeff(rational_from_double(k2), n, s));
        const double numeric = double_contour_joint_coeff(k2, n, s);
        CHECK(exact == doctest::Approx(numeric).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("joint coefficients at zero frequency are nonnegative") {
  for (long n = 0; n <= 20; ++n)
    for (long s = 0; s <= 20; ++s) {
      CAPTURE(n);
      CAPTURE(s);
      CHECK(edge_joint_coeff(Rational(0), n, s).sign() >= 0);
      CHECK(edge_joint_coeff(Rational(1), n, s).sign() >= 0);
    }
}

TEST_CASE("contour extraction reproduces exact coefficients") {
  for (double k2 : {0.0, 1.0}) {
    const Rational k2r = rational_from_double(k2);
    for (int edges : {1, 3, 5}) {
      const auto series =
          product_marginal_series(std::vector<Rational>(edges, k2r), 30);
      for (long n : {0L, 1L, 2L, 5L, 10L, 17L, 30L}) {
        CAPTURE(k2);
        CAPTURE(edges);
        CAPTURE(n);
        const auto res =
            contour_mass_coeff(std::vector<double>(edges, k2), n);
        CHECK(std::abs(res.value - to_d(series[n])) <= 1e-10);
        CHECK(res.imag_residual <= 1e-10);
      }
    }
  }
}

TEST_CASE("contour extraction is radius independent and deterministic") {
  ContourSpec wide;
  wide.radius = 0.95;
  const auto a = contour_mass_coeff({1.0}, 12);
  const auto b = contour_mass_coeff({1.0}, 12, wide);
  CHECK(std::abs(a.value - b.value) <= 1e-11);
  const auto c = contour_mass_coeff({1.0}, 12);
  CHECK(a.value == c.value);
  CHECK(a.nodes == c.nodes);

  // Large-n path picks radius 1 - 4/n and still matches the exact value.
  const auto big = contour_mass_coeff({0.0}, 200);
  CHECK(std::abs(big.value - exact_mass_coeff_two_zero(200).to_double()) <=
        1e-10);
}

TEST_CASE("backbone weights converge to the diffusive limit") {
  CHECK(backbone_weight(0.0, 17) == 1.0);
  CHECK(backbone_weight(1.0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  for (double k2 : {0.5, 1.0, 2.0}) {
    for (double t : {0.5, 1.0, 2.0}) {
      CAPTURE(k2);
      CAPTURE(t);
      CHECK(backbone_scaling_gap(k2, t, 1000) < 2e-3);
      CHECK(backbone_scaling_gap(k2, t, 4000) <
            backbone_scaling_gap(k2, t, 1000));
    }
  }
}

TEST_CASE("mass coefficient growth approaches the density transform") {
  auto shapes2 = enumerate_shapes(2);
  const Shape& pair = shapes2[0];

  SUBCASE("one edge, zero frequency") {
    const auto rows = mass_growth_table(pair, {0.0}, {100, 400});
    CHECK(std::abs(rows[0].ratio - 1.0) < 0.01);
    CHECK(std::abs(rows[1].ratio - 1.0) < 0.005);
    CHECK(std::abs(rows[1].ratio - 1.0) < std::abs(rows[0].ratio - 1.0));
  }

  SUBCASE("one edge, nonzero frequency through the contour route") {
    const auto rows = mass_growth_table(pair, {1.0}, {400, 1600});
    CHECK(std::abs(rows[0].ratio - 1.0) < 0.10);
    CHECK(std::abs(rows[1].ratio - 1.0) < std::abs(rows[0].ratio - 1.0));
  }

  SUBCASE("three and five edges at zero frequency") {
    auto shapes3 = enumerate_shapes(3);
    const auto r3 = mass_growth_table(shapes3[0], {0.0, 0.0, 0.0}, {200});
    CHECK(std::abs(r3[0].ratio - 1.0) < 0.02);
    auto shapes4 = enumerate_shapes(4);
    const auto r4 =
        mass_growth_table(shapes4[0], std::vector<double>(5, 0.0), {200});
    CHECK(std::abs(r4[0].ratio - 1.0) < 0.02);
  }

  CHECK_THROWS_AS(mass_growth_table(pair, {0.0, 0.0}, {10}),
                  std::invalid_argument);
}

TEST_CASE("joint coefficient growth approaches the transform integrand") {
  auto shapes2 = enumerate_shapes(2);
  const Shape& pair = shapes2[0];

  const auto rows = joint_growth_table(pair, {0.0}, {1.0}, {400, 1600});
  CHECK(std::abs(rows[0].ratio - 1.0) < 0.10);
  CHECK(std::abs(rows[1].ratio - 1.0) < std::abs(rows[0].ratio - 1.0));

  auto shapes3 = enumerate_shapes(3);
  const auto r3 = joint_growth_table(shapes3[0], {0.0, 0.0, 0.0},
                                     {1.0, 1.0, 1.0}, {144});
  CHECK(r3[0].ratio > 0.5);
  CHECK(r3[0].ratio < 2.0);

  CHECK_THROWS_AS(joint_growth_table(pair, {0.0}, {-1.0}, {10}),
                  std::invalid_argument);
}
