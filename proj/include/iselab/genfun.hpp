#pragma once

#include <complex>
#include <vector>

#include "iselab/quadrature.hpp"
#include "iselab/rational.hpp"
#include "iselab/shapes.hpp"

namespace iselab {

// One tree edge contributes the generating function
//   F(z, zeta; k2) = 2 / (k2 + 2 sqrt2 sqrt(1-z) + 2 (1 - zeta)),
// where z marks mass, zeta marks backbone length and k2 = |k|^2 is the
// squared frequency carried by the edge. A shape with edge frequencies
// k_1..k_J contributes the product of its edge factors at zeta = 1.

// Exact rational coefficients [z^0 .. z^max_order] of sqrt(1 - z).
std::vector<Rational> sqrt_one_minus_z_series(int max_order);

// Exact coefficients [z^0 .. z^max_order] of (alpha + 2 sqrt2 sqrt(1-z))^{-power}
// for rational alpha with alpha^2 != 8. Rationalizing turns the denominator
// into the polynomial ((alpha^2 - 8) + 8 z)^power, so the coefficients follow
// an O(max_order * power) linear recurrence; no series inversion is needed.
std::vector<RootTwo> edge_resolvent_power_series(const Rational& alpha,
                                                 int power, int max_order);

// [z^n zeta^s] F(z, zeta; k2) = 2^{s+1} [z^n] (k2 + 2 + 2 sqrt2 sqrt(1-z))^{-(s+1)}.
RootTwo edge_joint_coeff(const Rational& k2, long n, long s);

// z-series of the zeta = 1 marginal, [z^n] F(z, 1; k2), orders 0..max_order.
std::vector<RootTwo> edge_marginal_series(const Rational& k2, int max_order);

// z-series of prod_j F(z, 1; k2_j) over the edges of a shape.
std::vector<RootTwo> product_marginal_series(const std::vector<Rational>& k2_edges,
                                             int max_order);

// [z^n] prod_j [zeta_j^{s_j}] F(z, zeta_j; k2_j): one backbone exponent per edge.
RootTwo product_joint_coeff(const std::vector<Rational>& k2_edges,
                            const std::vector<long>& s_edges, long n);

// Closed forms at zero frequency, used as independent cross-checks:
//   one edge: [z^n] F(z, 1; 0) = (sqrt2 / 2) binom(2n, n) 4^{-n};
//   J = 2m-3 edges: 2^{-(2m-3)/2} [z^n] (1-z)^{-(2m-3)/2}.
RootTwo exact_mass_coeff_two_zero(long n);
RootTwo exact_mass_coeff_zero(int m, long n);

// F(z, zeta; k2) at complex arguments, principal branch of sqrt(1-z).
// Requires |z| < 1 and |zeta| <= 1.
std::complex<double> eval_edge(double k2, std::complex<double> z,
                               std::complex<double> zeta);

struct ContourSpec {
  double radius = 0.0;       // 0 selects 0.9 for n <= 64, else 1 - 4/n
  int initial_nodes = 1024;
  int max_nodes = 1 << 22;
  double agree_tol = 1e-12;  // absolute agreement between node doublings
};

struct ContourResult {
  double value = 0.0;
  double imag_residual = 0.0;
  int nodes = 0;
};

// [z^n] prod_j F(z, 1; k2_j) by trapezoid sums on the circle |z| = radius,
// doubling the node count until two successive sums agree to agree_tol.
// Throws numerical_failure if max_nodes is reached without agreement.
ContourResult contour_mass_coeff(const std::vector<double>& k2_edges, long n,
                                 const ContourSpec& spec = {});

// Backbone weight of a length-s edge, (1 + k2/2)^{-(s+1)}, and its distance
// from the diffusive limit: |(1 + k2/(2n))^{-(floor(t n)+1)} - exp(-k2 t / 2)|.
double backbone_weight(double k2, long s);
double backbone_scaling_gap(double k2, double t, long n);

struct RatioRow {
  long n = 0;
  double value = 0.0;   // coefficient at the n-dependent scaled frequency
  double target = 0.0;  // predicted asymptotic form
  double ratio = 0.0;   // value / target
};

// Growth law of the mass coefficients: for each n,
//   value  = c_n^{(m)} at edge frequencies k2_j / sqrt(n),
//   target = (2 pi)^{-1/2} n^{m - 5/2} * ahat^{(m)} at the unscaled k2_j.
// Exact series extraction when all k2_j = 0, contour extraction otherwise.
std::vector<RatioRow> mass_growth_table(const Shape& shape,
                                        const std::vector<double>& k2_edges,
                                        const std::vector<long>& n_list,
                                        const QuadratureSpec& qspec = {});

// Joint growth law at backbone lengths s_j = floor(t_j sqrt n):
//   value  = [z^n] prod_j [zeta_j^{s_j}] F at frequencies k2_j / sqrt(n),
//   target = (2 pi)^{-1/2} n^{-1} * ahat integrand at (k2_j, t_j = s_j / sqrt n).
// Scaled frequencies are rounded to the nearest double before the exact
// coefficient extraction.
std::vector<RatioRow> joint_growth_table(const Shape& shape,
                                         const std::vector<double>& k2_edges,
                                         const std::vector<double>& t_edges,
                                         const std::vector<long>& n_list);

}  // namespace iselab
