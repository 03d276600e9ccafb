#include "iselab/genfun.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "iselab/errors.hpp"
#include "iselab/ise.hpp"

namespace iselab {

namespace {

Rational binom_rational(unsigned long n, unsigned long k) {
  mpz_class b;
  mpz_bin_uiui(b.get_mpz_t(), n, k);
  return Rational(b);
}

Rational pow2_rational(unsigned long e) {
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 2, e);
  return Rational(p);
}

std::vector<Rational> powers_of(const Rational& x, int max_exp) {
  std::vector<Rational> p(static_cast<size_t>(max_exp) + 1);
  p[0] = 1;
  for (int i = 1; i <= max_exp; ++i) p[i] = p[i - 1] * x;
  return p;
}

std::vector<RootTwo> convolve_truncated(const std::vector<RootTwo>& a,
                                        const std::vector<RootTwo>& b,
                                        int max_order) {
  std::vector<RootTwo> out(static_cast<size_t>(max_order) + 1);
  for (int i = 0; i <= max_order && i < static_cast<int>(a.size()); ++i) {
    if (a[i].is_zero()) continue;
    const int jmax = std::min<int>(max_order - i, static_cast<int>(b.size()) - 1);
    for (int j = 0; j <= jmax; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

void require_frequency(const Rational& k2) {
  if (k2 < 0) throw std::invalid_argument("edge frequency k2 must be >= 0");
}

}  // namespace

std::vector<Rational> sqrt_one_minus_z_series(int max_order) {
  if (max_order < 0) throw std::invalid_argument("max_order must be >= 0");
  std::vector<Rational> w(static_cast<size_t>(max_order) + 1);
  w[0] = 1;
  for (int n = 1; n <= max_order; ++n)
    w[n] = w[n - 1] * Rational(2 * n - 3) / Rational(2 * n);
  return w;
}

std::vector<RootTwo> edge_resolvent_power_series(const Rational& alpha,
                                                 int power, int max_order) {
  if (power < 1) throw std::invalid_argument("power must be >= 1");
  if (max_order < 0) throw std::invalid_argument("max_order must be >= 0");
  const Rational gamma = alpha * alpha - 8;
  if (gamma == 0) throw std::invalid_argument("alpha^2 = 8 is outside the field");

  const int N = max_order;
  const auto w = sqrt_one_minus_z_series(N);
  const auto alpha_pow = powers_of(alpha, power);
  const auto eight_pow = powers_of(Rational(8), power / 2 + 1);

  // (alpha - 2 sqrt2 W)^power = P(z) + sqrt2 Q(z) W with W = sqrt(1-z):
  // even binomial terms give (1-z)^i polynomials, odd ones carry one W.
  std::vector<Rational> p_coeff(static_cast<size_t>(N) + 1, Rational(0));
  std::vector<Rational> q_coeff(static_cast<size_t>(N) + 1, Rational(0));
  for (int r = 0; r <= power; ++r) {
    const int i = r / 2;
    Rational c = binom_rational(power, r) * alpha_pow[power - r] * eight_pow[i];
    if (r % 2 == 1) c *= -2;
    auto& dest = (r % 2 == 0) ? p_coeff : q_coeff;
    // expand c * (1-z)^i
    for (int j = 0; j <= std::min(i, N); ++j) {
      Rational term = c * binom_rational(i, j);
      if (j % 2 == 1) term = -term;
      dest[j] += term;
    }
  }

  // rhs = P + sqrt2 * (Q * W) as a RootTwo series.
  std::vector<RootTwo> rhs(static_cast<size_t>(N) + 1);
  const int qdeg = power / 2;
  for (int n = 0; n <= N; ++n) {
    Rational sq(0);
    for (int j = 0; j <= std::min(n, qdeg); ++j) sq += q_coeff[j] * w[n - j];
    rhs[n] = RootTwo(p_coeff[n], sq);
  }

  // Divide by ((alpha^2 - 8) + 8 z)^power, a degree-`power` polynomial.
  std::vector<Rational> v(static_cast<size_t>(power) + 1);
  const auto gamma_pow = powers_of(gamma, power);
  const auto eight_pow_full = powers_of(Rational(8), power);
  for (int r = 0; r <= power; ++r)
    v[r] = binom_rational(power, r) * gamma_pow[power - r] * eight_pow_full[r];
  const Rational inv_v0 = Rational(1) / v[0];

  std::vector<RootTwo> u(static_cast<size_t>(N) + 1);
  for (int n = 0; n <= N; ++n) {
    RootTwo acc = rhs[n];
    const int rmax = std::min(n, power);
    for (int r = 1; r <= rmax; ++r) acc -= RootTwo(v[r]) * u[n - r];
    u[n] = acc * RootTwo(inv_v0);
  }
  return u;
}

RootTwo edge_joint_coeff(const Rational& k2, long n, long s) {
  require_frequency(k2);
  if (n < 0 || s < 0) throw std::invalid_argument("n and s must be >= 0");
  const auto series = edge_resolvent_power_series(k2 + 2, static_cast<int>(s) + 1,
                                                  static_cast<int>(n));
  return series[n] * RootTwo(pow2_rational(static_cast<unsigned long>(s) + 1));
}

std::vector<RootTwo> edge_marginal_series(const Rational& k2, int max_order) {
  require_frequency(k2);
  auto series = edge_resolvent_power_series(k2, 1, max_order);
  for (auto& c : series) c *= RootTwo(2);
  return series;
}

std::vector<RootTwo> product_marginal_series(const std::vector<Rational>& k2_edges,
                                             int max_order) {
  if (k2_edges.empty()) throw std::invalid_argument("need at least one edge");
  auto acc = edge_marginal_series(k2_edges[0], max_order);
  for (size_t j = 1; j < k2_edges.size(); ++j)
    acc = convolve_truncated(acc, edge_marginal_series(k2_edges[j], max_order),
                             max_order);
  return acc;
}

RootTwo product_joint_coeff(const std::vector<Rational>& k2_edges,
                            const std::vector<long>& s_edges, long n) {
  if (k2_edges.empty() || k2_edges.size() != s_edges.size())
    throw std::invalid_argument("one backbone exponent per edge required");
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  const int N = static_cast<int>(n);
  std::vector<RootTwo> acc;
  for (size_t j = 0; j < k2_edges.size(); ++j) {
    require_frequency(k2_edges[j]);
    if (s_edges[j] < 0) throw std::invalid_argument("s must be >= 0");
    auto series = edge_resolvent_power_series(
        k2_edges[j] + 2, static_cast<int>(s_edges[j]) + 1, N);
    const RootTwo scale(pow2_rational(static_cast<unsigned long>(s_edges[j]) + 1));
    for (auto& c : series) c *= scale;
    acc = (j == 0) ? std::move(series) : convolve_truncated(acc, series, N);
  }
  return acc[n];
}

RootTwo exact_mass_coeff_two_zero(long n) {
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  mpz_class central;
  mpz_bin_uiui(central.get_mpz_t(), 2 * static_cast<unsigned long>(n),
               static_cast<unsigned long>(n));
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 2, 2 * static_cast<unsigned long>(n) + 1);
  Rational b(central, den);
  b.canonicalize();
  return RootTwo(Rational(0), b);
}

RootTwo exact_mass_coeff_zero(int m, long n) {
  if (m < 2) throw std::invalid_argument("m must be >= 2");
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  const long J = 2L * m - 3;
  // [z^n](1-z)^{-J/2} = prod_{i<n} (J/2 + i) / n!
  mpz_class num(1), den(1);
  for (long i = 0; i < n; ++i) {
    num *= (J + 2 * i);
    den *= 2 * (i + 1);
  }
  Rational r(num, den);
  r.canonicalize();
  // prefactor 2^{-J/2} = sqrt2 * 2^{-(m-1)}
  r /= pow2_rational(static_cast<unsigned long>(m) - 1);
  return RootTwo(Rational(0), r);
}

std::complex<double> eval_edge(double k2, std::complex<double> z,
                               std::complex<double> zeta) {
  if (k2 < 0) throw std::invalid_argument("edge frequency k2 must be >= 0");
  if (std::abs(z) >= 1.0)
    throw std::invalid_argument("eval_edge requires |z| < 1");
  if (std::abs(zeta) > 1.0 + 1e-15)
    throw std::invalid_argument("eval_edge requires |zeta| <= 1");
  const std::complex<double> w = std::sqrt(std::complex<double>(1.0, 0.0) - z);
  const std::complex<double> denom =
      k2 + 2.0 * std::numbers::sqrt2 * w + 2.0 * (1.0 - zeta);
  return 2.0 / denom;
}

namespace {

std::complex<double> contour_product(const std::vector<double>& k2_edges,
                                     std::complex<double> z) {
  std::complex<double> prod(1.0, 0.0);
  for (double k2 : k2_edges) prod *= eval_edge(k2, z, 1.0);
  return prod;
}

// Mean of f(r e^{i theta_j}) (r e^{i theta_j})^{-n} over stride-spaced nodes of
// the 2N-point grid (stride 2 offset 0 reuses the N-point sum; offset 1 adds
// the new odd nodes).
std::complex<double> trapezoid_partial(const std::vector<double>& k2_edges,
                                       long n, double radius, long total_nodes,
                                       long offset, long stride) {
  const double rpow = std::pow(radius, -static_cast<double>(n));
  std::complex<double> sum(0.0, 0.0);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(total_nodes);
  for (long j = offset; j < total_nodes; j += stride) {
    const double theta = step * static_cast<double>(j);
    const std::complex<double> z = std::polar(radius, theta);
    // z^{-n} with the angle reduced exactly modulo the node count
    const long phase = (n % total_nodes) * j % total_nodes;
    const std::complex<double> zinv_n =
        std::polar(rpow, -step * static_cast<double>(phase));
    sum += contour_product(k2_edges, z) * zinv_n;
  }
  const long count = (total_nodes - offset + stride - 1) / stride;
  return sum / static_cast<double>(count);
}

}  // namespace

ContourResult contour_mass_coeff(const std::vector<double>& k2_edges, long n,
                                 const ContourSpec& spec) {
  if (k2_edges.empty()) throw std::invalid_argument("need at least one edge");
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  double radius = spec.radius;
  if (radius == 0.0)
    radius = (n <= 64) ? 0.9 : 1.0 - 4.0 / static_cast<double>(n);
  if (radius <= 0.0 || radius >= 1.0)
    throw std::invalid_argument("contour radius must lie in (0, 1)");

  long nodes = spec.initial_nodes;
  std::complex<double> sum =
      trapezoid_partial(k2_edges, n, radius, nodes, 0, 1);
  double last_gap = std::numeric_limits<double>::infinity();
  while (2 * nodes <= spec.max_nodes) {
    const std::complex<double> odd =
        trapezoid_partial(k2_edges, n, radius, 2 * nodes, 1, 2);
    const std::complex<double> refined = 0.5 * (sum + odd);
    nodes *= 2;
    last_gap = std::abs(refined.real() - sum.real());
    sum = refined;
    if (last_gap <= spec.agree_tol) {
      ContourResult res;
      res.value = sum.real();
      res.imag_residual = std::abs(sum.imag());
      res.nodes = static_cast<int>(nodes);
      return res;
    }
  }
  throw numerical_failure("contour trapezoid sums did not stabilize", last_gap);
}

double backbone_weight(double k2, long s) {
  if (k2 < 0) throw std::invalid_argument("edge frequency k2 must be >= 0");
  if (s < 0) throw std::invalid_argument("s must be >= 0");
  return std::pow(1.0 + 0.5 * k2, -static_cast<double>(s + 1));
}

double backbone_scaling_gap(double k2, double t, long n) {
  if (t <= 0) throw std::invalid_argument("t must be > 0");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const long s = static_cast<long>(std::floor(t * static_cast<double>(n)));
  const double value = backbone_weight(k2 / static_cast<double>(n), s);
  const double limit = std::exp(-0.5 * k2 * t);
  return std::abs(value - limit);
}

std::vector<RatioRow> mass_growth_table(const Shape& shape,
                                        const std::vector<double>& k2_edges,
                                        const std::vector<long>& n_list,
                                        const QuadratureSpec& qspec) {
  if (k2_edges.size() != static_cast<size_t>(shape.edge_count()))
    throw std::invalid_argument("one frequency per shape edge required");
  bool all_zero = true;
  for (double k2 : k2_edges) {
    if (k2 < 0) throw std::invalid_argument("edge frequency k2 must be >= 0");
    if (k2 != 0.0) all_zero = false;
  }
  VecList k_vecs;
  for (double k2 : k2_edges) k_vecs.push_back(Vec{std::sqrt(k2)});
  const double ahat = Am_hat(shape, k_vecs, qspec).value;
  const int m = shape.m();

  std::vector<RatioRow> rows;
  for (long n : n_list) {
    if (n < 0) throw std::invalid_argument("n must be >= 0");
    RatioRow row;
    row.n = n;
    if (all_zero) {
      row.value = exact_mass_coeff_zero(m, n).to_double();
    } else {
      const double scale = 1.0 / std::sqrt(static_cast<double>(n));
      std::vector<double> scaled;
      for (double k2 : k2_edges) scaled.push_back(k2 * scale);
      row.value = contour_mass_coeff(scaled, n).value;
    }
    row.target = std::pow(2.0 * std::numbers::pi, -0.5) *
                 std::pow(static_cast<double>(n), m - 2.5) * ahat;
    row.ratio = row.value / row.target;
    rows.push_back(row);
  }
  return rows;
}

std::vector<RatioRow> joint_growth_table(const Shape& shape,
                                         const std::vector<double>& k2_edges,
                                         const std::vector<double>& t_edges,
                                         const std::vector<long>& n_list) {
  const auto J = static_cast<size_t>(shape.edge_count());
  if (k2_edges.size() != J || t_edges.size() != J)
    throw std::invalid_argument("one frequency and one time per shape edge");
  for (double t : t_edges)
    if (t <= 0) throw std::invalid_argument("edge times must be > 0");

  std::vector<RatioRow> rows;
  for (long n : n_list) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    std::vector<long> s_edges;
    std::vector<Rational> k2_scaled;
    VecList k_vecs;
    Vec t_eff;
    for (size_t j = 0; j < J; ++j) {
      s_edges.push_back(static_cast<long>(std::floor(t_edges[j] * sqrt_n)));
      k2_scaled.push_back(rational_from_double(k2_edges[j] / sqrt_n));
      k_vecs.push_back(Vec{std::sqrt(k2_edges[j])});
      t_eff.push_back(static_cast<double>(s_edges.back()) / sqrt_n);
    }
    RatioRow row;
    row.n = n;
    row.value = product_joint_coeff(k2_scaled, s_edges, n).to_double();
    row.target = std::pow(2.0 * std::numbers::pi, -0.5) /
                 static_cast<double>(n) *
                 am_hat_integrand(shape, k_vecs, t_eff);
    row.ratio = row.value / row.target;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace iselab
