#include "iselab/ise.hpp"

#include <cmath>
#include <stdexcept>

namespace iselab {

namespace {

double sqnorm(const Vec& x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return s;
}

void check_dim(const Vec& x, int d, const char* who) {
  if (d < 1) throw std::invalid_argument(std::string(who) + ": d must be >= 1");
  if (static_cast<int>(x.size()) != d) {
    throw std::invalid_argument(std::string(who) + ": vector length does not match d");
  }
}

void check_edge_list(const Shape& shape, const VecList& v, const char* who) {
  if (static_cast<int>(v.size()) != shape.edge_count()) {
    throw std::invalid_argument(std::string(who) + ": need one vector per shape edge");
  }
}

// Integral of g0(s) = s exp(-s^2/2) weighted by per-edge factors:
//   I = int_{[0,R]^J} g0(sum t) prod_j psi_j(t_j) dt.
// Because the integrand couples the t_j only through their sum, the iterated
// integrals are functions of the partial sum alone:
//   G_0 = g0,  G_i(s) = int_0^R G_{i-1}(s + t) psi_{J-i+1}(t) dt,
// and I = G_J(0).  Intermediate levels are fitted as Chebyshev interpolants
// on [0, R]; beyond R every level is bounded by exp(-R^2/2) ~ 2e-22.
IntegrationResult partial_sum_integral(const std::vector<RealFn>& psi,
                                       const QuadratureSpec& spec) {
  const double R = spec.truncation_radius;
  const int J = static_cast<int>(psi.size());
  IntegrationResult out;

  RealFn current = [](double s) { return s * std::exp(-s * s / 2); };
  ChebFun fit;
  for (int level = 0; level < J; ++level) {
    const RealFn& w = psi[J - 1 - level];
    auto next_value = [&, w](double s) {
      RealFn g = [&, s](double t) {
        double u = s + t;
        double base = u <= R ? current(u) : 0.0;
        return base * w(t);
      };
      IntegrationResult r = adaptive_integrate(g, 0.0, R, spec);
      out.evaluations += r.evaluations;
      out.error_estimate += r.error_estimate;
      return r.value;
    };
    if (level + 1 == J) {
      out.value = next_value(0.0);
      return out;
    }
    fit = ChebFun(next_value, 0.0, R, 1e-13);
    current = [fit](double s) { return fit(s); };
  }
  // J == 0 cannot happen for shapes (minimum one edge).
  throw std::invalid_argument("partial_sum_integral: empty edge list");
}

}  // namespace

double gaussian_density(const Vec& x, double t, int d) {
  check_dim(x, d, "gaussian_density");
  if (t <= 0.0) throw std::invalid_argument("gaussian_density: t must be > 0");
  return std::pow(2.0 * M_PI * t, -0.5 * d) * std::exp(-sqnorm(x) / (2.0 * t));
}

double a2_density(const Vec& x, double t, int d) {
  check_dim(x, d, "a2_density");
  if (t < 0.0) throw std::invalid_argument("a2_density: t must be >= 0");
  if (t == 0.0) {
    if (sqnorm(x) > 0.0 || d == 1) return 0.0;
    throw std::invalid_argument("a2_density: undefined at t = 0, x = 0 for d >= 2");
  }
  return t * std::exp(-t * t / 2) * gaussian_density(x, t, d);
}

IntegrationResult A2(const Vec& x, int d, const QuadratureSpec& spec) {
  check_dim(x, d, "A2");
  return integrate_semi_infinite([&](double t) { return a2_density(x, t, d); }, spec);
}

double am_density(const Shape& shape, const VecList& y, const std::vector<double>& t, int d) {
  check_edge_list(shape, y, "am_density");
  if (t.size() != y.size()) throw std::invalid_argument("am_density: |t| must equal edge count");
  double total = 0.0;
  for (double tj : t) {
    if (tj < 0.0) throw std::invalid_argument("am_density: durations must be >= 0");
    total += tj;
  }
  double val = total * std::exp(-total * total / 2);
  for (size_t j = 0; j < t.size(); ++j) {
    check_dim(y[j], d, "am_density");
    if (t[j] == 0.0) {
      if (sqnorm(y[j]) > 0.0) return 0.0;
      throw std::invalid_argument("am_density: undefined at t_j = 0 with y_j = 0");
    }
    val *= gaussian_density(y[j], t[j], d);
  }
  return val;
}

double am_hat_integrand(const Shape& shape, const VecList& k, const std::vector<double>& t) {
  check_edge_list(shape, k, "am_hat_integrand");
  if (t.size() != k.size()) {
    throw std::invalid_argument("am_hat_integrand: |t| must equal edge count");
  }
  double total = 0.0;
  for (double tj : t) {
    if (tj < 0.0) throw std::invalid_argument("am_hat_integrand: durations must be >= 0");
    total += tj;
  }
  double val = total * std::exp(-total * total / 2);
  for (size_t j = 0; j < t.size(); ++j) val *= std::exp(-sqnorm(k[j]) * t[j] / 2);
  return val;
}

IntegrationResult Am(const Shape& shape, const VecList& y, int d, const QuadratureSpec& spec) {
  check_edge_list(shape, y, "Am");
  for (const Vec& yj : y) check_dim(yj, d, "Am");
  if (shape.m() > 4) throw std::invalid_argument("Am: supported for m <= 4");
  std::vector<RealFn> psi;
  psi.reserve(y.size());
  for (const Vec& yj : y) {
    psi.push_back([yj, d](double t) { return t > 0.0 ? gaussian_density(yj, t, d) : 0.0; });
  }
  return partial_sum_integral(psi, spec);
}

IntegrationResult Am_hat(const Shape& shape, const VecList& k, const QuadratureSpec& spec) {
  check_edge_list(shape, k, "Am_hat");
  if (shape.m() > 5) throw std::invalid_argument("Am_hat: supported for m <= 5");
  std::vector<RealFn> psi;
  psi.reserve(k.size());
  for (const Vec& kj : k) {
    const double c = sqnorm(kj) / 2;
    psi.push_back([c](double t) { return std::exp(-c * t); });
  }
  return partial_sum_integral(psi, spec);
}

IntegrationResult am_spatial_mass(const Shape& shape, int d, const QuadratureSpec& spec) {
  if (d < 1) throw std::invalid_argument("am_spatial_mass: d must be >= 1");
  if (shape.m() > 4) throw std::invalid_argument("am_spatial_mass: supported for m <= 4");
  // Per-edge spatial integral.  Substituting y = sqrt(t) u per coordinate
  // turns int p_t(y) dy into the standard normal mass, independent of t, so
  // one quadrature serves every edge and duration.
  IntegrationResult gauss = adaptive_integrate(
      [](double u) { return std::exp(-u * u / 2) / std::sqrt(2.0 * M_PI); },
      -spec.truncation_radius, spec.truncation_radius, spec);
  const double edge_mass = std::pow(gauss.value, d);

  std::vector<RealFn> psi(shape.edge_count(), [edge_mass](double) { return edge_mass; });
  IntegrationResult res = partial_sum_integral(psi, spec);
  res.evaluations += gauss.evaluations;
  res.error_estimate += gauss.error_estimate;
  return res;
}

VecList routed_frequencies(const Shape& shape, const VecList& ktilde) {
  if (static_cast<int>(ktilde.size()) != shape.m() - 1) {
    throw std::invalid_argument("routed_frequencies: need one wave vector per external >= 1");
  }
  const size_t d = ktilde.empty() ? 0 : ktilde[0].size();
  for (const Vec& k : ktilde) {
    if (k.size() != d) throw std::invalid_argument("routed_frequencies: mixed dimensions");
  }
  VecList out(shape.edge_count(), Vec(d, 0.0));
  auto sets = shape.frequency_sets();
  for (int j = 0; j < shape.edge_count(); ++j) {
    for (int ext : sets[j]) {
      for (size_t c = 0; c < d; ++c) out[j][c] += ktilde[ext - 1][c];
    }
  }
  return out;
}

IntegrationResult moment_characteristic(int l, const VecList& ktilde,
                                        const QuadratureSpec& spec) {
  if (l < 1 || l > 3) throw std::invalid_argument("moment_characteristic: l must be 1, 2, or 3");
  if (static_cast<int>(ktilde.size()) != l) {
    throw std::invalid_argument("moment_characteristic: need l wave vectors");
  }
  IntegrationResult total;
  for (const Shape& shape : enumerate_shapes(l + 1)) {
    IntegrationResult r = Am_hat(shape, routed_frequencies(shape, ktilde), spec);
    total.value += r.value;
    total.error_estimate += r.error_estimate;
    total.evaluations += r.evaluations;
  }
  return total;
}

}  // namespace iselab
