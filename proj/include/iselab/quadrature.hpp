#pragma once

#include <functional>
#include <vector>

#include "iselab/errors.hpp"

namespace iselab {

// Controls for the deterministic quadrature routines.
//   abs_tol           absolute tolerance per 1-D integral
//   rel_tol           relative tolerance (0 disables the relative criterion)
//   truncation_radius semi-infinite integrals over t are cut at this radius;
//                     all integrands routed through this module decay at least
//                     as fast as exp(-t^2/2), so the discarded tail is below
//                     exp(-R^2/2) ~ 2e-22 at the default R = 10
//   max_subdivisions  hard cap on adaptive interval splits before giving up
struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;
  double truncation_radius = 10.0;
  int max_subdivisions = 4000;
};

struct IntegrationResult {
  double value = 0.0;
  double error_estimate = 0.0;
  long evaluations = 0;
};

using RealFn = std::function<double(double)>;

// Adaptive integration of f over [a, b].  Worst-interval refinement with a
// 7/15-point Gauss-Legendre pair; throws numerical_failure if the subdivision
// cap is hit before the tolerance.
IntegrationResult adaptive_integrate(const RealFn& f, double a, double b,
                                     const QuadratureSpec& spec = {});

// Integral of f over [0, infinity) for integrands decaying like exp(-t^2/2):
// truncates at spec.truncation_radius and integrates adaptively.
IntegrationResult integrate_semi_infinite(const RealFn& f,
                                          const QuadratureSpec& spec = {});

// Iterated integration of f(t_1,...,t_dim) over [0, R]^dim, innermost variable
// last.  Each level is a 1-D adaptive integral; per-level tolerance is
// spec.abs_tol.  Deterministic but exponential in dim; intended for dim <= 5.
IntegrationResult nested_integrate(int dim,
                                   const std::function<double(const std::vector<double>&)>& f,
                                   const QuadratureSpec& spec = {});

// Chebyshev interpolant on [a, b].  Node count grows until the trailing
// coefficients fall below tol relative to the largest one.
class ChebFun {
 public:
  ChebFun() = default;
  ChebFun(const RealFn& f, double a, double b, double tol = 1e-13);

  // Evaluates the interpolant; arguments outside [a, b] clamp to the boundary.
  double operator()(double x) const;

  double a() const { return a_; }
  double b() const { return b_; }
  int size() const { return static_cast<int>(coeffs_.size()); }

 private:
  double a_ = 0.0;
  double b_ = 1.0;
  std::vector<double> coeffs_;
};

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], computed
// once by Newton iteration on the Legendre recurrence and cached.
const std::vector<double>& gauss_legendre_nodes(int n);
const std::vector<double>& gauss_legendre_weights(int n);

}  // namespace iselab
