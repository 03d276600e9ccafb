#pragma once

#include <vector>

#include "iselab/quadrature.hpp"
#include "iselab/shapes.hpp"

namespace iselab {

using Vec = std::vector<double>;     // a point or wave vector in R^d
using VecList = std::vector<Vec>;    // one entry per shape edge (or per mark)

// Heat kernel (2 pi t)^(-d/2) exp(-|x|^2 / 2t).  Requires t > 0.
double gaussian_density(const Vec& x, double t, int d);

// Two-leg density t exp(-t^2/2) p_t(x).  Requires t > 0; at t == 0 the value
// is taken as the limit, which is 0 for x != 0 or d = 1.
double a2_density(const Vec& x, double t, int d);

// Integrated two-leg density: the t-integral of a2_density over (0, inf).
IntegrationResult A2(const Vec& x, int d, const QuadratureSpec& spec = {});

// m-leg density for a shape: (sum t) exp(-(sum t)^2/2) prod_j p_{t_j}(y_j),
// one displacement and one duration per edge, in edge-label order.
double am_density(const Shape& shape, const VecList& y, const std::vector<double>& t, int d);

// Characteristic-side integrand: (sum t) exp(-(sum t)^2/2)
// prod_j exp(-|k_j|^2 t_j / 2).
double am_hat_integrand(const Shape& shape, const VecList& k, const std::vector<double>& t);

// Full (2m-3)-fold t-integral of am_density at fixed displacements.
// The integrand depends on t only through per-edge factors and the total sum,
// so the iterated 1-D integrals are evaluated inside-out as functions of the
// partial sum, each level cached as a Chebyshev interpolant.
IntegrationResult Am(const Shape& shape, const VecList& y, int d,
                     const QuadratureSpec& spec = {});

// Full t-integral of am_hat_integrand: the shape characteristic.
// At k = 0 it equals 1 / (2m-5)!!.
IntegrationResult Am_hat(const Shape& shape, const VecList& k,
                         const QuadratureSpec& spec = {});

// Spatial mass: the integral of Am over all displacements, evaluated by
// quadrature.  The per-edge spatial integral is computed once on the
// substituted scale (it is t-independent after y -> sqrt(t) u) and the
// remaining t-integral reuses the partial-sum recursion.  Equals
// 1 / (2m-5)!! up to quadrature error.
IntegrationResult am_spatial_mass(const Shape& shape, int d,
                                  const QuadratureSpec& spec = {});

// l-th moment characteristic at wave vectors ktilde = (k_1 .. k_l): sums the
// shape characteristics over all shapes on l+1 externals, with the per-edge
// frequency equal to the sum of k_i over the externals routed through that
// edge.  Supports l in {1, 2, 3}; equals 1 at ktilde = 0.
IntegrationResult moment_characteristic(int l, const VecList& ktilde,
                                        const QuadratureSpec& spec = {});

// Per-edge routed frequencies for one shape (used by moment_characteristic
// and exposed for cross-validation against sampled moments).
VecList routed_frequencies(const Shape& shape, const VecList& ktilde);

}  // namespace iselab
