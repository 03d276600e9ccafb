#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "iselab/ise.hpp"
#include "iselab/rational.hpp"

namespace iselab {

// Offspring distribution on {0, 1, 2} with mean exactly 1. The default is
// the critical binary law P(0) = P(2) = 1/2, under which the total family
// size is always odd.
struct OffspringLaw {
  Rational p0 = Rational(1, 2);
  Rational p1 = Rational(0);
  Rational p2 = Rational(1, 2);
  void validate() const;  // nonnegative, sums to 1, mean exactly 1
  bool binary() const { return p1 == 0; }
};

struct BrwConfig {
  int d = 2;
  long n = 1;  // total family-tree size, root included
  OffspringLaw law;
  std::uint64_t seed = 0;
  long samples = 1;
  double scale = 1.0;  // extra factor on the n^{-1/4} rescaling
  int threads = 1;
  void validate() const;
};

// Equal-weight point measure: every point carries mass 1 / point_count().
// Coordinates are stored flat, row-major, point_count() * d doubles.
struct EmpiricalMeasure {
  int d = 0;
  std::vector<double> coords;
  long point_count() const {
    return d == 0 ? 0 : static_cast<long>(coords.size()) / d;
  }
  double weight() const { return 1.0 / static_cast<double>(point_count()); }
};

// One critical branching random walk family tree conditioned to total size
// exactly n: offspring counts in depth-first order plus unscaled lattice
// positions (row-major, n * d ints). Conditioning is exact: the offspring
// sequence is drawn uniformly from the conditioned multiset and
// cycle-rotated to the unique valid depth-first order, never rejected.
// Distinct sample_index values give independent streams, so parallel
// schedules reproduce the serial output.
struct FamilyTree {
  std::vector<std::uint8_t> offspring;
  std::vector<int> positions;
};
FamilyTree sample_family_tree(const BrwConfig& config, long sample_index);

// The family tree as an equal-weight measure scaled by scale * n^{-1/4}.
EmpiricalMeasure sample_conditioned_tree(const BrwConfig& config,
                                         long sample_index);

std::vector<EmpiricalMeasure> sample_measures(const BrwConfig& config);

struct CharEstimate {
  std::complex<double> value{0.0, 0.0};
  double se_re = 0.0;  // bootstrap standard errors of the two parts
  double se_im = 0.0;
  long samples = 0;
};

// Monte Carlo l-th moment characteristic of the empirical measures at the
// given l frequency vectors (l = ktilde.size() in {1, 2}); the l = 2 case
// averages over ordered point pairs. Bootstrap over measures with a fixed
// internal seed keeps reruns byte-identical.
CharEstimate empirical_char(const std::vector<EmpiricalMeasure>& measures,
                            const VecList& ktilde, int resamples = 200);

// Diffusive constant fitted so the first-moment characteristic matches the
// target value at one reference frequency magnitude (direction e_1).
struct ScaleFit {
  double scale = 1.0;
  double reference_k = 1.0;
  double target = 0.0;    // characteristic value matched at reference_k
  double achieved = 0.0;  // empirical value at the fitted scale
};
ScaleFit fit_scale(const std::vector<EmpiricalMeasure>& measures,
                   double reference_k, double target);

}  // namespace iselab
