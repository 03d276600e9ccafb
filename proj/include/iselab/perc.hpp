#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "iselab/brw.hpp"
#include "iselab/lattice.hpp"
#include "iselab/rational.hpp"

namespace iselab {

// Independent Bernoulli bond percolation at exact bond probability p. The
// critical value is caller supplied through p (for d = 2 nearest-neighbour
// bonds the exact critical probability is 1/2).
struct PercModel {
  LatticeModel lattice;
  Rational p = Rational(1, 2);
  void validate() const;
  double p_double() const { return p.get_d(); }
};

// The open cluster of the origin: sites in discovery order (sites[0] = 0),
// with tallies over every bond the exploration decided (open bonds are all
// internal; closed ones include both internal and boundary bonds).
struct ClusterSample {
  std::vector<Site> sites;
  long open_bonds = 0;
  long closed_bonds = 0;
  long size() const { return static_cast<long>(sites.size()); }
};

// P(the cluster of the origin is exactly this site set), summed over site
// animals S with |S| = n and the given memberships: exact connectivity
// polynomial (probability a Bernoulli bond subgraph of S is connected) times
// the closed-boundary factor.
Rational exact_tau2(const PercModel& model, const Site& x, int n);
Rational exact_tau3(const PercModel& model, const Site& x, const Site& y,
                    int n);
Rational exact_cluster_size_prob(const PercModel& model, int n);

// All nonzero tau2(x; n) in one enumeration pass, keyed by x.
std::map<Site, Rational> exact_tau2_table(const PercModel& model, int n);

// Full exact law of C(0) on {|C(0)| = n}: sorted site list -> probability.
std::map<std::vector<Site>, Rational> exact_cluster_law(const PercModel& model,
                                                        int n);

struct McConfig {
  long n_target = 0;  // 0 samples the unconditioned cluster
  long samples = 1;
  std::uint64_t seed = 0;
  long max_sites = 1'000'000;          // unconditioned exploration cap
  long max_attempts = 100'000'000;     // conditioned rejection guard
};

// Breadth-first cluster growth with every bond decided exactly once on first
// contact; conditioned mode rejects any attempt whose cluster leaves
// n_target sites (growth aborts as soon as the target is exceeded).
// Per-sample seeding makes sample i independent of the schedule.
std::vector<ClusterSample> mc_clusters(const PercModel& model,
                                       const McConfig& config);

// Cluster site sets as empirical measures with points scaled by
// scale * n^{-1/4}; all samples must share one size.
std::vector<EmpiricalMeasure> cluster_measures(
    const std::vector<ClusterSample>& samples, double scale);

// Moment characteristic of the size-n cluster measures at frequencies
// ktilde. Reuses the empirical-measure machinery and bootstrap.
CharEstimate nu_moment_char(const std::vector<ClusterSample>& samples,
                            const VecList& ktilde, double scale,
                            int resamples = 200);

// Exact total-progeny law of the critical binary Galton-Watson process,
// P(N = n) for n = 1..max_n (index 0 unused): the ballot closed form
// binom(2k, k) / (k + 1) / 2^{2k+1} at n = 2k + 1, zero at even n.
std::vector<Rational> gw_cluster_law(long max_n);

// Least-squares slope of log P(N = n) against log n over odd n in
// [n_lo, n_hi]; the mean-field cluster-size exponent makes this -3/2.
double gw_log_log_slope(const std::vector<Rational>& law, long n_lo,
                        long n_hi);

}  // namespace iselab
