#include "iselab/perc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "iselab/errors.hpp"

namespace iselab {

namespace {

constexpr int kMaxExactSites = 10;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t pack_site(const Site& s) {
  std::uint64_t key = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] < -119 || s[i] > 119)
      throw resource_limit("cluster left the supported coordinate range");
    key |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(s[i] + 128))
           << (8 * i);
  }
  return key;
}

struct BondKeyHash {
  size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& k) const {
    return std::hash<std::uint64_t>()(k.first * 0x9e3779b97f4a7c15ULL ^
                                      k.second);
  }
};

// Probability that a Bernoulli(p) bond subgraph on the animal's sites is
// connected: subset recursion C(M) = 1 - sum over proper lower sets W of
// C(W) * q^{cut(W, M - W)}, masks anchored at the lowest site of M.
Rational connectivity_polynomial(int n, const std::vector<std::pair<int, int>>& bonds,
                                 const Rational& p) {
  const Rational q = Rational(1) - p;
  int max_cut = static_cast<int>(bonds.size());
  std::vector<Rational> q_pow(max_cut + 1);
  q_pow[0] = Rational(1);
  for (int i = 1; i <= max_cut; ++i) q_pow[i] = q_pow[i - 1] * q;

  const int full = (1 << n) - 1;
  std::vector<Rational> C(full + 1, Rational(0));
  for (int mask = 1; mask <= full; ++mask) {
    const int anchor = mask & -mask;
    Rational val(1);
    // subtract configurations whose anchor component is a proper subset W
    for (int W = (mask - 1) & mask; W > 0; W = (W - 1) & mask) {
      if ((W & anchor) == 0) continue;
      int cut = 0;
      for (const auto& [a, b] : bonds) {
        const bool in_mask = ((mask >> a) & 1) && ((mask >> b) & 1);
        if (in_mask && (((W >> a) & 1) != ((W >> b) & 1))) ++cut;
      }
      val -= C[W] * q_pow[cut];
    }
    C[mask] = val;
  }
  return C[full];
}

// visit(sites, probability that C(0) equals exactly this animal)
void for_each_cluster_weight(
    const PercModel& model, int n,
    const std::function<void(const std::vector<Site>&, const Rational&)>& visit) {
  model.validate();
  if (n < 1) throw std::invalid_argument("cluster size must be >= 1");
  if (n > kMaxExactSites)
    throw resource_limit("exact enumeration supports at most 10 sites");
  const auto offsets = model.lattice.neighbor_offsets();
  const Rational q = Rational(1) - model.p;

  for_each_animal(model.lattice, n, [&](const std::vector<Site>& sites) {
    std::map<Site, int> index;
    for (int i = 0; i < n; ++i) index.emplace(sites[i], i);
    std::vector<std::pair<int, int>> bonds;
    long boundary = 0;
    for (int i = 0; i < n; ++i)
      for (const auto& off : offsets) {
        Site neigh = sites[i];
        for (size_t c = 0; c < neigh.size(); ++c) neigh[c] += off[c];
        const auto it = index.find(neigh);
        if (it == index.end()) {
          ++boundary;
        } else if (it->second > i) {
          bonds.emplace_back(i, it->second);
        }
      }
    Rational weight = connectivity_polynomial(n, bonds, model.p);
    Rational q_pow(1);
    for (long b = 0; b < boundary; ++b) q_pow *= q;
    weight *= q_pow;
    visit(sites, weight);
  });
}

}  // namespace

void PercModel::validate() const {
  if (p < 0 || p > 1)
    throw std::invalid_argument("bond probability must lie in [0, 1]");
}

Rational exact_tau2(const PercModel& model, const Site& x, int n) {
  if (static_cast<int>(x.size()) != model.lattice.d)
    throw std::invalid_argument("site arity mismatch");
  Rational total(0);
  for_each_cluster_weight(model, n,
                          [&](const std::vector<Site>& sites, const Rational& w) {
                            if (std::find(sites.begin(), sites.end(), x) !=
                                sites.end())
                              total += w;
                          });
  return total;
}

Rational exact_tau3(const PercModel& model, const Site& x, const Site& y,
                    int n) {
  if (static_cast<int>(x.size()) != model.lattice.d ||
      static_cast<int>(y.size()) != model.lattice.d)
    throw std::invalid_argument("site arity mismatch");
  Rational total(0);
  for_each_cluster_weight(model, n,
                          [&](const std::vector<Site>& sites, const Rational& w) {
                            const bool has_x = std::find(sites.begin(), sites.end(),
                                                         x) != sites.end();
                            const bool has_y = std::find(sites.begin(), sites.end(),
                                                         y) != sites.end();
                            if (has_x && has_y) total += w;
                          });
  return total;
}

Rational exact_cluster_size_prob(const PercModel& model, int n) {
  Rational total(0);
  for_each_cluster_weight(
      model, n,
      [&](const std::vector<Site>&, const Rational& w) { total += w; });
  return total;
}

std::map<Site, Rational> exact_tau2_table(const PercModel& model, int n) {
  std::map<Site, Rational> table;
  for_each_cluster_weight(model, n,
                          [&](const std::vector<Site>& sites, const Rational& w) {
                            for (const auto& site : sites) table[site] += w;
                          });
  return table;
}

std::map<std::vector<Site>, Rational> exact_cluster_law(const PercModel& model,
                                                        int n) {
  std::map<std::vector<Site>, Rational> law;
  for_each_cluster_weight(model, n,
                          [&](const std::vector<Site>& sites, const Rational& w) {
                            std::vector<Site> key = sites;
                            std::sort(key.begin(), key.end());
                            law.emplace(std::move(key), w);
                          });
  return law;
}

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t m) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() / m * m;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % m;
}

// Inverse-CDF binomial draw; cheap because the sparse path only runs when
// the mean open count u * p is small.
long binomial_draw(std::mt19937_64& rng, long u, double p) {
  const double target = unit_double(rng);
  double pmf = std::exp(static_cast<double>(u) * std::log1p(-p));
  double cdf = pmf;
  long k = 0;
  while (target > cdf && k < u) {
    pmf *= static_cast<double>(u - k) / static_cast<double>(k + 1) * p /
           (1.0 - p);
    ++k;
    cdf += pmf;
  }
  return k;
}

bool adjacent(const Site& a, const Site& b, const LatticeModel& model) {
  if (model.flavor == LatticeModel::Flavor::nearest_neighbour) {
    int l1 = 0;
    for (size_t c = 0; c < a.size(); ++c) l1 += std::abs(a[c] - b[c]);
    return l1 == 1;
  }
  int linf = 0;
  for (size_t c = 0; c < a.size(); ++c)
    linf = std::max(linf, std::abs(a[c] - b[c]));
  return linf > 0 && linf <= model.L;
}

// Each bond is decided on first probe. The dense path probes every offset of
// the processed site through a decided-bond map. The sparse path (large
// neighbourhoods, small mean degree) decides all still-undecided bonds of
// the processed site at once: a bond is already decided exactly when the
// neighbour was processed earlier, so the open count among the u undecided
// bonds is Binomial(u, p) and the open endpoints are a uniform u-subset.
// Returns false when the cluster exceeded cap.
bool grow_cluster(const LatticeModel& lattice,
                  const std::vector<std::vector<int>>& offsets, double p,
                  bool sparse, long cap, std::mt19937_64& rng,
                  ClusterSample& cluster) {
  cluster.sites.clear();
  cluster.open_bonds = 0;
  cluster.closed_bonds = 0;
  cluster.sites.push_back(Site(lattice.d, 0));
  std::unordered_set<std::uint64_t> occupied{pack_site(cluster.sites[0])};
  std::unordered_set<std::uint64_t> processed;
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, bool,
                     BondKeyHash>
      decided;

  for (size_t head = 0; head < cluster.sites.size(); ++head) {
    const Site at = cluster.sites[head];
    const std::uint64_t at_key = pack_site(at);
    if (sparse) {
      // sites before head are exactly the ones already processed
      long pre_decided = 0;
      for (size_t i = 0; i < head; ++i)
        if (adjacent(at, cluster.sites[i], lattice)) ++pre_decided;
      const long undecided = static_cast<long>(offsets.size()) - pre_decided;
      const long open = binomial_draw(rng, undecided, p);
      cluster.open_bonds += open;
      cluster.closed_bonds += undecided - open;
      std::unordered_set<std::uint64_t> chosen;
      for (long j = 0; j < open; ++j) {
        while (true) {
          const auto& off = offsets[bounded(rng, offsets.size())];
          Site next = at;
          for (size_t c = 0; c < next.size(); ++c) next[c] += off[c];
          const std::uint64_t next_key = pack_site(next);
          if (processed.count(next_key)) continue;       // already decided
          if (!chosen.insert(next_key).second) continue;  // drawn twice
          if (occupied.insert(next_key).second) {
            cluster.sites.push_back(std::move(next));
            if (static_cast<long>(cluster.sites.size()) > cap) return false;
          }
          break;
        }
      }
      processed.insert(at_key);
      continue;
    }
    for (const auto& off : offsets) {
      Site next = at;
      for (size_t c = 0; c < next.size(); ++c) next[c] += off[c];
      const std::uint64_t next_key = pack_site(next);
      const std::pair<std::uint64_t, std::uint64_t> bond_key =
          std::minmax(at_key, next_key);
      const auto found = decided.find(bond_key);
      bool open;
      if (found != decided.end()) {
        open = found->second;
      } else {
        open = unit_double(rng) < p;
        decided.emplace(bond_key, open);
        if (open)
          ++cluster.open_bonds;
        else
          ++cluster.closed_bonds;
      }
      if (!open) continue;
      if (occupied.insert(next_key).second) {
        cluster.sites.push_back(std::move(next));
        if (static_cast<long>(cluster.sites.size()) > cap) return false;
      }
    }
  }
  return true;
}

std::vector<ClusterSample> mc_clusters(const PercModel& model,
                                       const McConfig& config) {
  model.validate();
  if (config.n_target < 0 || config.samples < 0)
    throw std::invalid_argument("negative target or sample count");
  const auto offsets = model.lattice.neighbor_offsets();
  const double p = model.p_double();
  const bool sparse =
      offsets.size() >= 64 && p * static_cast<double>(offsets.size()) <= 32.0;
  const long cap =
      config.n_target > 0 ? config.n_target : config.max_sites;

  std::vector<ClusterSample> out;
  out.reserve(static_cast<size_t>(config.samples));
  for (long s = 0; s < config.samples; ++s) {
    std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(
                                       static_cast<std::uint64_t>(s) + 1)));
    long attempts = 0;
    while (true) {
      if (++attempts > config.max_attempts)
        throw resource_limit(
            "conditioned cluster acceptance rate below floor");
      ClusterSample cluster;
      const bool fits = grow_cluster(model.lattice, offsets, p, sparse, cap,
                                     rng, cluster);
      if (!fits) {
        if (config.n_target > 0) continue;  // reject and redraw
        throw resource_limit("unconditioned cluster exceeded max_sites");
      }
      if (config.n_target > 0 && cluster.size() != config.n_target) continue;
      out.push_back(std::move(cluster));
      break;
    }
  }
  return out;
}

std::vector<EmpiricalMeasure> cluster_measures(
    const std::vector<ClusterSample>& samples, double scale) {
  if (samples.empty()) throw std::invalid_argument("no cluster samples");
  const long n = samples.front().size();
  const int d = static_cast<int>(samples.front().sites.front().size());
  std::vector<EmpiricalMeasure> measures(samples.size());
  const double factor = scale * std::pow(static_cast<double>(n), -0.25);
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != n)
      throw std::invalid_argument("cluster samples have mixed sizes");
    measures[i].d = d;
    measures[i].coords.reserve(static_cast<size_t>(n) * d);
    for (const auto& site : samples[i].sites)
      for (int c = 0; c < d; ++c)
        measures[i].coords.push_back(site[c] * factor);
  }
  return measures;
}

CharEstimate nu_moment_char(const std::vector<ClusterSample>& samples,
                            const VecList& ktilde, double scale,
                            int resamples) {
  return empirical_char(cluster_measures(samples, scale), ktilde, resamples);
}

std::vector<Rational> gw_cluster_law(long max_n) {
  if (max_n < 1) throw std::invalid_argument("max_n must be >= 1");
  std::vector<Rational> law(static_cast<size_t>(max_n) + 1, Rational(0));
  for (long n = 1; n <= max_n; n += 2) {
    const unsigned long k = static_cast<unsigned long>((n - 1) / 2);
    mpz_class catalan;
    mpz_bin_uiui(catalan.get_mpz_t(), 2 * k, k);
    mpz_class denom;
    mpz_ui_pow_ui(denom.get_mpz_t(), 2, 2 * k + 1);
    denom *= (k + 1);
    Rational q(catalan, denom);
    q.canonicalize();
    law[static_cast<size_t>(n)] = q;
  }
  return law;
}

double gw_log_log_slope(const std::vector<Rational>& law, long n_lo,
                        long n_hi) {
  if (n_lo < 1 || n_hi <= n_lo ||
      n_hi >= static_cast<long>(law.size()))
    throw std::invalid_argument("slope window out of range");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long count = 0;
  for (long n = n_lo; n <= n_hi; ++n) {
    if (law[static_cast<size_t>(n)] == 0) continue;
    const double x = std::log(static_cast<double>(n));
    const double y = log_rational(law[static_cast<size_t>(n)]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("not enough points for a slope");
  const double c = static_cast<double>(count);
  return (c * sxy - sx * sy) / (c * sxx - sx * sx);
}

}  // namespace iselab
