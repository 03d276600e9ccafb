#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "iselab/brw.hpp"
#include "iselab/ise.hpp"

using namespace iselab;

namespace {

// 99th percentile of the chi-square distribution by degrees of freedom.
double chi2_crit_1pct(int dof) {
  static const double q[] = {6.63, 9.21, 11.34, 13.28, 15.09, 16.81,
                             18.48, 20.09, 21.67, 23.21, 24.72, 26.22,
                             27.69, 29.14, 30.58, 32.00};
  REQUIRE(dof >= 1);
  REQUIRE(dof <= 16);
  return q[dof - 1];
}

// Brute-force rejection oracle: grow an unconditioned critical binary tree
// depth-first with its own draw order, keep it only when the total size hits
// the target. Independent of the cycle-lemma sampler in both conditioning
// method and embedding order.
struct RejectionOracle {
  int d;
  long n;
  std::mt19937_64 rng;

  RejectionOracle(int dim, long size, std::uint64_t seed)
      : d(dim), n(size), rng(seed) {}

  bool try_grow(std::vector<long>& parent, std::vector<std::vector<int>>& pos) {
    parent.clear();
    pos.clear();
    std::vector<long> open;  // nodes with children still to draw
    parent.push_back(-1);
    pos.push_back(std::vector<int>(d, 0));
    open.push_back(0);
    long size = 1;
    while (!open.empty()) {
      const long node = open.back();
      open.pop_back();
      const bool two = (rng() & 1) != 0;
      if (!two) continue;
      for (int child = 0; child < 2; ++child) {
        if (++size > n) return false;
        std::vector<int> p = pos[node];
        const auto move = rng() % (2 * d);
        p[move / 2] += (move % 2 == 0) ? 1 : -1;
        parent.push_back(node);
        pos.push_back(std::move(p));
        open.push_back(static_cast<long>(parent.size()) - 1);
      }
    }
    return size == n;
  }

  void sample(std::vector<long>& parent, std::vector<std::vector<int>>& pos) {
    while (!try_grow(parent, pos)) {
    }
  }
};

// size of the subtree rooted at creation-order node 1 (a child of the root);
// by exchangeability its law matches the depth-first first-child subtree size
long oracle_subtree_of_node1(const std::vector<long>& parent) {
  long count = 0;
  for (size_t v = 1; v < parent.size(); ++v) {
    long u = static_cast<long>(v);
    while (u > 1) u = parent[u];
    if (u == 1) ++count;
  }
  return count;
}

long first_child_subtree(const std::vector<std::uint8_t>& offspring) {
  long sum = 0;
  for (size_t j = 1; j < offspring.size(); ++j) {
    sum += offspring[j] - 1;
    if (sum == -1) return static_cast<long>(j);
  }
  return -1;
}

// two-sample chi-square with tail merging so every joint bin count is >= 10
double two_sample_chi2(const std::map<long, long>& a,
                       const std::map<long, long>& b, int& dof) {
  std::map<long, std::pair<long, long>> joint;
  for (const auto& [k, c] : a) joint[k].first += c;
  for (const auto& [k, c] : b) joint[k].second += c;
  std::vector<std::pair<double, double>> bins;
  double pa = 0, pb = 0;
  for (const auto& [k, cc] : joint) {
    pa += cc.first;
    pb += cc.second;
    if (pa + pb >= 10) {
      bins.emplace_back(pa, pb);
      pa = pb = 0;
    }
  }
  if (pa + pb > 0) {
    if (bins.empty()) bins.emplace_back(0, 0);
    bins.back().first += pa;
    bins.back().second += pb;
  }
  double na = 0, nb = 0;
  for (const auto& [x, y] : bins) {
    na += x;
    nb += y;
  }
  const double ra = std::sqrt(nb / na), rb = std::sqrt(na / nb);
  double stat = 0;
  for (const auto& [x, y] : bins)
    if (x + y > 0) stat += (ra * x - rb * y) * (ra * x - rb * y) / (x + y);
  dof = static_cast<int>(bins.size()) - 1;
  return stat;
}

BrwConfig config_for(int d, long n, std::uint64_t seed) {
  BrwConfig c;
  c.d = d;
  c.n = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("configuration and law validation") {
  OffspringLaw bad;
  bad.p0 = Rational(1, 3);
  bad.p2 = Rational(1, 3);
  bad.p1 = Rational(1, 3);  // sums to 1 but mean 1 holds: 1/3 + 2/3 = 1
  CHECK_NOTHROW(bad.validate());
  bad.p1 = Rational(1, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  OffspringLaw lopsided;
  lopsided.p0 = Rational(2, 3);
  lopsided.p1 = Rational(0);
  lopsided.p2 = Rational(1, 3);  // mean 2/3
  CHECK_THROWS_AS(lopsided.validate(), std::invalid_argument);

  CHECK_THROWS_AS(sample_conditioned_tree(config_for(2, 4, 1), 0),
                  std::invalid_argument);  // even size, binary law
  CHECK_THROWS_AS(sample_conditioned_tree(config_for(0, 3, 1), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_conditioned_tree(config_for(2, 0, 1), 0),
                  std::invalid_argument);
}

TEST_CASE("single particle tree is an atom at the origin") {
  const auto m = sample_conditioned_tree(config_for(2, 1, 7), 0);
  REQUIRE(m.point_count() == 1);
  CHECK(m.coords == std::vector<double>{0.0, 0.0});
  CHECK(m.weight() == 1.0);
}

TEST_CASE("samples always hit the target size exactly") {
  for (long n : {1, 3, 9, 41}) {
    const auto cfg = config_for(2, n, 11);
    for (long i = 0; i < 25; ++i) {
      const auto tree = sample_family_tree(cfg, i);
      REQUIRE(static_cast<long>(tree.offspring.size()) == n);
      long total = 1;
      for (auto o : tree.offspring) total += o;  // root plus all births
      CHECK(total - 1 == n - 1);
      CHECK(sample_conditioned_tree(cfg, i).point_count() == n);
    }
  }

  // a law with P(1) > 0 reaches even sizes
  BrwConfig mixed = config_for(2, 6, 3);
  mixed.law.p0 = Rational(1, 3);
  mixed.law.p1 = Rational(1, 3);
  mixed.law.p2 = Rational(1, 3);
  for (long i = 0; i < 25; ++i)
    CHECK(sample_conditioned_tree(mixed, i).point_count() == 6);
}

TEST_CASE("seeded streams are reproducible and thread independent") {
  auto cfg = config_for(2, 31, 99);
  cfg.samples = 40;
  const auto a = sample_measures(cfg);
  const auto b = sample_measures(cfg);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].coords == b[i].coords);

  cfg.threads = 3;
  const auto c = sample_measures(cfg);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].coords == c[i].coords);

  const auto other = sample_family_tree(config_for(2, 31, 100), 0);
  const auto base = sample_family_tree(config_for(2, 31, 99), 0);
  CHECK(base.positions != other.positions);
}

TEST_CASE("conditioned genealogies are uniform over valid walks") {
  // for size 7 the binary law admits exactly the 5 depth-first walks of 3
  // twos; the conditioned law is uniform on them
  const auto cfg = config_for(1, 7, 2024);
  std::map<std::vector<std::uint8_t>, long> freq;
  const long N = 5000;
  for (long i = 0; i < N; ++i) ++freq[sample_family_tree(cfg, i).offspring];
  REQUIRE(freq.size() == 5);
  double stat = 0;
  const double expected = static_cast<double>(N) / 5.0;
  for (const auto& [seq, count] : freq) {
    CHECK(seq.size() == 7);
    stat += (count - expected) * (count - expected) / expected;
  }
  CHECK(stat < chi2_crit_1pct(4));
}

TEST_CASE("genealogy and embedding distributions match the rejection oracle") {
  const int d = 1;
  const long n = 11;
  const long N = 4000;

  std::map<long, long> diam_cycle, diam_reject, sub_cycle, sub_reject;
  const auto cfg = config_for(d, n, 5150);
  for (long i = 0; i < N; ++i) {
    const auto tree = sample_family_tree(cfg, i);
    int lo = 0, hi = 0;
    for (size_t p = 0; p < tree.positions.size(); ++p) {
      lo = std::min(lo, tree.positions[p]);
      hi = std::max(hi, tree.positions[p]);
    }
    ++diam_cycle[hi - lo];
    ++sub_cycle[first_child_subtree(tree.offspring)];
  }

  RejectionOracle oracle(d, n, 777);
  std::vector<long> parent;
  std::vector<std::vector<int>> pos;
  for (long i = 0; i < N; ++i) {
    oracle.sample(parent, pos);
    int lo = 0, hi = 0;
    for (const auto& p : pos) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
    ++diam_reject[hi - lo];
    ++sub_reject[oracle_subtree_of_node1(parent)];
  }

  int dof = 0;
  const double diam_stat = two_sample_chi2(diam_cycle, diam_reject, dof);
  CHECK(diam_stat < chi2_crit_1pct(dof));
  const double sub_stat = two_sample_chi2(sub_cycle, sub_reject, dof);
  CHECK(sub_stat < chi2_crit_1pct(dof));
}

TEST_CASE("empirical characteristic basics") {
  auto cfg = config_for(2, 41, 8);
  cfg.samples = 50;
  const auto measures = sample_measures(cfg);

  const auto at_zero = empirical_char(measures, {{0.0, 0.0}});
  CHECK(at_zero.value.real() == 1.0);
  CHECK(at_zero.value.imag() == 0.0);
  CHECK(at_zero.se_re == 0.0);
  CHECK(at_zero.se_im == 0.0);

  const VecList k = {{0.8, -0.4}};
  const VecList mk = {{-0.8, 0.4}};
  const auto fwd = empirical_char(measures, k);
  const auto bwd = empirical_char(measures, mk);
  CHECK(fwd.value.real() == bwd.value.real());
  CHECK(fwd.value.imag() == -bwd.value.imag());
  CHECK(fwd.se_re == bwd.se_re);

  const auto pair = empirical_char(measures, {{0.8, -0.4}, {0.1, 0.2}});
  CHECK(std::abs(pair.value) <= 1.0);

  CHECK_THROWS_AS(empirical_char({}, k), std::invalid_argument);
  CHECK_THROWS_AS(empirical_char({measures[0]}, k), std::invalid_argument);
  CHECK_THROWS_AS(empirical_char(measures, {{0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(
      empirical_char(measures, {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}),
      std::invalid_argument);
}

TEST_CASE("scale fit recovers a synthetic diffusive constant") {
  // two-point measures at +-a have characteristic cos(c k a)
  const double a = 0.7;
  EmpiricalMeasure m;
  m.d = 1;
  m.coords = {a, -a};
  const std::vector<EmpiricalMeasure> measures = {m, m};
  const double kref = 1.3;
  const double target = 0.5;  // cos(pi/3)
  const auto fit = fit_scale(measures, kref, target);
  const double expected = (std::acos(0.5)) / (kref * a);
  CHECK(fit.scale == doctest::Approx(expected).epsilon(1e-10));
  CHECK(fit.achieved == doctest::Approx(target).epsilon(1e-10));

  CHECK_THROWS_AS(fit_scale(measures, -1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(fit_scale(measures, 1.0, 1.5), std::invalid_argument);
  EmpiricalMeasure other;
  other.d = 1;
  other.coords = {a, -a, 0.0};
  CHECK_THROWS_AS(fit_scale({m, other}, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("fitted first moment characteristic approaches the density transform") {
  auto cfg = config_for(2, 511, 31337);
  cfg.samples = 600;
  const auto measures = sample_measures(cfg);

  auto shapes2 = enumerate_shapes(2);
  const Shape& edge = shapes2[0];
  const double kref = 1.0;
  const double target = Am_hat(edge, {{kref, 0.0}}).value;
  REQUIRE(target > 0.0);
  REQUIRE(target < 1.0);
  const auto fit = fit_scale(measures, kref, target);
  CHECK(fit.achieved == doctest::Approx(target).epsilon(1e-9));

  for (double k : {0.5, 1.5}) {
    const auto est =
        empirical_char(measures, {{fit.scale * k, 0.0}});
    const double want = Am_hat(edge, {{k, 0.0}}).value;
    REQUIRE(est.se_re > 0.0);
    CHECK(std::abs(est.value.real() - want) < 4.0 * est.se_re + 0.02);
    CHECK(std::abs(est.value.imag()) < 4.0 * est.se_im + 0.02);
  }
}
