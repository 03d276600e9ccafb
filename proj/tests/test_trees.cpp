#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "iselab/errors.hpp"
#include "iselab/ise.hpp"
#include "iselab/lattice.hpp"

using namespace iselab;

namespace {

using Bond = std::pair<Site, Site>;
using CanonicalTree = std::set<Bond>;

Bond normal_bond(Site a, Site b) {
  if (b < a) std::swap(a, b);
  return {a, b};
}

// Level-by-level enumeration oracle with hash dedup: every (n+1)-site tree
// arises from an n-site tree by attaching one leaf, so growing all trees by
// one site and deduplicating the bond sets enumerates each tree once.
std::set<CanonicalTree> oracle_trees(const LatticeModel& model, int n) {
  const auto offsets = model.neighbor_offsets();
  std::set<CanonicalTree> level;
  level.insert(CanonicalTree{});
  for (int step = 0; step < n; ++step) {
    std::set<CanonicalTree> next;
    for (const auto& tree : level) {
      std::set<Site> sites;
      sites.insert(Site(model.d, 0));
      for (const auto& [a, b] : tree) {
        sites.insert(a);
        sites.insert(b);
      }
      for (const auto& site : sites)
        for (const auto& off : offsets) {
          Site neigh = site;
          for (int c = 0; c < model.d; ++c) neigh[c] += off[c];
          if (sites.count(neigh)) continue;
          CanonicalTree grown = tree;
          grown.insert(normal_bond(site, neigh));
          next.insert(std::move(grown));
        }
    }
    level = std::move(next);
  }
  return level;
}

CanonicalTree canonical(const LatticeTree& t) {
  CanonicalTree out;
  for (const auto& [a, b] : t.bonds)
    out.insert(normal_bond(t.sites[a], t.sites[b]));
  return out;
}

const LatticeModel square{2, LatticeModel::Flavor::nearest_neighbour, 1};
const LatticeModel line{1, LatticeModel::Flavor::nearest_neighbour, 1};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "cannot open " << path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string data_dir() {
  const char* dir = std::getenv("ISELAB_DATA_DIR");
  REQUIRE_MESSAGE(dir != nullptr, "ISELAB_DATA_DIR not set");
  return dir;
}

}  // namespace

TEST_CASE("neighbor offsets are lexicographic and complete") {
  CHECK(line.neighbor_offsets() ==
        std::vector<std::vector<int>>{{-1}, {1}});
  CHECK(square.neighbor_offsets() ==
        std::vector<std::vector<int>>{{-1, 0}, {0, -1}, {0, 1}, {1, 0}});

  const LatticeModel spread{2, LatticeModel::Flavor::spread_out, 1};
  const auto offs = spread.neighbor_offsets();
  CHECK(offs.size() == 8);
  CHECK(std::is_sorted(offs.begin(), offs.end()));

  const LatticeModel spread3{1, LatticeModel::Flavor::spread_out, 3};
  CHECK(spread3.neighbor_offsets() ==
        std::vector<std::vector<int>>{{-3}, {-2}, {-1}, {1}, {2}, {3}});

  CHECK_THROWS_AS(LatticeModel{0}.neighbor_offsets(), std::invalid_argument);
  CHECK_THROWS_AS(LatticeModel{9}.neighbor_offsets(), std::invalid_argument);
}

TEST_CASE("enumeration matches the dedup oracle bond set for bond set") {
  for (int n = 0; n <= 4; ++n) {
    const auto expected = oracle_trees(square, n);
    std::set<CanonicalTree> got;
    long visits = 0;
    for_each_tree(square, n, [&](const LatticeTree& t) {
      ++visits;
      REQUIRE(t.bond_count() == n);
      REQUIRE(t.sites.size() == static_cast<size_t>(n) + 1);
      REQUIRE(t.sites[0] == Site(2, 0));
      got.insert(canonical(t));
    });
    CHECK(visits == static_cast<long>(expected.size()));  // no duplicates
    CHECK(got == expected);
  }

  const LatticeModel spread{2, LatticeModel::Flavor::spread_out, 1};
  for (int n = 0; n <= 3; ++n) {
    const auto expected = oracle_trees(spread, n);
    CHECK(one_point(spread, n) == static_cast<long>(expected.size()));
  }
}

TEST_CASE("small counts match closed forms") {
  CHECK(one_point(square, 0) == 1);
  CHECK(one_point(square, 1) == 4);
  CHECK(one_point(square, 2) == 18);  // 6 translation classes of 3 sites each

  // one dimension: an n-bond tree is an interval, n + 1 origin placements
  for (int n = 0; n <= 7; ++n) CHECK(one_point(line, n) == n + 1);

  const LatticeModel cube{3, LatticeModel::Flavor::nearest_neighbour, 1};
  CHECK(one_point(cube, 1) == 6);
  const LatticeModel spread{2, LatticeModel::Flavor::spread_out, 1};
  CHECK(one_point(spread, 1) == 8);
}

TEST_CASE("enumeration order is deterministic and budget limited") {
  std::vector<std::vector<std::pair<int, int>>> first, second;
  for_each_tree(square, 3,
                [&](const LatticeTree& t) { first.push_back(t.bonds); });
  for_each_tree(square, 3,
                [&](const LatticeTree& t) { second.push_back(t.bonds); });
  CHECK(first == second);

  EnumerationBudget tight;
  tight.max_trees = 10;
  CHECK_THROWS_AS(one_point(square, 4, tight), resource_limit);
  CHECK_THROWS_AS(enumerate_trees(square, 4, tight), resource_limit);

  EnumerationBudget tuples;
  tuples.max_tuple_visits = 100;
  CHECK_THROWS_AS(s_u_e_decompose(square, 4, 2, tuples), resource_limit);
  CHECK_THROWS_AS(count_tm(square, 4, 3, tuples), resource_limit);

  CHECK_THROWS_AS(one_point(square, -1), std::invalid_argument);
}

TEST_CASE("growth constant extrapolation") {
  const auto one_d = estimate_zc(line, 10);
  CHECK(std::abs(one_d.value - 1.0) < 0.01);
  CHECK(one_d.band < 0.01);
  REQUIRE(one_d.ratios.size() == 10);
  CHECK(one_d.ratios[0] == doctest::Approx(1.0 / 2.0));

  const auto two_d = estimate_zc(square, 7);
  CHECK(two_d.value > 0.05);
  CHECK(two_d.value < 0.5);
  CHECK(two_d.band < 0.2);

  CHECK_THROWS_AS(estimate_zc(line, 3), std::invalid_argument);
}

TEST_CASE("marked tree json loader validates tree structure") {
  const auto good = marked_tree_from_json(
      R"({"d": 2, "bonds": [[[0,0],[1,0]], [[1,0],[1,1]]], "marks": [[1,1]]})");
  CHECK(good.tree.sites.size() == 3);
  CHECK(good.tree.bonds.size() == 2);
  CHECK(good.tree.sites[0] == Site{0, 0});
  REQUIRE(good.marks.size() == 1);
  CHECK(good.marks[0] == Site{1, 1});
  for (const auto& [a, b] : good.tree.bonds) CHECK(a < b);  // rooted order

  // disconnected from the origin
  CHECK_THROWS_AS(
      marked_tree_from_json(R"({"d": 2, "bonds": [[[5,5],[5,6]]]})"),
      std::invalid_argument);
  // cycle
  CHECK_THROWS_AS(marked_tree_from_json(
                      R"({"d": 2, "bonds": [[[0,0],[1,0]], [[1,0],[1,1]],
                          [[1,1],[0,1]], [[0,1],[0,0]]]})"),
                  std::invalid_argument);
  // arity mismatch
  CHECK_THROWS_AS(
      marked_tree_from_json(R"({"d": 2, "bonds": [[[0,0],[1,0,0]]]})"),
      std::invalid_argument);
}

TEST_CASE("single bond tree with repeated marks realizes every shape") {
  const auto mt = marked_tree_from_json(
      R"({"d": 2, "bonds": [[[0,0],[1,0]]], "marks": [[0,0],[0,0],[1,0]]})");
  const auto rec = backbone(mt.tree, mt.marks);
  CHECK(rec.backbone_bonds.size() == 1);
  REQUIRE(rec.compatible.size() == 3);

  // in every shape only the edge ending at external 3 is nontrivial
  const std::vector<int> edge_to_ext3 = {5, 4, 5};
  for (int si = 0; si < 3; ++si) {
    const auto& real = rec.compatible[si];
    CHECK(real.shape_index == si);
    long total = 0;
    for (size_t j = 0; j < real.path_lengths.size(); ++j) {
      total += real.path_lengths[j];
      const bool marked_edge = static_cast<int>(j) + 1 == edge_to_ext3[si];
      CHECK(real.path_lengths[j] == (marked_edge ? 1 : 0));
      CHECK(real.displacements[j] ==
            (marked_edge ? Site{1, 0} : Site{0, 0}));
    }
    CHECK(total == 1);
  }
}

TEST_CASE("golden marked tree has a unique pinned realization") {
  const auto mt =
      marked_tree_from_json(read_file(data_dir() + "/golden/marked_tree.json"));
  CHECK(mt.tree.bonds.size() == 26);
  CHECK(mt.tree.sites.size() == 27);
  REQUIRE(mt.marks.size() == 3);

  const auto rec = backbone(mt.tree, mt.marks);
  CHECK(rec.backbone_bonds.size() == 18);
  REQUIRE(rec.compatible.size() == 1);
  const auto& real = rec.compatible[0];
  CHECK(real.shape_index == 0);
  CHECK(real.path_lengths == std::vector<long>{3, 2, 5, 4, 4});
  const std::vector<Site> expected_y = {
      {2, -1}, {0, -2}, {4, -1}, {-1, -3}, {2, 2}};
  CHECK(real.displacements == expected_y);

  CHECK_THROWS_AS(backbone(mt.tree, {}), std::invalid_argument);
  CHECK_THROWS_AS(backbone(mt.tree, {Site{40, 40}}), std::invalid_argument);
}

TEST_CASE("two point counts over one bond in one dimension") {
  const auto table = count_tm(line, 1, 2);
  CHECK(table.one_point_count == 2);
  // keys are {shape, y, s}
  CHECK(table.joint.at({0, 0, 0}) == 2);
  CHECK(table.joint.at({0, 1, 1}) == 1);
  CHECK(table.joint.at({0, -1, 1}) == 1);
  CHECK(table.joint.size() == 3);
  CHECK(table.spatial.at({0, 0}) == 2);
  CHECK(table.spatial.at({0, 1}) == 1);
  CHECK(table.spatial.size() == 3);

  const auto probs = p_tables(table);
  CHECK(probs.denominator == 4);
  Rational mass(0);
  for (const auto& [key, q] : probs.spatial) mass += q;
  CHECK(mass == Rational(1));
  CHECK(probs.joint.at({0, 1, 1}) == Rational(1, 4));

  CHECK_THROWS_AS(count_tm(line, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(count_tm(line, 1, 6), resource_limit);
}

TEST_CASE("count tables satisfy mark sum and inversion symmetry") {
  for (int n : {1, 2, 3}) {
    const auto table = count_tm(square, n, 2);
    long spatial_total = 0;
    for (const auto& [key, c] : table.spatial) {
      spatial_total += c;
      // negating the displacement gives the count of the reflected tree
      std::vector<long> mirrored = key;
      for (size_t i = 1; i < mirrored.size(); ++i) mirrored[i] = -mirrored[i];
      CHECK(table.spatial.at(mirrored) == c);
    }
    CHECK(spatial_total == (n + 1) * table.one_point_count);

    long joint_total = 0;
    for (const auto& [key, c] : table.joint) joint_total += c;
    CHECK(joint_total == spatial_total);
  }
}

TEST_CASE("membership decomposition tables partition exactly") {
  for (int n : {0, 1, 2, 3, 4}) {
    for (int l : {1, 2, 3}) {
      const auto tables = s_u_e_decompose(square, n, l);
      long expected = tables.one_point_count;
      for (int i = 0; i < l; ++i) expected *= n + 1;
      CHECK(tables.s_total == expected);
      CHECK(tables.s_total == tables.u_total + tables.e_total);

      long s_sum = 0, u_sum = 0, e_sum = 0;
      for (const auto& [marks, counts] : tables.sorted()) {
        CHECK(counts[0] == counts[1] + counts[2]);  // s = u + e entrywise
        s_sum += counts[0];
        u_sum += counts[1];
        e_sum += counts[2];
      }
      CHECK(s_sum == tables.s_total);
      CHECK(u_sum == tables.u_total);
      CHECK(e_sum == tables.e_total);
    }
  }
}

TEST_CASE("mark keys pack and unpack round trip") {
  const auto tables = s_u_e_decompose(square, 2, 2);
  for (const auto& [key, counts] : tables.by_marks) {
    (void)counts;
    const auto marks = tables.unpack(key);
    CHECK(tables.pack(marks) == key);
  }
  CHECK_THROWS_AS(tables.pack({Site{0, 0}}), std::invalid_argument);
}

TEST_CASE("threaded scan merges to the sequential result") {
  EnumerationBudget serial;
  EnumerationBudget pooled;
  pooled.threads = 3;
  const auto a = s_u_e_decompose(square, 4, 3, serial);
  const auto b = s_u_e_decompose(square, 4, 3, pooled);
  CHECK(a.s_total == b.s_total);
  CHECK(a.u_total == b.u_total);
  CHECK(a.e_total == b.e_total);
  CHECK(a.sorted() == b.sorted());
}

TEST_CASE("shape sum overcount stays within the degenerate bound") {
  for (int n : {0, 1, 2, 3, 4}) {
    for (int l : {1, 2}) {
      const auto rep = verify_overcount_bound(square, n, l);
      CHECK(rep.bound_factor == 0);
      CHECK(rep.lhs == 0);  // one compatible shape per tuple
      CHECK(rep.holds);
    }
    const auto rep = verify_overcount_bound(square, n, 3);
    CHECK(rep.bound_factor == 2);
    CHECK(rep.shat0 == rep.uhat0 + rep.ehat0);
    CHECK(rep.sum_sigma_that0 >= rep.shat0);
    CHECK(rep.lhs == rep.sum_sigma_that0 - rep.shat0);
    CHECK(rep.rhs == 2 * rep.ehat0);
    CHECK(rep.slack == rep.rhs - rep.lhs);
    CHECK(rep.holds);
  }

  // zero bonds, three marks: every pairing fits the point tree
  const auto point = verify_overcount_bound(square, 0, 3);
  CHECK(point.shat0 == 1);
  CHECK(point.sum_sigma_that0 == 3);
  CHECK(point.ehat0 == 1);
  CHECK(point.uhat0 == 0);
  CHECK(point.lhs == 2);
  CHECK(point.rhs == 2);
  CHECK(point.slack == 0);

  CHECK_THROWS_AS(verify_overcount_bound(square, 1, 4), std::invalid_argument);
}

TEST_CASE("distance formula scan agrees with median realizations") {
  // independent recount of the l = 3 aggregates through the generic
  // per-shape median machinery
  long s_total = 0, u_total = 0, e_total = 0, sum_sigma = 0, trees = 0;
  for_each_tree(square, 3, [&](const LatticeTree& t) {
    ++trees;
    const int V = static_cast<int>(t.sites.size());
    for (int x1 = 0; x1 < V; ++x1)
      for (int x2 = 0; x2 < V; ++x2)
        for (int x3 = 0; x3 < V; ++x3) {
          const auto rec =
              backbone(t, {t.sites[x1], t.sites[x2], t.sites[x3]});
          ++s_total;
          sum_sigma += static_cast<long>(rec.compatible.size());
          bool full = false;
          for (const auto& real : rec.compatible)
            full = full ||
                   *std::min_element(real.path_lengths.begin(),
                                     real.path_lengths.end()) > 0;
          if (full)
            ++u_total;
          else
            ++e_total;
        }
  });

  const auto tables = s_u_e_decompose(square, 3, 3);
  const auto rep = verify_overcount_bound(square, 3, 3);
  CHECK(tables.one_point_count == trees);
  CHECK(tables.s_total == s_total);
  CHECK(tables.u_total == u_total);
  CHECK(tables.e_total == e_total);
  CHECK(rep.sum_sigma_that0 == sum_sigma);
}

TEST_CASE("fourier transforms of count tables") {
  const auto table = count_tm(square, 3, 2);
  const auto at_zero = fourier_tm(table, 0, {{0.0, 0.0}});
  CHECK(at_zero.real() == doctest::Approx(4.0 * table.one_point_count));
  CHECK(at_zero.imag() == 0.0);

  const auto at_k = fourier_tm(table, 0, {{0.7, -0.3}});
  CHECK(std::abs(at_k.imag()) < 1e-9 * std::abs(at_k.real()));
  CHECK(at_k.real() < at_zero.real());
  CHECK_THROWS_AS(fourier_tm(table, 0, {{0.7, -0.3}, {0.0, 0.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fourier_tm(table, 0, {{0.7}}), std::invalid_argument);
}

TEST_CASE("one mark membership transform equals the two point transform") {
  const int n = 3;
  const auto sue = s_u_e_decompose(square, n, 1);
  const auto table = count_tm(square, n, 2);
  for (const std::vector<double> k : {std::vector<double>{0.9, 0.2},
                                      std::vector<double>{-0.4, 1.1}}) {
    std::complex<double> shat(0.0, 0.0);
    for (const auto& [marks, counts] : sue.sorted()) {
      const double phase = k[0] * marks[0] + k[1] * marks[1];
      shat += static_cast<double>(counts[0]) *
              std::complex<double>(std::cos(phase), std::sin(phase));
    }
    const auto that = fourier_tm(table, 0, {k});
    CHECK(shat.real() == doctest::Approx(that.real()).epsilon(1e-12));
    CHECK(std::abs(shat.imag() - that.imag()) < 1e-9);
  }
}

TEST_CASE("two mark membership transform routes through the three point function") {
  const int n = 3;
  const auto sue = s_u_e_decompose(square, n, 2);
  const auto table = count_tm(square, n, 3);

  const std::vector<double> k1 = {0.8, -0.1};
  const std::vector<double> k2 = {0.3, 0.5};
  std::complex<double> shat(0.0, 0.0);
  for (const auto& [marks, counts] : sue.sorted()) {
    const double phase = k1[0] * marks[0] + k1[1] * marks[1] +
                         k2[0] * marks[2] + k2[1] * marks[3];
    shat += static_cast<double>(counts[0]) *
            std::complex<double>(std::cos(phase), std::sin(phase));
  }

  auto shapes3 = enumerate_shapes(3);
  const auto k_edges = routed_frequencies(shapes3[0], {k1, k2});
  REQUIRE(k_edges.size() == 3);
  CHECK(k_edges[0] == std::vector<double>{k1[0] + k2[0], k1[1] + k2[1]});
  const auto that = fourier_tm(table, 0, k_edges);
  CHECK(shat.real() == doctest::Approx(that.real()).epsilon(1e-12));
  CHECK(std::abs(shat.imag() - that.imag()) < 1e-9);
}

TEST_CASE("moment characteristic normalizes to one at zero frequency") {
  const auto tables = s_u_e_decompose(square, 4, 2);
  const auto base = moment_char(tables, {{0.0, 0.0}, {0.0, 0.0}}, 1.0);
  CHECK(base.real() == 1.0);
  CHECK(base.imag() == 0.0);

  const auto small = moment_char(tables, {{0.5, 0.0}, {0.0, 0.5}}, 1.0);
  const auto large = moment_char(tables, {{2.0, 0.0}, {0.0, 2.0}}, 1.0);
  CHECK(small.real() < 1.0);
  CHECK(small.real() > large.real());
  CHECK(std::abs(small.imag()) < 1e-12);

  CHECK_THROWS_AS(moment_char(tables, {{0.0, 0.0}}, 1.0),
                  std::invalid_argument);
}
