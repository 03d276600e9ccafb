#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "iselab/ise.hpp"
#include "iselab/rational.hpp"
#include "iselab/shapes.hpp"

namespace iselab {

struct LatticeModel {
  enum class Flavor { nearest_neighbour, spread_out };
  int d = 2;
  Flavor flavor = Flavor::nearest_neighbour;
  int L = 1;  // sup-norm bond range, spread-out only

  // Bond offsets from a site, in lexicographic order: ||v||_1 = 1 for
  // nearest-neighbour, 0 < ||v||_inf <= L for spread-out.
  std::vector<std::vector<int>> neighbor_offsets() const;
};

using Site = std::vector<int>;

// A finite acyclic connected set of lattice bonds containing the origin.
// sites[0] is the origin; bonds store (nearer, farther) index pairs, the
// second index always naming the site that the bond attached to the tree.
struct LatticeTree {
  std::vector<Site> sites;
  std::vector<std::pair<int, int>> bonds;
  int bond_count() const { return static_cast<int>(bonds.size()); }
};

// Parse {"d": .., "bonds": [[[..],[..]], ..], "marks": [[..], ..]} documents.
// Validates connectivity, acyclicity and the origin. Marks are optional.
struct MarkedTree {
  LatticeTree tree;
  std::vector<Site> marks;
};
MarkedTree marked_tree_from_json(const std::string& text);

struct EnumerationBudget {
  long max_trees = 2'000'000;
  long max_tuple_visits = 500'000'000;
  int threads = 1;
};

// Visit every n-bond lattice tree containing the origin exactly once, in a
// deterministic order (candidate-list growth; each bond's insertion point is
// fixed by the order its parent entered the tree).
void for_each_tree(const LatticeModel& model, int n,
                   const std::function<void(const LatticeTree&)>& visit,
                   const EnumerationBudget& budget = {});

std::vector<LatticeTree> enumerate_trees(const LatticeModel& model, int n,
                                         const EnumerationBudget& budget = {});

// Visit every connected n_sites-site set containing the origin exactly once
// (same candidate-list scheme as the tree enumeration, over sites instead of
// bonds). Sites arrive in discovery order starting at the origin; max_trees
// caps the number of visited sets.
void for_each_animal(const LatticeModel& model, int n_sites,
                     const std::function<void(const std::vector<Site>&)>& visit,
                     const EnumerationBudget& budget = {});

// t_n^(1): the number of n-bond lattice trees containing the origin.
long one_point(const LatticeModel& model, int n,
               const EnumerationBudget& budget = {});

// Ratio extrapolation of the growth constant: t_{n-1}/t_n corrected for the
// leading 1/n term, with the spread of the last two extrapolants as band.
struct ZcEstimate {
  double value = 0.0;
  double band = 0.0;
  std::vector<double> ratios;  // t_{n-1}^(1) / t_n^(1), n = 1..n_max
};
ZcEstimate estimate_zc(const LatticeModel& model, int n_max,
                       const EnumerationBudget& budget = {});

// One realization of a shape by a marked tree: per-edge path lengths and
// displacements, indexed by shape edge label order.
struct ShapeRealization {
  int shape_index = 0;
  std::vector<long> path_lengths;
  std::vector<Site> displacements;
};

struct BackboneRecord {
  std::vector<std::pair<int, int>> backbone_bonds;  // index pairs into sites
  std::vector<ShapeRealization> compatible;         // sorted by shape_index
};

// The minimal subtree spanning origin and marks, with every compatible shape
// and its realization data. Marks are ordered, may repeat and may equal the
// origin; a realization with all path lengths positive is unique.
BackboneRecord backbone(const LatticeTree& tree, const std::vector<Site>& marks);

// Count tables over (shape, displacements, path lengths) for trees with
// m - 1 ordered marks; every compatible shape of every marked tree counts.
struct CountTable {
  LatticeModel model;
  int n = 0;
  int m = 2;
  long one_point_count = 0;
  // key {sigma, y_1.., y_J flattened, s_1..s_J} -> count
  std::map<std::vector<long>, long> joint;
  // key {sigma, y flattened} -> count (path lengths summed out)
  std::map<std::vector<long>, long> spatial;
};
CountTable count_tm(const LatticeModel& model, int n, int m,
                    const EnumerationBudget& budget = {});

// Sum of count * exp(i sum_j k_j . y_j) over one shape's spatial table.
// Lattice inversion symmetry makes it real; the imaginary part is returned
// for the caller to assert against.
std::complex<double> fourier_tm(const CountTable& table, int shape_index,
                                const VecList& k_edges);

// Exact probability tables: counts divided by the zero-frequency total over
// all shapes. Masses sum to exactly 1.
struct ProbabilityTable {
  long denominator = 0;
  std::map<std::vector<long>, Rational> joint;
  std::map<std::vector<long>, Rational> spatial;
};
ProbabilityTable p_tables(const CountTable& table);

// Decomposition of the l-mark membership counts: s counts trees containing
// the marked sites, u those whose 2l-1 backbone paths are all nontrivial,
// e the rest (some path has zero length). s = u + e entrywise.
struct SUETables {
  LatticeModel model;
  int n = 0;
  int l = 1;
  long one_point_count = 0;
  long s_total = 0;  // equals (n+1)^l * t_n^(1)
  long u_total = 0;
  long e_total = 0;
  // marks packed per coordinate into bytes (offset +128), low dims first
  std::unordered_map<std::uint64_t, std::array<long, 3>> by_marks;

  std::uint64_t pack(const std::vector<Site>& marks) const;
  std::vector<Site> unpack(std::uint64_t key) const;
  // sorted flattened view for serialization and order-stable iteration
  std::map<std::vector<long>, std::array<long, 3>> sorted() const;
};
SUETables s_u_e_decompose(const LatticeModel& model, int n, int l,
                          const EnumerationBudget& budget = {});

// Exact integer both-sides report of the shape-sum overcount bound
//   |shat(0) - sum_sigma that(sigma; 0)| <= ((2l-3)!! - 1) * ehat(0).
struct OvercountReport {
  int n = 0;
  int l = 1;
  long shat0 = 0;
  long sum_sigma_that0 = 0;
  long uhat0 = 0;
  long ehat0 = 0;
  long bound_factor = 0;  // (2l-3)!! - 1
  long lhs = 0;
  long rhs = 0;
  long slack = 0;  // rhs - lhs
  bool holds = false;
};
OvercountReport verify_overcount_bound(const LatticeModel& model, int n, int l,
                                       const EnumerationBudget& budget = {});

// Empirical moment characteristic of the rescaled l-mark measure:
//   sum_x s(x) prod_i exp(i scale n^{-1/4} k_i . x_i) / s-total.
// Exactly 1 at k = 0. The scale constant is caller supplied.
std::complex<double> moment_char(const SUETables& tables, const VecList& ktilde,
                                 double scale);

}  // namespace iselab
