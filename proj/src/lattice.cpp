#include "iselab/lattice.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "iselab/errors.hpp"

namespace iselab {

namespace {

constexpr int kMaxDims = 8;
constexpr int kMaxCoord = 119;  // keeps byte packing (offset +128) valid

void check_model(const LatticeModel& model) {
  if (model.d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (model.d > kMaxDims)
    throw std::invalid_argument("enumeration supports d <= 8");
  if (model.flavor == LatticeModel::Flavor::spread_out && model.L < 1)
    throw std::invalid_argument("spread-out range L must be >= 1");
}

using Coords = std::array<std::int8_t, kMaxDims>;

std::uint64_t pack_coords(const Coords& c, int d) {
  std::uint64_t key = 0;
  for (int i = 0; i < d; ++i)
    key |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(c[i] + 128))
           << (8 * i);
  return key;
}

// Raw view of one enumerated tree: per-site coordinates and the parent index
// of every non-origin site (the bond set, rooted at the origin).
struct RawTree {
  int d = 0;
  int site_count = 0;
  const Coords* coords = nullptr;
  const int* parent = nullptr;
};

using RawVisitor = std::function<void(const RawTree&)>;

struct Grower {
  const LatticeModel& model;
  int n;
  std::vector<std::vector<int>> offsets;
  std::vector<Coords> coords;
  std::vector<int> parent;
  std::unordered_set<std::uint64_t> occupied;
  std::vector<std::pair<int, std::uint64_t>> cand;  // (parent index, site key)
  std::vector<Coords> cand_coords;
  const RawVisitor& visit;
  std::atomic<long>* tree_counter;
  long max_trees;

  Grower(const LatticeModel& m, int bonds, const RawVisitor& v,
         std::atomic<long>* counter, long cap)
      : model(m), n(bonds), offsets(m.neighbor_offsets()), visit(v),
        tree_counter(counter), max_trees(cap) {
    Coords origin{};
    coords.push_back(origin);
    parent.push_back(-1);
    occupied.insert(pack_coords(origin, model.d));
    push_candidates_of(0);
  }

  void push_candidates_of(int site_index) {
    const Coords& base = coords[site_index];
    for (const auto& off : offsets) {
      Coords next = base;
      bool in_range = true;
      for (int i = 0; i < model.d; ++i) {
        const int v = next[i] + off[i];
        if (v < -kMaxCoord || v > kMaxCoord) {
          in_range = false;
          break;
        }
        next[i] = static_cast<std::int8_t>(v);
      }
      if (!in_range) continue;
      const std::uint64_t key = pack_coords(next, model.d);
      if (occupied.count(key)) continue;
      cand.emplace_back(site_index, key);
      cand_coords.push_back(next);
    }
  }

  void emit() {
    const long seen = ++*tree_counter;
    if (seen > max_trees)
      throw resource_limit("tree enumeration budget exceeded");
    RawTree raw;
    raw.d = model.d;
    raw.site_count = static_cast<int>(coords.size());
    raw.coords = coords.data();
    raw.parent = parent.data();
    visit(raw);
  }

  void grow(size_t first, int bonds_left) {
    if (bonds_left == 0) {
      emit();
      return;
    }
    for (size_t i = first; i < cand.size(); ++i) {
      step(i, bonds_left);
    }
  }

  void step(size_t i, int bonds_left) {
    const auto [p, key] = cand[i];
    if (occupied.count(key)) return;
    coords.push_back(cand_coords[i]);
    parent.push_back(p);
    occupied.insert(key);
    const size_t cand_mark = cand.size();
    push_candidates_of(static_cast<int>(coords.size()) - 1);
    grow(i + 1, bonds_left - 1);
    cand.resize(cand_mark);
    cand_coords.resize(cand_mark);
    occupied.erase(key);
    coords.pop_back();
    parent.pop_back();
  }
};

// Every tree is built exactly once: each bond's candidate is created when its
// parent site enters the tree, and executions pick candidates with strictly
// increasing indices, so a tree corresponds to the unique execution that adds
// its bonds in candidate-index order. Sharding partitions by the index of the
// first candidate chosen.
void enumerate_raw(const LatticeModel& model, int n, const RawVisitor& visit,
                   std::atomic<long>* counter, long max_trees, int shard,
                   int shard_count) {
  check_model(model);
  if (n < 0) throw std::invalid_argument("bond count must be >= 0");
  if (n > kMaxCoord) throw std::invalid_argument("bond count too large");
  Grower g(model, n, visit, counter, max_trees);
  if (n == 0) {
    if (shard == 0) g.emit();
    return;
  }
  for (size_t i = 0; i < g.cand.size(); ++i) {
    if (static_cast<int>(i % static_cast<size_t>(shard_count)) != shard)
      continue;
    g.step(i, n);
  }
}

// Per-tree scratch for marked-tree analysis: adjacency and all-pairs
// distances on the site-index graph.
struct TreeScratch {
  int V = 0;
  std::vector<std::vector<int>> adj;
  std::vector<std::int16_t> dist;  // V * V

  int d(int a, int b) const { return dist[static_cast<size_t>(a) * V + b]; }

  void build_from_parents(const int* parent, int site_count) {
    V = site_count;
    adj.assign(V, {});
    for (int v = 1; v < V; ++v) {
      adj[parent[v]].push_back(v);
      adj[v].push_back(parent[v]);
    }
    fill_distances();
  }

  void build_from_bonds(const std::vector<std::pair<int, int>>& bonds,
                        int site_count) {
    V = site_count;
    adj.assign(V, {});
    for (const auto& [a, b] : bonds) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    fill_distances();
  }

  void fill_distances() {
    dist.assign(static_cast<size_t>(V) * V, -1);
    std::vector<int> queue(V);
    for (int src = 0; src < V; ++src) {
      auto* row = &dist[static_cast<size_t>(src) * V];
      row[src] = 0;
      int head = 0, tail = 0;
      queue[tail++] = src;
      while (head < tail) {
        const int u = queue[head++];
        for (int w : adj[u]) {
          if (row[w] < 0) {
            row[w] = static_cast<std::int16_t>(row[u] + 1);
            queue[tail++] = w;
          }
        }
      }
    }
  }

  // Unique vertex minimizing the distance sum to three vertices.
  int median(int a, int b, int c) const {
    const int target = (d(a, b) + d(a, c) + d(b, c)) / 2;
    for (int v = 0; v < V; ++v)
      if (d(a, v) + d(b, v) + d(c, v) == target) return v;
    throw std::logic_error("tree median not found");
  }
};

// Size (bond count) of the minimal subtree spanning the given vertices,
// built incrementally: the distance from a new vertex to the partial subtree
// is the minimum point-to-path distance over pairs already included.
int steiner_size(const TreeScratch& t, const std::vector<int>& verts) {
  if (verts.size() < 2) return 0;
  int size = t.d(verts[0], verts[1]);
  for (size_t i = 2; i < verts.size(); ++i) {
    int best = std::numeric_limits<int>::max();
    for (size_t a = 0; a + 1 < i; ++a)
      for (size_t b = a + 1; b < i; ++b) {
        const int da = t.d(verts[i], verts[a]);
        const int db = t.d(verts[i], verts[b]);
        best = std::min(best, (da + db - t.d(verts[a], verts[b])) / 2);
      }
    size += best;
  }
  return size;
}

// Per-shape routing data reused across marked tuples: for every internal
// vertex, one representative external per branch; plus the edge list.
struct ShapePlan {
  int m = 0;
  std::vector<ShapeEdge> edges;
  // internal vertex id (>= m) -> its three representative externals
  std::vector<std::array<int, 3>> reps;  // indexed by (vertex - m)

  explicit ShapePlan(const Shape& s) : m(s.m()), edges(s.edges()) {
    reps.assign(static_cast<size_t>(s.vertex_count() - m), {-1, -1, -1});
    for (int u = m; u < s.vertex_count(); ++u) {
      // group externals by the first edge of the path from u
      std::map<int, int> branch_min;  // first edge label -> min external
      for (int e = 0; e < m; ++e) {
        const auto path = s.edges_on_path(u, e);
        const auto [it, fresh] = branch_min.emplace(path.front(), e);
        if (!fresh) it->second = std::min(it->second, e);
      }
      int j = 0;
      for (const auto& [edge_label, ext] : branch_min) {
        (void)edge_label;
        reps[u - m][j++] = ext;
      }
      if (j != 3) throw std::logic_error("internal vertex is not ternary");
    }
  }
};

// Realizations of every compatible shape for one marked tuple, computed from
// the convention that each internal vertex maps to the tree median of its
// three representative externals; the realization is compatible exactly when
// the edge path lengths tile the spanning subtree.
struct RealizationScratch {
  std::vector<int> phi;      // shape vertex -> tree site index
  std::vector<long> lengths; // per edge label
};

bool realize_shape(const TreeScratch& t, const ShapePlan& plan,
                   const std::vector<int>& ext_sites, int steiner,
                   RealizationScratch& out) {
  const int m = plan.m;
  const int vcount = m + static_cast<int>(plan.reps.size());
  out.phi.assign(vcount, -1);
  for (int e = 0; e < m; ++e) out.phi[e] = ext_sites[e];
  for (size_t u = 0; u < plan.reps.size(); ++u) {
    const auto& r = plan.reps[u];
    out.phi[m + static_cast<int>(u)] =
        t.median(ext_sites[r[0]], ext_sites[r[1]], ext_sites[r[2]]);
  }
  out.lengths.assign(plan.edges.size(), 0);
  long total = 0;
  for (const auto& e : plan.edges) {
    const long len = t.d(out.phi[e.u], out.phi[e.v]);
    out.lengths[e.label - 1] = len;
    total += len;
  }
  return total == steiner;
}

std::vector<Site> unpack_sites(const RawTree& raw) {
  std::vector<Site> sites(raw.site_count);
  for (int i = 0; i < raw.site_count; ++i) {
    sites[i].resize(raw.d);
    for (int c = 0; c < raw.d; ++c) sites[i][c] = raw.coords[i][c];
  }
  return sites;
}

LatticeTree to_tree(const RawTree& raw) {
  LatticeTree tree;
  tree.sites = unpack_sites(raw);
  tree.bonds.reserve(raw.site_count - 1);
  for (int v = 1; v < raw.site_count; ++v)
    tree.bonds.emplace_back(raw.parent[v], v);
  return tree;
}

long double_factorial(int k) {  // k!! with (-1)!! = 1
  long r = 1;
  for (int i = k; i >= 2; i -= 2) r *= i;
  return r;
}

}  // namespace

std::vector<std::vector<int>> LatticeModel::neighbor_offsets() const {
  check_model(*this);
  const int range = (flavor == Flavor::nearest_neighbour) ? 1 : L;
  std::vector<std::vector<int>> out;
  std::vector<int> v(d, -range);
  while (true) {
    int l1 = 0, linf = 0;
    for (int c : v) {
      l1 += std::abs(c);
      linf = std::max(linf, std::abs(c));
    }
    const bool keep = (flavor == Flavor::nearest_neighbour)
                          ? (l1 == 1)
                          : (linf > 0 && linf <= L);
    if (keep) out.push_back(v);
    int i = d - 1;
    while (i >= 0 && v[i] == range) v[i--] = -range;
    if (i < 0) break;
    ++v[i];
  }
  return out;
}

void for_each_tree(const LatticeModel& model, int n,
                   const std::function<void(const LatticeTree&)>& visit,
                   const EnumerationBudget& budget) {
  std::atomic<long> counter{0};
  enumerate_raw(
      model, n, [&](const RawTree& raw) { visit(to_tree(raw)); }, &counter,
      budget.max_trees, 0, 1);
}

std::vector<LatticeTree> enumerate_trees(const LatticeModel& model, int n,
                                         const EnumerationBudget& budget) {
  std::vector<LatticeTree> out;
  for_each_tree(model, n, [&](const LatticeTree& t) { out.push_back(t); },
                budget);
  return out;
}

namespace {

// Redelmeier-style site growth: candidates join the list the first time any
// occupied site reaches them (the listed set blocks re-discovery through a
// second neighbour), and an animal is the choice of an increasing candidate
// index sequence, so every animal arrives exactly once.
struct AnimalGrower {
  const LatticeModel& model;
  std::vector<std::vector<int>> offsets;
  std::vector<Coords> coords;
  std::unordered_set<std::uint64_t> listed;
  std::vector<std::uint64_t> cand;
  std::vector<Coords> cand_coords;
  const std::function<void(const std::vector<Site>&)>& visit;
  long emitted = 0;
  long max_animals;

  AnimalGrower(const LatticeModel& m,
               const std::function<void(const std::vector<Site>&)>& v, long cap)
      : model(m), offsets(m.neighbor_offsets()), visit(v), max_animals(cap) {
    Coords origin{};
    coords.push_back(origin);
    listed.insert(pack_coords(origin, model.d));
    push_candidates_of(0);
  }

  void push_candidates_of(int site_index) {
    const Coords& base = coords[site_index];
    for (const auto& off : offsets) {
      Coords next = base;
      bool in_range = true;
      for (int i = 0; i < model.d; ++i) {
        const int v = next[i] + off[i];
        if (v < -kMaxCoord || v > kMaxCoord) {
          in_range = false;
          break;
        }
        next[i] = static_cast<std::int8_t>(v);
      }
      if (!in_range) continue;
      const std::uint64_t key = pack_coords(next, model.d);
      if (!listed.insert(key).second) continue;
      cand.push_back(key);
      cand_coords.push_back(next);
    }
  }

  void emit() {
    if (++emitted > max_animals)
      throw resource_limit("animal enumeration budget exceeded");
    std::vector<Site> sites(coords.size());
    for (size_t i = 0; i < coords.size(); ++i) {
      sites[i].resize(model.d);
      for (int c = 0; c < model.d; ++c) sites[i][c] = coords[i][c];
    }
    visit(sites);
  }

  void grow(size_t first, int sites_left) {
    if (sites_left == 0) {
      emit();
      return;
    }
    for (size_t i = first; i < cand.size(); ++i) {
      coords.push_back(cand_coords[i]);
      const size_t cand_mark = cand.size();
      push_candidates_of(static_cast<int>(coords.size()) - 1);
      grow(i + 1, sites_left - 1);
      for (size_t j = cand_mark; j < cand.size(); ++j) listed.erase(cand[j]);
      cand.resize(cand_mark);
      cand_coords.resize(cand_mark);
      coords.pop_back();
    }
  }
};

}  // namespace

void for_each_animal(const LatticeModel& model, int n_sites,
                     const std::function<void(const std::vector<Site>&)>& visit,
                     const EnumerationBudget& budget) {
  check_model(model);
  if (n_sites < 1) throw std::invalid_argument("site count must be >= 1");
  if (n_sites > kMaxCoord) throw std::invalid_argument("site count too large");
  AnimalGrower g(model, visit, budget.max_trees);
  g.grow(0, n_sites - 1);
}

long one_point(const LatticeModel& model, int n,
               const EnumerationBudget& budget) {
  std::atomic<long> counter{0};
  long count = 0;
  enumerate_raw(model, n, [&](const RawTree&) { ++count; }, &counter,
                budget.max_trees, 0, 1);
  return count;
}

ZcEstimate estimate_zc(const LatticeModel& model, int n_max,
                       const EnumerationBudget& budget) {
  if (n_max < 4)
    throw std::invalid_argument("ratio extrapolation needs n_max >= 4");
  std::vector<long> t(n_max + 1);
  for (int n = 0; n <= n_max; ++n) t[n] = one_point(model, n, budget);
  ZcEstimate est;
  for (int n = 1; n <= n_max; ++n)
    est.ratios.push_back(static_cast<double>(t[n - 1]) /
                         static_cast<double>(t[n]));
  // r_n = t_{n-1}/t_n -> z_c with a 1/n correction; eliminate it linearly.
  auto extrapolant = [&](int n) {
    const double rn = est.ratios[n - 1];
    const double rp = est.ratios[n - 2];
    return n * rn - (n - 1) * rp;
  };
  est.value = extrapolant(n_max);
  est.band = std::abs(extrapolant(n_max) - extrapolant(n_max - 1));
  return est;
}

MarkedTree marked_tree_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  MarkedTree out;
  const int d = doc.at("d").get<int>();
  if (d < 1 || d > kMaxDims) throw std::invalid_argument("bad dimension");

  std::map<Site, int> index;
  std::vector<Site> sites;
  auto intern = [&](const Site& s) {
    if (static_cast<int>(s.size()) != d)
      throw std::invalid_argument("site arity mismatch");
    auto it = index.find(s);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(sites.size());
    index.emplace(s, id);
    sites.push_back(s);
    return id;
  };
  const Site origin(d, 0);
  intern(origin);

  std::vector<std::pair<int, int>> raw_bonds;
  for (const auto& bond : doc.at("bonds")) {
    const auto a = intern(bond.at(0).get<Site>());
    const auto b = intern(bond.at(1).get<Site>());
    if (a == b) throw std::invalid_argument("degenerate bond");
    raw_bonds.emplace_back(a, b);
  }
  if (sites.size() != raw_bonds.size() + 1)
    throw std::invalid_argument("bond set is not a tree");

  // Root at the origin: BFS orientation, relabelling sites in visit order.
  std::vector<std::vector<int>> adj(sites.size());
  for (const auto& [a, b] : raw_bonds) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> order, new_id(sites.size(), -1), parent(sites.size(), -1);
  order.push_back(0);
  new_id[0] = 0;
  for (size_t head = 0; head < order.size(); ++head) {
    const int u = order[head];
    for (int w : adj[u]) {
      if (new_id[w] >= 0) continue;
      new_id[w] = static_cast<int>(order.size());
      parent[w] = u;
      order.push_back(w);
    }
  }
  if (order.size() != sites.size())
    throw std::invalid_argument("bond set is not connected to the origin");

  out.tree.sites.resize(sites.size());
  for (size_t old = 0; old < sites.size(); ++old)
    out.tree.sites[new_id[old]] = sites[old];
  for (size_t i = 1; i < order.size(); ++i) {
    const int old = order[i];
    out.tree.bonds.emplace_back(new_id[parent[old]], new_id[old]);
  }

  if (doc.contains("marks"))
    for (const auto& m : doc.at("marks")) out.marks.push_back(m.get<Site>());
  return out;
}

BackboneRecord backbone(const LatticeTree& tree, const std::vector<Site>& marks) {
  if (marks.empty()) throw std::invalid_argument("need at least one mark");
  const int m = static_cast<int>(marks.size()) + 1;
  if (m > 7) throw resource_limit("too many marks for shape realization");

  std::map<Site, int> index;
  for (size_t i = 0; i < tree.sites.size(); ++i)
    index.emplace(tree.sites[i], static_cast<int>(i));
  std::vector<int> ext_sites(m);
  ext_sites[0] = 0;
  for (int i = 1; i < m; ++i) {
    const auto it = index.find(marks[i - 1]);
    if (it == index.end())
      throw std::invalid_argument("mark is not a site of the tree");
    ext_sites[i] = it->second;
  }

  TreeScratch scratch;
  scratch.build_from_bonds(tree.bonds, static_cast<int>(tree.sites.size()));
  const int steiner = steiner_size(scratch, ext_sites);

  BackboneRecord rec;
  for (const auto& [a, b] : tree.bonds) {
    bool used = false;
    for (size_t i = 0; i < ext_sites.size() && !used; ++i)
      for (size_t j = i + 1; j < ext_sites.size() && !used; ++j) {
        const int pq = scratch.d(ext_sites[i], ext_sites[j]);
        if (scratch.d(ext_sites[i], a) + 1 + scratch.d(b, ext_sites[j]) == pq ||
            scratch.d(ext_sites[i], b) + 1 + scratch.d(a, ext_sites[j]) == pq)
          used = true;
      }
    if (used) rec.backbone_bonds.emplace_back(a, b);
  }
  if (static_cast<int>(rec.backbone_bonds.size()) != steiner)
    throw std::logic_error("spanning subtree size mismatch");

  const auto& shapes = enumerate_shapes(m);
  RealizationScratch rs;
  bool has_full = false;
  for (size_t si = 0; si < shapes.size(); ++si) {
    const ShapePlan plan(shapes[si]);
    if (!realize_shape(scratch, plan, ext_sites, steiner, rs)) continue;
    ShapeRealization real;
    real.shape_index = static_cast<int>(si);
    real.path_lengths = rs.lengths;
    for (const auto& e : plan.edges) {
      Site y(tree.sites[rs.phi[e.v]]);
      for (size_t c = 0; c < y.size(); ++c)
        y[c] -= tree.sites[rs.phi[e.u]][c];
      real.displacements.push_back(std::move(y));
    }
    const bool full = *std::min_element(real.path_lengths.begin(),
                                        real.path_lengths.end()) > 0;
    has_full = has_full || full;
    rec.compatible.push_back(std::move(real));
  }
  if (rec.compatible.empty())
    throw std::logic_error("no compatible shape for backbone");
  if (has_full && rec.compatible.size() != 1)
    throw std::logic_error("nondegenerate backbone with several shapes");
  return rec;
}

CountTable count_tm(const LatticeModel& model, int n, int m,
                    const EnumerationBudget& budget) {
  check_model(model);
  if (m < 2) throw std::invalid_argument("m must be >= 2");
  if (m > 5) throw resource_limit("count table supports m <= 5");
  const auto& shapes = enumerate_shapes(m);
  std::vector<ShapePlan> plans;
  for (const auto& s : shapes) plans.emplace_back(s);
  const int J = 2 * m - 3;

  CountTable table;
  table.model = model;
  table.n = n;
  table.m = m;

  long tuple_visits = 0;
  TreeScratch scratch;
  RealizationScratch rs;
  std::vector<int> ext_sites(m);
  std::vector<long> joint_key(1 + static_cast<size_t>(J) * (model.d + 1));
  std::vector<long> spatial_key(1 + static_cast<size_t>(J) * model.d);

  std::atomic<long> counter{0};
  enumerate_raw(
      model, n,
      [&](const RawTree& raw) {
        ++table.one_point_count;
        const int V = raw.site_count;
        long tuples = 1;
        for (int i = 1; i < m; ++i) tuples *= V;
        tuple_visits += tuples;
        if (tuple_visits > budget.max_tuple_visits)
          throw resource_limit("mark tuple budget exceeded");
        scratch.build_from_parents(raw.parent, V);

        std::vector<int> odo(m - 1, 0);
        while (true) {
          ext_sites[0] = 0;
          for (int i = 1; i < m; ++i) ext_sites[i] = odo[i - 1];
          const int steiner = steiner_size(scratch, ext_sites);
          for (size_t si = 0; si < plans.size(); ++si) {
            if (!realize_shape(scratch, plans[si], ext_sites, steiner, rs))
              continue;
            joint_key[0] = static_cast<long>(si);
            spatial_key[0] = static_cast<long>(si);
            size_t jk = 1, sk = 1;
            for (const auto& e : plans[si].edges) {
              for (int c = 0; c < model.d; ++c) {
                const long dy =
                    raw.coords[rs.phi[e.v]][c] - raw.coords[rs.phi[e.u]][c];
                joint_key[jk++] = dy;
                spatial_key[sk++] = dy;
              }
            }
            for (int j = 0; j < J; ++j) joint_key[jk++] = rs.lengths[j];
            ++table.joint[joint_key];
            ++table.spatial[spatial_key];
          }
          int i = m - 2;
          while (i >= 0 && odo[i] == V - 1) odo[i--] = 0;
          if (i < 0) break;
          ++odo[i];
        }
      },
      &counter, budget.max_trees, 0, 1);
  return table;
}

std::complex<double> fourier_tm(const CountTable& table, int shape_index,
                                const VecList& k_edges) {
  const int J = 2 * table.m - 3;
  if (static_cast<int>(k_edges.size()) != J)
    throw std::invalid_argument("one wave vector per shape edge required");
  for (const auto& k : k_edges)
    if (static_cast<int>(k.size()) != table.model.d)
      throw std::invalid_argument("wave vector arity mismatch");
  std::complex<double> acc(0.0, 0.0);
  for (const auto& [key, count] : table.spatial) {
    if (key[0] != shape_index) continue;
    double phase = 0.0;
    size_t pos = 1;
    for (int j = 0; j < J; ++j)
      for (int c = 0; c < table.model.d; ++c)
        phase += k_edges[j][c] * static_cast<double>(key[pos++]);
    acc += static_cast<double>(count) *
           std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return acc;
}

ProbabilityTable p_tables(const CountTable& table) {
  ProbabilityTable out;
  long total = 0;
  for (const auto& [key, count] : table.spatial) total += count;
  if (total <= 0) throw std::invalid_argument("empty count table");
  out.denominator = total;
  for (const auto& [key, count] : table.joint)
    out.joint.emplace(key, Rational(count, total));
  for (const auto& [key, count] : table.spatial)
    out.spatial.emplace(key, Rational(count, total));
  for (auto& [key, q] : out.joint) q.canonicalize();
  for (auto& [key, q] : out.spatial) q.canonicalize();
  return out;
}

namespace {

// Shared accumulator for the membership decomposition and overcount scans.
struct ScanAccum {
  long tree_count = 0;
  long s_total = 0;
  long u_total = 0;
  long e_total = 0;
  long sum_sigma = 0;
  std::unordered_map<std::uint64_t, std::array<long, 3>> table;
};

std::uint64_t pack_mark_key(const RawTree& raw, const int* marks, int l) {
  std::uint64_t key = 0;
  int shift = 0;
  for (int i = 0; i < l; ++i)
    for (int c = 0; c < raw.d; ++c) {
      key |= static_cast<std::uint64_t>(
                 static_cast<std::uint8_t>(raw.coords[marks[i]][c] + 128))
             << shift;
      shift += 8;
    }
  return key;
}

// Classify one marked tuple: number of compatible shapes, whether some
// compatible realization has all paths nontrivial. Path lengths come from
// median distance identities on the tree metric alone.
struct TupleClass {
  int compatible = 0;
  bool full = false;
};

TupleClass classify_l1(const TreeScratch& t, int x1) {
  TupleClass c;
  c.compatible = 1;
  c.full = t.d(0, x1) > 0;
  return c;
}

TupleClass classify_l2(const TreeScratch& t, int x1, int x2) {
  const int d01 = t.d(0, x1), d02 = t.d(0, x2), d12 = t.d(x1, x2);
  TupleClass c;
  c.compatible = 1;
  c.full = (d01 + d02 - d12) > 0 && (d01 + d12 - d02) > 0 &&
           (d02 + d12 - d01) > 0;
  return c;
}

TupleClass classify_l3(const TreeScratch& t, int x1, int x2, int x3) {
  const int v[4] = {0, x1, x2, x3};
  int dm[4][4];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) dm[i][j] = t.d(v[i], v[j]);
  const int base = (dm[0][1] + dm[0][2] + dm[1][2]) / 2;
  int attach = std::numeric_limits<int>::max();
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      attach = std::min(attach, (dm[3][a] + dm[3][b] - dm[a][b]) / 2);
  const int steiner = base + attach;

  TupleClass c;
  // pairing {{0, a}, {b, cc}}: internal I1 joins 0 and a, I2 joins b and cc;
  // phi(I1) = med(0, a, b), phi(I2) = med(b, cc, 0), both on the 0-b path.
  for (int a = 1; a <= 3; ++a) {
    const int b = (a == 1) ? 2 : 1;
    const int cc = (a == 3) ? 2 : 3;
    const int s0 = (dm[0][a] + dm[0][b] - dm[a][b]) / 2;
    const int sa = (dm[0][a] + dm[a][b] - dm[0][b]) / 2;
    const int sb = (dm[b][cc] + dm[0][b] - dm[0][cc]) / 2;
    const int sc = (dm[b][cc] + dm[0][cc] - dm[0][b]) / 2;
    const int d0_m2 = (dm[0][b] + dm[0][cc] - dm[b][cc]) / 2;
    const int mid = std::abs(s0 - d0_m2);
    if (s0 + sa + sb + sc + mid == steiner) {
      ++c.compatible;
      if (s0 > 0 && sa > 0 && sb > 0 && sc > 0 && mid > 0) c.full = true;
    }
  }
  return c;
}

void record(ScanAccum& acc, const RawTree& raw, const int* marks, int l,
            const TupleClass& cls, bool want_table) {
  if (cls.compatible < 1)
    throw std::logic_error("marked tuple without a compatible shape");
  if (cls.full && cls.compatible != 1)
    throw std::logic_error("nondegenerate tuple with several shapes");
  acc.s_total += 1;
  acc.sum_sigma += cls.compatible;
  if (cls.full)
    acc.u_total += 1;
  else
    acc.e_total += 1;
  if (want_table) {
    auto& slot = acc.table[pack_mark_key(raw, marks, l)];
    slot[0] += 1;
    if (cls.full)
      slot[1] += 1;
    else
      slot[2] += 1;
  }
}

ScanAccum scan_marked_trees(const LatticeModel& model, int n, int l,
                            const EnumerationBudget& budget, bool want_table) {
  check_model(model);
  if (l < 1 || l > 3) throw std::invalid_argument("l must be in {1, 2, 3}");

  const int shard_count =
      std::max(1, static_cast<int>(model.neighbor_offsets().size()));
  const int threads = std::max(1, std::min(budget.threads, shard_count));

  std::vector<ScanAccum> shards(static_cast<size_t>(shard_count));
  std::atomic<long> tree_counter{0};
  std::atomic<long> tuple_counter{0};
  std::atomic<int> next_shard{0};

  auto run_shard = [&](int shard) {
    ScanAccum& acc = shards[shard];
    TreeScratch scratch;
    int marks[3] = {0, 0, 0};
    enumerate_raw(
        model, n,
        [&](const RawTree& raw) {
          ++acc.tree_count;
          const int V = raw.site_count;
          long tuples = 1;
          for (int i = 0; i < l; ++i) tuples *= V;
          if (tuple_counter.fetch_add(tuples) + tuples >
              budget.max_tuple_visits)
            throw resource_limit("mark tuple budget exceeded");
          scratch.build_from_parents(raw.parent, V);
          for (int x1 = 0; x1 < V; ++x1) {
            if (l == 1) {
              marks[0] = x1;
              const auto cls = classify_l1(scratch, x1);
              record(acc, raw, marks, l, cls, want_table);
              continue;
            }
            for (int x2 = 0; x2 < V; ++x2) {
              if (l == 2) {
                marks[0] = x1;
                marks[1] = x2;
                const auto cls = classify_l2(scratch, x1, x2);
                record(acc, raw, marks, l, cls, want_table);
                continue;
              }
              for (int x3 = 0; x3 < V; ++x3) {
                marks[0] = x1;
                marks[1] = x2;
                marks[2] = x3;
                const auto cls = classify_l3(scratch, x1, x2, x3);
                record(acc, raw, marks, l, cls, want_table);
              }
            }
          }
        },
        &tree_counter, budget.max_trees, shard, shard_count);
  };

  if (threads <= 1) {
    for (int s = 0; s < shard_count; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        while (true) {
          const int s = next_shard.fetch_add(1);
          if (s >= shard_count) return;
          try {
            run_shard(s);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  // deterministic merge in shard order
  ScanAccum total;
  for (auto& acc : shards) {
    total.tree_count += acc.tree_count;
    total.s_total += acc.s_total;
    total.u_total += acc.u_total;
    total.e_total += acc.e_total;
    total.sum_sigma += acc.sum_sigma;
    for (const auto& [key, counts] : acc.table) {
      auto& slot = total.table[key];
      for (int i = 0; i < 3; ++i) slot[i] += counts[i];
    }
  }
  return total;
}

}  // namespace

SUETables s_u_e_decompose(const LatticeModel& model, int n, int l,
                          const EnumerationBudget& budget) {
  auto acc = scan_marked_trees(model, n, l, budget, true);
  SUETables out;
  out.model = model;
  out.n = n;
  out.l = l;
  out.one_point_count = acc.tree_count;
  out.s_total = acc.s_total;
  out.u_total = acc.u_total;
  out.e_total = acc.e_total;
  out.by_marks = std::move(acc.table);
  return out;
}

std::uint64_t SUETables::pack(const std::vector<Site>& marks) const {
  if (static_cast<int>(marks.size()) != l)
    throw std::invalid_argument("mark count mismatch");
  std::uint64_t key = 0;
  int shift = 0;
  for (const auto& s : marks) {
    if (static_cast<int>(s.size()) != model.d)
      throw std::invalid_argument("mark arity mismatch");
    for (int c = 0; c < model.d; ++c) {
      key |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(s[c] + 128))
             << shift;
      shift += 8;
    }
  }
  return key;
}

std::vector<Site> SUETables::unpack(std::uint64_t key) const {
  std::vector<Site> marks(l, Site(model.d));
  int shift = 0;
  for (int i = 0; i < l; ++i)
    for (int c = 0; c < model.d; ++c) {
      marks[i][c] = static_cast<int>((key >> shift) & 0xff) - 128;
      shift += 8;
    }
  return marks;
}

std::map<std::vector<long>, std::array<long, 3>> SUETables::sorted() const {
  std::map<std::vector<long>, std::array<long, 3>> out;
  for (const auto& [key, counts] : by_marks) {
    const auto marks = unpack(key);
    std::vector<long> flat;
    for (const auto& s : marks)
      for (int c : s) flat.push_back(c);
    out.emplace(std::move(flat), counts);
  }
  return out;
}

OvercountReport verify_overcount_bound(const LatticeModel& model, int n, int l,
                                       const EnumerationBudget& budget) {
  const auto acc = scan_marked_trees(model, n, l, budget, false);
  OvercountReport rep;
  rep.n = n;
  rep.l = l;
  rep.shat0 = acc.s_total;
  rep.sum_sigma_that0 = acc.sum_sigma;
  rep.uhat0 = acc.u_total;
  rep.ehat0 = acc.e_total;
  rep.bound_factor = double_factorial(2 * l - 3) - 1;
  rep.lhs = std::abs(rep.shat0 - rep.sum_sigma_that0);
  rep.rhs = rep.bound_factor * rep.ehat0;
  rep.slack = rep.rhs - rep.lhs;
  rep.holds = rep.lhs <= rep.rhs;
  return rep;
}

std::complex<double> moment_char(const SUETables& tables, const VecList& ktilde,
                                 double scale) {
  if (static_cast<int>(ktilde.size()) != tables.l)
    throw std::invalid_argument("one wave vector per mark required");
  for (const auto& k : ktilde)
    if (static_cast<int>(k.size()) != tables.model.d)
      throw std::invalid_argument("wave vector arity mismatch");
  if (tables.s_total <= 0) throw std::invalid_argument("empty tables");

  // key-sorted accumulation for run-to-run determinism
  std::vector<std::pair<std::uint64_t, long>> entries;
  entries.reserve(tables.by_marks.size());
  for (const auto& [key, counts] : tables.by_marks)
    entries.emplace_back(key, counts[0]);
  std::sort(entries.begin(), entries.end());

  const double factor =
      scale * std::pow(static_cast<double>(std::max<long>(tables.n, 1)), -0.25);
  std::complex<double> acc(0.0, 0.0);
  for (const auto& [key, count] : entries) {
    const auto marks = tables.unpack(key);
    double phase = 0.0;
    for (int i = 0; i < tables.l; ++i)
      for (int c = 0; c < tables.model.d; ++c)
        phase += factor * ktilde[i][c] * marks[i][c];
    acc += static_cast<double>(count) *
           std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return acc / static_cast<double>(tables.s_total);
}

}  // namespace iselab
