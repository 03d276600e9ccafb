#include "iselab/shapes.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

namespace iselab {

namespace {

// Raw adjacency over vertex ids 0..2m-3 (externals first), no labels yet.
using RawAdj = std::vector<std::vector<int>>;

RawAdj build_raw_adjacency(int m, const std::vector<std::pair<int, int>>& edge_list) {
  if (m < 2) throw std::invalid_argument("Shape: m must be >= 2");
  const int nv = 2 * m - 2;
  if (static_cast<int>(edge_list.size()) != 2 * m - 3) {
    throw std::invalid_argument("Shape: edge count must be 2m-3");
  }
  RawAdj adj(nv);
  for (auto [u, v] : edge_list) {
    if (u < 0 || u >= nv || v < 0 || v >= nv || u == v) {
      throw std::invalid_argument("Shape: edge endpoint out of range");
    }
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (int v = 0; v < nv; ++v) {
    const int want = v < m ? 1 : 3;
    if (static_cast<int>(adj[v].size()) != want) {
      throw std::invalid_argument("Shape: vertex degree violates the binary-tree contract");
    }
  }
  // Connectivity: a tree on nv vertices with nv-1 edges and correct degrees
  // could still be a forest with a cycle elsewhere; check reachability.
  std::vector<char> seen(nv, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int w : adj[u]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        q.push(w);
      }
    }
  }
  if (reached != nv) throw std::invalid_argument("Shape: edge list is not connected");
  return adj;
}

}  // namespace

Shape::Shape(int m, const std::vector<std::pair<int, int>>& edge_list) : m_(m) {
  RawAdj raw = build_raw_adjacency(m, edge_list);
  const int nv = 2 * m - 2;

  // Subtree minimum external label, rooted at vertex 0.
  std::vector<int> min_label(nv, -1);
  std::vector<int> parent(nv, -1);
  {
    // Post-order via an explicit stack.
    std::vector<std::pair<int, int>> stack{{0, 0}};  // (vertex, phase)
    parent[0] = 0;
    while (!stack.empty()) {
      const int v = stack.back().first;
      if (stack.back().second == 0) {
        stack.back().second = 1;
        for (int w : raw[v]) {
          if (parent[w] == -1) {
            parent[w] = v;
            stack.push_back({w, 0});
          }
        }
      } else {
        min_label[v] = v < m ? v : nv;
        for (int w : raw[v]) {
          if (w != v && parent[w] == v) min_label[v] = std::min(min_label[v], min_label[w]);
        }
        stack.pop_back();
      }
    }
  }

  // Depth-first relabelling: edges numbered in discovery order, children
  // visited in increasing subtree-minimum order, internal ids renumbered in
  // discovery order.  The encoding is built in the same pass.
  std::vector<int> new_id(nv, -1);
  for (int v = 0; v < m; ++v) new_id[v] = v;
  int next_internal = m;
  int next_edge = 1;
  edges_.clear();
  adjacency_.assign(nv, {});

  auto add_edge = [&](int cu, int cv) {
    edges_.push_back(ShapeEdge{cu, cv, next_edge});
    adjacency_[cu].push_back({cv, next_edge});
    adjacency_[cv].push_back({cu, next_edge});
    ++next_edge;
  };

  std::string enc;
  std::vector<std::tuple<int, int, int>> stack;  // (vertex, parent, phase)
  stack.push_back({0, -1, 0});
  while (!stack.empty()) {
    auto [v, par, phase] = stack.back();
    stack.pop_back();
    if (phase == 1) {
      enc += ')';
      continue;
    }
    if (v >= m && new_id[v] == -1) new_id[v] = next_internal++;
    if (par >= 0) add_edge(new_id[par], new_id[v]);
    std::vector<int> kids;
    for (int w : raw[v]) {
      if (w != par) kids.push_back(w);
    }
    std::sort(kids.begin(), kids.end(),
              [&](int a, int b) { return min_label[a] < min_label[b]; });
    if (v < m) {
      if (v != 0) {
        enc += std::to_string(v);
        enc += ',';
      }
    } else {
      enc += '(';
      stack.push_back({v, par, 1});
    }
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
      stack.push_back({*it, v, 0});
    }
  }
  encoding_ = enc;
}

std::vector<int> Shape::edges_on_path(int from, int to) const {
  const int nv = vertex_count();
  if (from < 0 || from >= nv || to < 0 || to >= nv) {
    throw std::invalid_argument("edges_on_path: vertex out of range");
  }
  if (from == to) return {};
  std::vector<int> prev_vertex(nv, -1), prev_edge(nv, 0);
  std::queue<int> q;
  q.push(from);
  prev_vertex[from] = from;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    if (u == to) break;
    for (auto [w, lbl] : adjacency_[u]) {
      if (prev_vertex[w] == -1) {
        prev_vertex[w] = u;
        prev_edge[w] = lbl;
        q.push(w);
      }
    }
  }
  std::vector<int> path;
  for (int v = to; v != from; v = prev_vertex[v]) path.push_back(prev_edge[v]);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<int> Shape::internal_edge_set() const {
  std::vector<int> out;
  for (const auto& e : edges_) {
    if (!is_external(e.v)) out.push_back(e.label);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<int>> Shape::frequency_sets() const {
  std::vector<std::vector<int>> sets(edge_count());
  for (int i = 1; i < m_; ++i) {
    for (int lbl : edges_on_path(0, i)) sets[lbl - 1].push_back(i);
  }
  for (auto& s : sets) std::sort(s.begin(), s.end());
  return sets;
}

nlohmann::json Shape::to_json() const {
  auto vertex_name = [&](int v) -> nlohmann::json {
    if (is_external(v)) return v;
    return "i" + std::to_string(v - m_ + 1);
  };
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : edges_) {
    edges.push_back({vertex_name(e.u), vertex_name(e.v), e.label});
  }
  return nlohmann::json{{"m", m_}, {"edges", edges}};
}

Shape Shape::from_json(const nlohmann::json& j) {
  const int m = j.at("m").get<int>();
  auto parse_vertex = [&](const nlohmann::json& v) -> int {
    if (v.is_number_integer()) return v.get<int>();
    std::string s = v.get<std::string>();
    if (s.empty() || s[0] != 'i') throw std::invalid_argument("Shape: bad vertex name");
    return m + std::stoi(s.substr(1)) - 1;
  };
  std::vector<std::pair<int, int>> edge_list;
  for (const auto& e : j.at("edges")) {
    edge_list.push_back({parse_vertex(e.at(0)), parse_vertex(e.at(1))});
  }
  return Shape(m, edge_list);
}

std::vector<Shape> enumerate_shapes(int m) {
  if (m < 2) throw std::invalid_argument("enumerate_shapes: m must be >= 2");
  // Leaf insertion: every shape on m externals arises exactly once by
  // subdividing one of the 2(m-1)-3 edges of a shape on m-1 externals and
  // hanging the new external off the new internal vertex.
  std::vector<std::vector<std::pair<int, int>>> current{{{0, 1}}};  // m = 2
  for (int k = 3; k <= m; ++k) {
    std::vector<std::vector<std::pair<int, int>>> next;
    const int old_nv = 2 * (k - 1) - 2;
    for (const auto& edge_list : current) {
      // Shift internal ids (>= k-1) up by one to make room for external k-1.
      auto shift = [&](int v) { return v >= k - 1 ? v + 1 : v; };
      for (size_t split = 0; split < edge_list.size(); ++split) {
        std::vector<std::pair<int, int>> child;
        const int new_internal = old_nv + 1;  // == 2k-3, the last new id
        for (size_t i = 0; i < edge_list.size(); ++i) {
          auto [u, v] = edge_list[i];
          if (i == split) {
            child.push_back({shift(u), new_internal});
            child.push_back({new_internal, shift(v)});
          } else {
            child.push_back({shift(u), shift(v)});
          }
        }
        child.push_back({new_internal, k - 1});
        next.push_back(std::move(child));
      }
    }
    current = std::move(next);
  }

  std::vector<Shape> shapes;
  shapes.reserve(current.size());
  for (const auto& edge_list : current) shapes.emplace_back(m, edge_list);
  std::sort(shapes.begin(), shapes.end(), [](const Shape& a, const Shape& b) {
    return a.canonical_encoding() < b.canonical_encoding();
  });
  // The construction cannot repeat a shape; keep that as a hard invariant.
  for (size_t i = 1; i < shapes.size(); ++i) {
    if (shapes[i].canonical_encoding() == shapes[i - 1].canonical_encoding()) {
      throw std::logic_error("enumerate_shapes: duplicate canonical encoding");
    }
  }
  return shapes;
}

unsigned long long double_factorial_count(int m) {
  if (m < 2) throw std::invalid_argument("double_factorial_count: m must be >= 2");
  unsigned long long out = 1;
  for (int k = 2 * m - 5; k > 1; k -= 2) out *= static_cast<unsigned long long>(k);
  return out;
}

}  // namespace iselab
