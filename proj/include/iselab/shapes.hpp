#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace iselab {

// One edge of a shape.  u is the endpoint nearer vertex 0; label is the
// canonical 1-based edge number.
struct ShapeEdge {
  int u;
  int v;
  int label;
};

// A shape on m labelled external vertices: a tree whose external vertices
// 0..m-1 have degree 1 and whose m-2 internal vertices (ids m..2m-3) have
// degree 3, giving 2m-3 edges.  Construction canonicalizes the labelling:
// edges are numbered in depth-first discovery order from vertex 0, with the
// two subtrees under an internal vertex ordered by the smallest external
// label they contain; internal vertex ids are renumbered in the same
// discovery order.
class Shape {
 public:
  Shape(int m, const std::vector<std::pair<int, int>>& edge_list);

  int m() const { return m_; }
  int vertex_count() const { return 2 * m_ - 2; }
  int edge_count() const { return 2 * m_ - 3; }
  bool is_external(int v) const { return v < m_; }

  // Edges sorted by canonical label.
  const std::vector<ShapeEdge>& edges() const { return edges_; }

  // Labels of the edges on the unique path between two vertices, in path
  // order.  Returns an empty list when from == to.
  std::vector<int> edges_on_path(int from, int to) const;

  // Sorted labels of edges lying on a path from vertex 0 to some internal
  // vertex; equivalently the edges whose far endpoint is internal.
  std::vector<int> internal_edge_set() const;

  // frequency_sets()[j-1] lists, sorted, the external vertices i >= 1 whose
  // path from vertex 0 passes through edge j.  Summing per-vertex wave
  // vectors over these sets yields the per-edge frequency routing used by
  // the moment characteristics.
  std::vector<std::vector<int>> frequency_sets() const;

  // Parenthesized serialization of the rooted, child-ordered tree; equal
  // encodings mean equal shapes.
  const std::string& canonical_encoding() const { return encoding_; }

  nlohmann::json to_json() const;
  static Shape from_json(const nlohmann::json& j);

 private:
  int m_;
  std::vector<ShapeEdge> edges_;
  std::string encoding_;
  // adjacency_[v] lists (neighbor, edge label) pairs.
  std::vector<std::vector<std::pair<int, int>>> adjacency_;
};

// All shapes on m external vertices in lexicographic canonical-encoding
// order.  The count is (2m-5)!!.
std::vector<Shape> enumerate_shapes(int m);

// (2m-5)!! with (-1)!! = 1, i.e. the number of shapes on m external vertices.
unsigned long long double_factorial_count(int m);

}  // namespace iselab
