#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "mde/errors.hpp"
#include "mde/ordered_tree.hpp"

namespace mde {

/// Walk-around path of an ordered tree: 2k+1 vertices, 2k directed edges.
/// Frame vertex i is associated with a tree vertex and carries a slot n,
/// meaning it is the (n+1)-th frame vertex of that tree vertex.
struct Frame {
  // Per frame vertex.
  std::vector<int> tree_vertex;
  std::vector<int> slot;
  // Per frame edge (between frame vertices i and i+1): the tree edge it is
  // associated with, identified by the child node of that edge.
  std::vector<int> edge_child;
  std::vector<bool> edge_descends;
  // frame_of[v][n] = frame vertex p_n^v.
  std::vector<std::vector<int>> frame_of;

  int vertex_count() const { return static_cast<int>(tree_vertex.size()); }
  int edge_count() const { return static_cast<int>(edge_child.size()); }
};

inline Frame build_frame(const OrderedTree& g) {
  Frame f;
  f.frame_of.resize(g.node_count());
  auto visit = [&](int v) {
    f.frame_of[v].push_back(f.vertex_count());
    f.slot.push_back(static_cast<int>(f.frame_of[v].size()) - 1);
    f.tree_vertex.push_back(v);
  };
  visit(g.root());
  auto walk = [&](auto&& self, int v) -> void {
    for (int w : g.children(v)) {
      f.edge_child.push_back(w);
      f.edge_descends.push_back(true);
      visit(w);
      self(self, w);
      f.edge_child.push_back(w);
      f.edge_descends.push_back(false);
      visit(v);
    }
  };
  walk(walk, g.root());
  return f;
}

/// For a tree edge e (child w, parent u), the four frame vertices entering
/// the S-entry S_{x^u_{n-1} x^w_0, x^w_{c(w)} x^u_n}. When w is a leaf,
/// first_of_child == last_of_child.
struct EdgeFrameVertices {
  int before_descent;  // p_{n(w)-1}^u
  int first_of_child;  // p_0^w
  int last_of_child;   // p_{c(w)}^w
  int after_ascent;    // p_{n(w)}^u
};

inline EdgeFrameVertices edge_frame_vertices(const OrderedTree& g, const Frame& f,
                                             int child) {
  const int u = g.parent(child);
  const int n = g.child_position(child);
  return {f.frame_of[u][n - 1], f.frame_of[child][0],
          f.frame_of[child][g.child_count(child)], f.frame_of[u][n]};
}

/// One of the 2^k pairing graphs on the frame's vertex set. Loops are
/// explicit self-edges; they arise when the child vertex is a leaf.
struct SummationGraph {
  int vertex_count = 1;
  std::vector<std::pair<int, int>> edges;
  std::vector<bool> choice;  // one bit per tree edge, in frame-descent order
};

/// All 2^k summation graphs of g. Choice bit 0 pairs the two frame-edge
/// ends "in parallel" ({p_{n-1}^u, p_n^u} and {p_0^w, p_{c(w)}^w}); bit 1
/// pairs them "crossed".
inline std::vector<SummationGraph> summation_graphs(const OrderedTree& g) {
  const Frame f = build_frame(g);
  const int k = g.edge_count();
  // Tree edges in order of first appearance in the frame.
  std::vector<int> tree_edges;
  for (int i = 0; i < f.edge_count(); ++i)
    if (f.edge_descends[i]) tree_edges.push_back(f.edge_child[i]);

  std::vector<SummationGraph> out;
  out.reserve(std::size_t{1} << k);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    SummationGraph sg;
    sg.vertex_count = f.vertex_count();
    for (int e = 0; e < k; ++e) {
      const EdgeFrameVertices p = edge_frame_vertices(g, f, tree_edges[e]);
      const bool crossed = (mask >> e) & 1;
      sg.choice.push_back(crossed);
      if (!crossed) {
        sg.edges.emplace_back(p.before_descent, p.after_ascent);
        sg.edges.emplace_back(p.first_of_child, p.last_of_child);
      } else {
        sg.edges.emplace_back(p.before_descent, p.last_of_child);
        sg.edges.emplace_back(p.first_of_child, p.after_ascent);
      }
    }
    out.push_back(std::move(sg));
  }
  return out;
}

/// Decomposition of a summation graph into the path with root endpoints
/// plus cycles. Vertex lists are in traversal order; a loop is a cycle of
/// length 1 and a double edge a cycle of length 2.
struct SummationComponents {
  std::vector<int> path;                 // vertices, ends p_0^root, p_{c(root)}^root
  std::vector<std::vector<int>> cycles;  // each entry: vertices of one cycle
};

/// Splits sg into one path and m cycles. The path-plus-cycles structure is
/// guaranteed for graphs produced by summation_graphs; anything else is a
/// structural bug, not an input error.
inline SummationComponents classify_components(const SummationGraph& sg) {
  const int n = sg.vertex_count;
  // Multigraph adjacency: per vertex, incident edge ids.
  std::vector<std::vector<int>> incident(n);
  for (int e = 0; e < static_cast<int>(sg.edges.size()); ++e) {
    incident[sg.edges[e].first].push_back(e);
    if (sg.edges[e].second != sg.edges[e].first)
      incident[sg.edges[e].second].push_back(e);
  }
  std::vector<int> degree(n, 0);
  for (const auto& [a, b] : sg.edges) {
    degree[a] += 1;
    degree[b] += 1;  // a loop contributes 2 to its vertex
  }

  SummationComponents out;
  std::vector<bool> vertex_done(n, false), edge_done(sg.edges.size(), false);

  auto other_end = [&](int e, int v) {
    return sg.edges[e].first == v ? sg.edges[e].second : sg.edges[e].first;
  };
  auto trace = [&](int start) {
    std::vector<int> comp{start};
    vertex_done[start] = true;
    int cur = start;
    for (;;) {
      int next_edge = -1;
      for (int e : incident[cur])
        if (!edge_done[e]) {
          next_edge = e;
          break;
        }
      if (next_edge < 0) break;
      edge_done[next_edge] = true;
      cur = other_end(next_edge, cur);
      if (cur == comp.front() && comp.size() > 1) break;  // closed a cycle
      if (sg.edges[next_edge].first == sg.edges[next_edge].second) break;  // loop
      comp.push_back(cur);
      vertex_done[cur] = true;
    }
    return comp;
  };

  // The path: start from vertex 0 (= p_0^root). For k = 0 it is a single
  // vertex; otherwise both ends must have degree 1.
  if (n == 1) {
    if (!sg.edges.empty()) throw structural_error("classify: edges on a 1-vertex graph");
    out.path = {0};
    return out;
  }
  if (degree[0] != 1 || degree[n - 1] != 1)
    throw structural_error("classify: root copies are not path endpoints");
  out.path = trace(0);
  if (out.path.back() != n - 1)
    throw structural_error("classify: path does not end at the last root copy");

  for (int v = 0; v < n; ++v) {
    if (vertex_done[v]) continue;
    if (degree[v] != 2) throw structural_error("classify: cycle vertex of degree != 2");
    out.cycles.push_back(trace(v));
  }
  for (bool d : edge_done)
    if (!d) throw structural_error("classify: unvisited edge");
  for (const auto& c : out.cycles)
    for (int v : c)
      if (degree[v] != 2) throw structural_error("classify: non-2-regular cycle");
  return out;
}

}  // namespace mde
