#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mde/errors.hpp"

namespace mde {

// Hard enumeration guard. Catalan(12) = 208012 trees; the coefficient work
// per tree dominates well before the enumeration itself does.
inline constexpr int kMaxTreeEdges = 12;

/// Rooted tree with ordered children. Node 0 is the root; nodes are stored
/// in preorder, so the canonical Dyck word and the node array determine
/// each other.
class OrderedTree {
 public:
  OrderedTree() : parent_{-1}, children_{{}} {}

  static OrderedTree leaf() { return OrderedTree(); }

  int edge_count() const { return static_cast<int>(parent_.size()) - 1; }
  int node_count() const { return static_cast<int>(parent_.size()); }
  int root() const { return 0; }
  int parent(int v) const { return parent_[v]; }
  const std::vector<int>& children(int v) const { return children_[v]; }
  int child_count(int v) const { return static_cast<int>(children_[v].size()); }

  // Position of child w in its parent's ordered child list, 1-based.
  int child_position(int w) const {
    const auto& sib = children_[parent_[w]];
    for (int i = 0; i < static_cast<int>(sib.size()); ++i)
      if (sib[i] == w) return i + 1;
    throw structural_error("child_position: node not found among siblings");
  }

  /// Canonical encoding: walk around the tree, '1' = descend to the next
  /// unvisited child, '0' = ascend. Length 2k.
  std::string encode() const {
    std::string word;
    word.reserve(2 * static_cast<std::size_t>(edge_count()));
    encode_subtree(0, word);
    return word;
  }

  static OrderedTree decode(const std::string& word) {
    OrderedTree t;
    int cur = 0;
    int depth = 0;
    for (char c : word) {
      if (c == '1') {
        int v = t.node_count();
        t.parent_.push_back(cur);
        t.children_.push_back({});
        t.children_[cur].push_back(v);
        cur = v;
        ++depth;
      } else if (c == '0') {
        if (depth == 0) throw parse_error("decode: unbalanced walk (ascend at root)");
        cur = t.parent_[cur];
        --depth;
      } else {
        throw parse_error("decode: invalid character in walk encoding");
      }
    }
    if (depth != 0) throw parse_error("decode: unbalanced walk (unclosed descent)");
    return t;
  }

  /// root(rhs) becomes the last child of root(lhs); edge counts add plus one.
  static OrderedTree compose(const OrderedTree& lhs, const OrderedTree& rhs) {
    return decode(lhs.encode() + "1" + rhs.encode() + "0");
  }

  /// Inverse of compose: detaches the last child of the root with its
  /// subtree. Requires at least one edge.
  std::pair<OrderedTree, OrderedTree> decompose() const {
    if (edge_count() == 0)
      throw validation_error("decompose: the edgeless tree has no decomposition");
    const std::string word = encode();
    // Find the start of the last top-level block "1 w 0".
    int depth = 0;
    std::size_t split = 0;
    for (std::size_t i = 0; i < word.size(); ++i) {
      if (depth == 0) split = i;
      depth += (word[i] == '1') ? 1 : -1;
    }
    OrderedTree first = decode(word.substr(0, split));
    OrderedTree last = decode(word.substr(split + 1, word.size() - split - 2));
    return {std::move(first), std::move(last)};
  }

  bool operator==(const OrderedTree& other) const {
    return parent_ == other.parent_ && children_ == other.children_;
  }

 private:
  void encode_subtree(int v, std::string& word) const {
    for (int w : children_[v]) {
      word.push_back('1');
      encode_subtree(w, word);
      word.push_back('0');
    }
  }

  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
};

/// All rooted ordered trees with k edges, ordered lexicographically by
/// canonical encoding ('0' < '1'). |result| = Catalan(k).
inline std::vector<OrderedTree> enumerate_trees(int k) {
  if (k < 0) throw validation_error("enumerate_trees: k must be nonnegative");
  if (k > kMaxTreeEdges)
    throw resource_limit_error("enumerate_trees: k exceeds guard " +
                               std::to_string(kMaxTreeEdges));
  std::vector<OrderedTree> out;
  std::string word;
  word.reserve(2 * static_cast<std::size_t>(k));
  // Generate balanced walks in lexicographic order.
  auto rec = [&](auto&& self, int open, int closed) -> void {
    if (open == k && closed == k) {
      out.push_back(OrderedTree::decode(word));
      return;
    }
    if (closed < open) {
      word.push_back('0');
      self(self, open, closed + 1);
      word.pop_back();
    }
    if (open < k) {
      word.push_back('1');
      self(self, open + 1, closed);
      word.pop_back();
    }
  };
  rec(rec, 0, 0);
  return out;
}

inline std::uint64_t catalan(int k) {
  std::uint64_t c = 1;
  for (int i = 0; i < k; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
  return c;
}

}  // namespace mde
