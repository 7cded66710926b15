#pragma once

// Directed tree with planar node positions. Every node is reachable by exactly
// one path from the root, which makes the global search tree and every local
// search tree coincide. Used to cross-check backtracking against the oracle.

#include <cstdint>
#include <cstdlib>
#include <vector>

#include "loha/random.hpp"
#include "loha/state_space.hpp"

namespace loha {

class TreeGraph {
 public:
  using State = int;
  static constexpr std::size_t state_arity = 1;

  struct Node {
    int x = 0;
    int y = 0;
    std::vector<int> children;
  };

  TreeGraph() = default;
  explicit TreeGraph(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  /// Random tree: node i > 0 attaches to a uniformly chosen earlier node, one
  /// unit step away in a random axis direction.
  static TreeGraph random(int node_count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Node> nodes(static_cast<std::size_t>(node_count));
    static constexpr int dx[4] = {1, -1, 0, 0};
    static constexpr int dy[4] = {0, 0, 1, -1};
    for (int i = 1; i < node_count; ++i) {
      const int parent = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
      const int dir = static_cast<int>(rng.below(4));
      auto& n = nodes[static_cast<std::size_t>(i)];
      n.x = nodes[static_cast<std::size_t>(parent)].x + dx[dir];
      n.y = nodes[static_cast<std::size_t>(parent)].y + dy[dir];
      nodes[static_cast<std::size_t>(parent)].children.push_back(i);
    }
    return TreeGraph(std::move(nodes));
  }

  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  bool is_free(State s) const noexcept { return s >= 0 && s < size(); }

  void successors(State s, std::vector<Transition<State>>& out, SearchStats& stats) const {
    out.clear();
    for (int c : node(s).children) {
      ++stats.collision_checks;
      out.push_back({c, 1});
    }
    stats.generated += out.size();
  }

  /// Manhattan distance between node positions; a negative goal id is
  /// unreachable and is measured from the origin.
  double heuristic(State s, State goal) const noexcept {
    const int gx = goal >= 0 ? node(goal).x : 0;
    const int gy = goal >= 0 ? node(goal).y : 0;
    return static_cast<double>(std::abs(node(s).x - gx) + std::abs(node(s).y - gy));
  }

  bool is_goal(State s, State goal) const noexcept { return s == goal; }

  double region_distance(State a, State b) const noexcept {
    return static_cast<double>(std::max(std::abs(node(a).x - node(b).x), std::abs(node(a).y - node(b).y)));
  }

  std::uint64_t key(State s) const noexcept { return static_cast<std::uint64_t>(s); }

  static std::vector<int> to_ints(State s) { return {s}; }

 private:
  std::vector<Node> nodes_;
};

}  // namespace loha
