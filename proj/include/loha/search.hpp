#pragma once

// Best-first search engines over a SearchDomain.
//
// All engines share the same bookkeeping contract:
//  * a state is expanded at most once (strict closed list, no reopening);
//  * a cheaper path found before expansion updates g and the parent;
//  * the hook is called once per expansion, after the successors' parent
//    pointers are set;
//  * the goal is recognised when popped and is not itself expanded.
// Priority ties break toward larger g, then toward earlier insertion.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <tuple>
#include <utility>
#include <unordered_map>
#include <vector>

#include "loha/state_space.hpp"

namespace loha {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();
inline constexpr std::uint64_t kNoLimit = std::numeric_limits<std::uint64_t>::max();

template <class State>
struct SearchNode {
  State state{};
  Cost g = 0;
  double h = 0.0;         ///< global heuristic h_g, unweighted
  double priority = 0.0;  ///< OPEN priority at the latest (re)insertion
  NodeId parent = kNoNode;
  std::int64_t expansion_index = -1;
  std::uint64_t seq = 0;  ///< insertion order of the latest (re)insertion
  bool closed = false;
};

/// Node storage indexed by NodeId plus a state -> id lookup.
template <class State>
class SearchTree {
 public:
  const SearchNode<State>& operator[](NodeId id) const { return nodes_[id]; }
  SearchNode<State>& operator[](NodeId id) { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Returns the node id and whether it was newly created.
  std::pair<NodeId, bool> find_or_add(std::uint64_t key, const State& s) {
    auto [it, inserted] = index_.try_emplace(key, static_cast<NodeId>(nodes_.size()));
    if (inserted) {
      nodes_.emplace_back();
      nodes_.back().state = s;
    }
    return {it->second, inserted};
  }

  std::optional<NodeId> find(std::uint64_t key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// States from the root to `id`.
  std::vector<State> path_to(NodeId id) const {
    std::vector<State> path;
    for (NodeId cur = id; cur != kNoNode; cur = nodes_[cur].parent) path.push_back(nodes_[cur].state);
    return {path.rbegin(), path.rend()};
  }

 private:
  std::vector<SearchNode<State>> nodes_;
  std::unordered_map<std::uint64_t, NodeId> index_;
};

enum class SearchStatus { Solved, Exhausted, ExpansionLimit };

inline const char* to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::Solved: return "solved";
    case SearchStatus::Exhausted: return "exhausted";
    case SearchStatus::ExpansionLimit: return "expansion-limit";
  }
  return "?";
}

template <class State>
struct SearchResult {
  SearchStatus status = SearchStatus::Exhausted;
  std::vector<State> path;  ///< start -> goal when solved
  std::optional<Cost> cost;
  std::uint64_t expansions = 0;
  SearchStats stats;

  bool solved() const noexcept { return status == SearchStatus::Solved; }
};

struct SearchOptions {
  double weight = 1.0;
  std::uint64_t expansion_limit = kNoLimit;
};

struct NoHook {
  template <class Tree>
  void operator()(const Tree&, NodeId) const noexcept {}
};

namespace detail {

struct HeapEntry {
  double priority;
  Cost g;
  std::uint64_t seq;
  NodeId id;
};

// Max-heap comparator producing: lowest priority, then highest g, then lowest seq.
struct HeapWorse {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const noexcept {
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.g != b.g) return a.g < b.g;
    return a.seq > b.seq;
  }
};

struct BestFirstOutcome {
  SearchStatus status = SearchStatus::Exhausted;
  NodeId terminal = kNoNode;
  std::uint64_t expansions = 0;
};

/// Shared A*-family loop. `priority(g, h)` orders OPEN, `terminal(id)` is
/// tested on pop, `admit(state)` filters successors beyond the domain's own
/// collision checks.
template <SearchDomain D, class Priority, class Terminal, class Admit, class Hook>
BestFirstOutcome best_first(const D& domain, const typename D::State& start, const typename D::State& goal,
                            std::uint64_t expansion_limit, SearchTree<typename D::State>& tree, SearchStats& stats,
                            Priority&& priority, Terminal&& terminal, Admit&& admit, Hook&& hook) {
  using State = typename D::State;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapWorse> open;
  std::uint64_t seq = 0;
  BestFirstOutcome out;

  {
    auto [id, _] = tree.find_or_add(domain.key(start), start);
    auto& n = tree[id];
    n.g = 0;
    n.h = domain.heuristic(start, goal);
    n.priority = priority(n.g, n.h);
    n.seq = seq++;
    open.push({n.priority, n.g, n.seq, id});
  }

  std::vector<Transition<State>> succ;
  while (!open.empty()) {
    const HeapEntry top = open.top();
    open.pop();
    if (tree[top.id].closed || tree[top.id].seq != top.seq) continue;  // stale

    if (terminal(top.id)) {
      out.status = SearchStatus::Solved;
      out.terminal = top.id;
      return out;
    }
    if (out.expansions >= expansion_limit) {
      out.status = SearchStatus::ExpansionLimit;
      return out;
    }

    tree[top.id].closed = true;
    tree[top.id].expansion_index = static_cast<std::int64_t>(out.expansions++);
    const State s = tree[top.id].state;
    const Cost g = tree[top.id].g;
    domain.successors(s, succ, stats);
    for (const auto& t : succ) {
      if (!admit(t.successor)) continue;
      const Cost ng = g + t.cost;
      auto [cid, fresh] = tree.find_or_add(domain.key(t.successor), t.successor);
      auto& c = tree[cid];
      if (fresh) {
        c.h = domain.heuristic(t.successor, goal);
      } else if (c.closed || ng >= c.g) {
        continue;
      }
      c.g = ng;
      c.parent = top.id;
      c.priority = priority(c.g, c.h);
      c.seq = seq++;
      open.push({c.priority, c.g, c.seq, cid});
    }
    hook(std::as_const(tree), top.id);
  }
  out.status = SearchStatus::Exhausted;
  return out;
}

template <class State>
void fill_result(SearchResult<State>& result, const SearchTree<State>& tree, const BestFirstOutcome& outcome) {
  result.status = outcome.status;
  result.expansions = outcome.expansions;
  if (outcome.status == SearchStatus::Solved) {
    result.path = tree.path_to(outcome.terminal);
    result.cost = tree[outcome.terminal].g;
  }
}

}  // namespace detail

/// Weighted A* on g + w * h_g; w == 1 is plain A*.
template <SearchDomain D, class Hook = NoHook>
SearchResult<typename D::State> astar(const D& domain, const typename D::State& start, const typename D::State& goal,
                                      const SearchOptions& options = {}, Hook&& hook = {}) {
  if (!(options.weight >= 1.0)) throw ValidationError("search weight must be >= 1");
  SearchTree<typename D::State> tree;
  SearchResult<typename D::State> result;
  const double w = options.weight;
  const auto outcome = detail::best_first(
      domain, start, goal, options.expansion_limit, tree, result.stats,
      [w](Cost g, double h) { return static_cast<double>(g) + w * h; },
      [&](NodeId id) { return domain.is_goal(tree[id].state, goal); },
      [](const auto&) { return true; }, hook);
  detail::fill_result(result, tree, outcome);
  return result;
}

/// Focal search. OPEN is ordered by f = g + h_g; FOCAL holds the OPEN nodes
/// with f <= w * f_min and is ordered by `focal_priority(node)`. The returned
/// cost is within w of optimal whenever h_g is admissible, whatever the focal
/// priority is.
template <SearchDomain D, class FocalPriority, class Hook = NoHook>
SearchResult<typename D::State> focal_search(const D& domain, const typename D::State& start,
                                             const typename D::State& goal, const SearchOptions& options,
                                             FocalPriority&& focal_priority, Hook&& hook = {}) {
  using State = typename D::State;
  if (!(options.weight >= 1.0)) throw ValidationError("search weight must be >= 1");
  const double w = options.weight;

  // (key, -g, seq, id): std::set orders ascending, so -g puts larger g first.
  using Key = std::tuple<double, Cost, std::uint64_t, NodeId>;
  std::set<Key> open, focal;
  std::vector<double> focal_key;  // per node, focal priority at latest insertion
  std::vector<char> in_focal;

  SearchTree<State> tree;
  SearchResult<State> result;
  std::uint64_t seq = 0;
  double focal_bound = -std::numeric_limits<double>::infinity();

  auto open_key = [&](NodeId id) { return Key{tree[id].priority, -tree[id].g, tree[id].seq, id}; };
  auto fkey = [&](NodeId id) { return Key{focal_key[id], -tree[id].g, tree[id].seq, id}; };
  auto ensure = [&](NodeId id) {
    if (focal_key.size() <= id) {
      focal_key.resize(id + 1, 0.0);
      in_focal.resize(id + 1, 0);
    }
  };
  auto insert = [&](NodeId id) {
    auto& n = tree[id];
    n.priority = static_cast<double>(n.g) + n.h;
    n.seq = seq++;
    focal_key[id] = focal_priority(std::as_const(n));
    open.insert(open_key(id));
    if (n.priority <= focal_bound) {
      focal.insert(fkey(id));
      in_focal[id] = 1;
    }
  };
  auto remove = [&](NodeId id) {
    open.erase(open_key(id));
    if (in_focal[id]) {
      focal.erase(fkey(id));
      in_focal[id] = 0;
    }
  };

  {
    auto [id, _] = tree.find_or_add(domain.key(start), start);
    ensure(id);
    tree[id].g = 0;
    tree[id].h = domain.heuristic(start, goal);
    insert(id);
  }

  std::vector<Transition<State>> succ;
  while (!open.empty()) {
    const double bound = w * std::get<0>(*open.begin());
    if (bound > focal_bound) {
      for (auto it = open.upper_bound(Key{focal_bound, std::numeric_limits<Cost>::max(), 0, 0});
           it != open.end() && std::get<0>(*it) <= bound; ++it) {
        const NodeId id = std::get<3>(*it);
        if (!in_focal[id]) {
          focal.insert(fkey(id));
          in_focal[id] = 1;
        }
      }
    } else if (bound < focal_bound) {
      focal.clear();
      for (const auto& k : open) {
        const NodeId id = std::get<3>(k);
        in_focal[id] = std::get<0>(k) <= bound;
        if (in_focal[id]) focal.insert(fkey(id));
      }
    }
    focal_bound = bound;

    const NodeId top = std::get<3>(*focal.begin());
    if (domain.is_goal(tree[top].state, goal)) {
      result.status = SearchStatus::Solved;
      result.path = tree.path_to(top);
      result.cost = tree[top].g;
      return result;
    }
    if (result.expansions >= options.expansion_limit) {
      result.status = SearchStatus::ExpansionLimit;
      return result;
    }
    remove(top);
    tree[top].closed = true;
    tree[top].expansion_index = static_cast<std::int64_t>(result.expansions++);

    const State s = tree[top].state;
    const Cost g = tree[top].g;
    domain.successors(s, succ, result.stats);
    for (const auto& t : succ) {
      const Cost ng = g + t.cost;
      auto [cid, fresh] = tree.find_or_add(domain.key(t.successor), t.successor);
      ensure(cid);
      if (fresh) {
        tree[cid].h = domain.heuristic(t.successor, goal);
      } else {
        if (tree[cid].closed || ng >= tree[cid].g) continue;
        remove(cid);
      }
      tree[cid].g = ng;
      tree[cid].parent = top;
      insert(cid);
    }
    hook(std::as_const(tree), top);
  }
  result.status = SearchStatus::Exhausted;
  return result;
}

// ---------------------------------------------------------------------------
// Local residual oracle.

/// Which region distance ends a local search: reaching the border (>= K) or
/// leaving the region (> K, the backtracking collector's completion test).
enum class BorderRule { AtLeastK, BeyondK };

enum class OracleStatus { Found, DeadEnd, Capped };

template <class State>
struct OracleResult {
  OracleStatus status = OracleStatus::DeadEnd;
  double residual = 0.0;  ///< h_gk - h_g(s); meaningful only when Found
  double h_gk = 0.0;
  std::uint64_t expansions = 0;
  std::optional<State> best_border;
  bool reached_goal = false;
  SearchStats stats;
};

template <class State>
struct OracleOptions {
  std::uint64_t expansion_cap = kNoLimit;
  BorderRule rule = BorderRule::AtLeastK;
  /// Extra obstacles, e.g. the global closed list. Empty means none.
  std::function<bool(const State&)> blocked;
};

/// Multi-goal A* rooted at `s` on b(s, s') = c(s, s') + h_g(s'). Stops at the
/// first popped state on (or beyond) the local border, or at the global goal.
/// Dead ends are reported as a status, never as an infinite residual.
template <SearchDomain D>
OracleResult<typename D::State> local_residual_oracle(const D& domain, const typename D::State& s,
                                                      const typename D::State& goal, int K,
                                                      const OracleOptions<typename D::State>& options = {}) {
  using State = typename D::State;
  if (K < 1) throw ValidationError("K must be >= 1");
  SearchTree<State> tree;
  OracleResult<State> result;
  const auto reached = [&](NodeId id) {
    const double d = domain.region_distance(s, tree[id].state);
    const bool border = options.rule == BorderRule::AtLeastK ? d >= K : d > K;
    return border || domain.is_goal(tree[id].state, goal);
  };
  const auto outcome = detail::best_first(
      domain, s, goal, options.expansion_cap, tree, result.stats,
      [](Cost g, double h) { return static_cast<double>(g) + h; }, reached,
      [&](const State& x) { return !options.blocked || !options.blocked(x); }, NoHook{});
  result.expansions = outcome.expansions;
  switch (outcome.status) {
    case SearchStatus::Solved: {
      const auto& n = tree[outcome.terminal];
      result.status = OracleStatus::Found;
      result.reached_goal = domain.is_goal(n.state, goal);
      // Goal inside the region contributes c(s, goal) + 0.
      result.h_gk = static_cast<double>(n.g) + (result.reached_goal ? 0.0 : n.h);
      result.residual = result.h_gk - domain.heuristic(s, goal);
      result.best_border = n.state;
      break;
    }
    case SearchStatus::Exhausted: result.status = OracleStatus::DeadEnd; break;
    case SearchStatus::ExpansionLimit: result.status = OracleStatus::Capped; break;
  }
  return result;
}

}  // namespace loha
