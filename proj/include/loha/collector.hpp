#pragma once

// Backtracking data collection: every expansion in a global search walks up
// its ancestor chain and turns each ancestor into a local residual sample.
//
// For an ancestor a of the expanded node s, b(a, s) = (g(s) - g(a)) + h_g(s) - h_g(a).
// If s lies outside a's local region, a is complete with target b; otherwise
// b overwrites a's incomplete lower bound. The walk stops at the root or at
// the first ancestor that is already complete.
//
// That stop can hide an escape from a higher ancestor: a deeper node may
// complete through a state still inside the higher ancestor's window. Walking
// on past completed ancestors (WalkRule::SkipCompleted) restores exact
// agreement with the local oracle on trees, at the price of full-depth walks.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "loha/search.hpp"

namespace loha {

enum class SampleSource { Oracle, BacktrackComplete, BacktrackIncomplete };

inline const char* to_string(SampleSource s) {
  switch (s) {
    case SampleSource::Oracle: return "oracle";
    case SampleSource::BacktrackComplete: return "backtrack-complete";
    case SampleSource::BacktrackIncomplete: return "backtrack-incomplete";
  }
  return "?";
}

inline SampleSource parse_sample_source(const std::string& s) {
  if (s == "oracle") return SampleSource::Oracle;
  if (s == "backtrack-complete") return SampleSource::BacktrackComplete;
  if (s == "backtrack-incomplete") return SampleSource::BacktrackIncomplete;
  throw ValidationError("unknown sample source '" + s + "'");
}

/// One training record. `state` and `goal` hold the domain's integer fields.
struct Sample {
  std::string map_id;
  std::vector<int> state;
  int K = 0;
  double target = 0.0;
  double alpha = 1.0;
  bool complete = true;
  SampleSource source = SampleSource::Oracle;
  std::int64_t problem_id = 0;
  double h_g_s = 0.0;
  std::vector<int> goal;
  std::string mode;  ///< search that produced it: astar, wastar, focal, oracle

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Where a batch of samples came from.
struct SampleContext {
  std::string map_id;
  std::int64_t problem_id = 0;
  std::vector<int> goal;
  std::string mode = "astar";
};

struct CollectorStats {
  std::uint64_t expansions_seen = 0;
  std::uint64_t backtrack_steps = 0;
  std::uint64_t completions = 0;
  std::uint64_t incomplete_updates = 0;
  /// Incomplete overwrites that lowered the bound. Zero under A* with a
  /// consistent heuristic.
  std::uint64_t overwrite_decreases = 0;
  /// Completions whose target is below the last incomplete bound.
  std::uint64_t completion_below_bound = 0;
};

enum class WalkRule { StopAtCompleted, SkipCompleted };

template <class D>
std::vector<int> state_ints(const typename D::State& s) {
  return D::to_ints(s);
}

template <SearchDomain D>
class BacktrackCollector {
 public:
  using State = typename D::State;

  struct Record {
    State state{};
    Cost g = 0;
    double h_g = 0.0;
    double best_b = 0.0;  ///< complete target, or current lower bound
    double best_d = 0.0;  ///< region distance of the descendant behind best_b
    bool touched = false;
    bool completed = false;
  };

  BacktrackCollector(const D& domain, int K, WalkRule walk = WalkRule::StopAtCompleted)
      : domain_(&domain), K_(K), walk_(walk) {
    if (K < 1) throw ValidationError("K must be >= 1");
  }

  int K() const noexcept { return K_; }

  void on_expand(const SearchTree<State>& tree, NodeId id) {
    ++stats_.expansions_seen;
    const auto& s = tree[id];
    for (NodeId cur = s.parent; cur != kNoNode; cur = tree[cur].parent) {
      if (cur < records_.size() && records_[cur].completed) {
        if (walk_ == WalkRule::StopAtCompleted) break;
        continue;
      }
      if (cur >= records_.size()) records_.resize(static_cast<std::size_t>(cur) + 1);
      ++stats_.backtrack_steps;
      const auto& a = tree[cur];
      auto& r = records_[cur];
      const bool had_bound = r.touched;
      if (!r.touched) {
        r.touched = true;
        r.state = a.state;
        r.g = a.g;
        r.h_g = a.h;
      }
      const double b = static_cast<double>(s.g - a.g) + s.h - a.h;
      const double d = domain_->region_distance(a.state, s.state);
      if (escaped(d, K_)) {
        if (had_bound && b < r.best_b) ++stats_.completion_below_bound;
        r.completed = true;
        r.best_b = b;
        r.best_d = d;
        ++stats_.completions;
      } else {
        if (had_bound && b < r.best_b) ++stats_.overwrite_decreases;
        r.best_b = b;
        r.best_d = d;
        ++stats_.incomplete_updates;
      }
    }
  }

  void operator()(const SearchTree<State>& tree, NodeId id) { on_expand(tree, id); }

  /// Samples in expansion-tree node order: complete records with alpha 1,
  /// incomplete records with alpha = best_d / K. Incomplete records that made
  /// no positional progress (best_d == 0) are dropped.
  std::vector<Sample> finalize(const SampleContext& ctx) const {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!r.touched) continue;
      if (!r.completed && r.best_d <= 0.0) continue;
      Sample smp;
      smp.map_id = ctx.map_id;
      smp.state = state_ints<D>(r.state);
      smp.K = K_;
      smp.target = r.best_b;
      smp.complete = r.completed;
      smp.alpha = r.completed ? 1.0 : r.best_d / K_;
      smp.source = r.completed ? SampleSource::BacktrackComplete : SampleSource::BacktrackIncomplete;
      smp.problem_id = ctx.problem_id;
      smp.h_g_s = r.h_g;
      smp.goal = ctx.goal;
      smp.mode = ctx.mode;
      out.push_back(std::move(smp));
    }
    return out;
  }

  std::size_t complete_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const Record& r) { return r.completed; }));
  }

  /// Incomplete records currently held (including best_d == 0 ones).
  std::size_t incomplete_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const Record& r) { return r.touched && !r.completed; }));
  }

  const std::vector<Record>& records() const noexcept { return records_; }
  const CollectorStats& stats() const noexcept { return stats_; }

 private:
  const D* domain_;
  int K_;
  WalkRule walk_;
  std::vector<Record> records_;
  CollectorStats stats_;
};

// ---------------------------------------------------------------------------
// Oracle baseline: one local search per state.

template <class State>
struct OracleCollection {
  std::vector<Sample> samples;
  std::uint64_t total_expansions = 0;  ///< includes dead-end and capped calls
  std::size_t dead_ends = 0;
  std::size_t capped = 0;
  SearchStats stats;
};

template <SearchDomain D>
OracleCollection<typename D::State> collect_via_oracle(const D& domain, const std::vector<typename D::State>& states,
                                                       const typename D::State& goal, int K, const SampleContext& ctx,
                                                       const OracleOptions<typename D::State>& options = {}) {
  OracleCollection<typename D::State> out;
  for (const auto& s : states) {
    const auto r = local_residual_oracle(domain, s, goal, K, options);
    out.total_expansions += r.expansions;
    out.stats.collision_checks += r.stats.collision_checks;
    out.stats.generated += r.stats.generated;
    if (r.status == OracleStatus::DeadEnd) {
      ++out.dead_ends;
      continue;
    }
    if (r.status == OracleStatus::Capped) {
      ++out.capped;
      continue;
    }
    Sample smp;
    smp.map_id = ctx.map_id;
    smp.state = state_ints<D>(s);
    smp.K = K;
    smp.target = r.residual;
    smp.alpha = 1.0;
    smp.complete = true;
    smp.source = SampleSource::Oracle;
    smp.problem_id = ctx.problem_id;
    smp.h_g_s = domain.heuristic(s, goal);
    smp.goal = ctx.goal;
    smp.mode = "oracle";
    out.samples.push_back(std::move(smp));
  }
  return out;
}

/// Closed-list ablation: wraps a set of globally closed state keys as extra
/// obstacles for the oracle. The root state itself is never blocked.
template <SearchDomain D>
OracleOptions<typename D::State> closed_list_as_obstacles(const D& domain, const typename D::State& root,
                                                          std::vector<std::uint64_t> closed_keys,
                                                          OracleOptions<typename D::State> base = {}) {
  std::sort(closed_keys.begin(), closed_keys.end());
  const std::uint64_t root_key = domain.key(root);
  base.blocked = [&domain, root_key, keys = std::move(closed_keys)](const typename D::State& s) {
    const auto k = domain.key(s);
    return k != root_key && std::binary_search(keys.begin(), keys.end(), k);
  };
  return base;
}

}  // namespace loha
