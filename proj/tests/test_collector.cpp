#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "loha/collector.hpp"
#include "loha/random.hpp"
#include "loha/search.hpp"
#include "loha/tree_graph.hpp"

using namespace loha;

namespace {

Cell random_free(const OccupancyGrid& g, Rng& rng) {
  for (;;) {
    const Cell c{static_cast<int>(rng.below(static_cast<std::uint64_t>(g.width()))),
                 static_cast<int>(rng.below(static_cast<std::uint64_t>(g.height())))};
    if (!g.is_blocked(c.x, c.y)) return c;
  }
}

TreeGraph::Node tnode(int x, int y, std::vector<int> children = {}) {
  TreeGraph::Node n;
  n.x = x;
  n.y = y;
  n.children = std::move(children);
  return n;
}

// Chain n0..n6 heading east toward an isolated goal, plus leaves L0..L2 one
// step north of n0..n2. f is 20 along the chain and 22 on the leaves, so A*
// expands n0..n6 then L2, L1, L0: ten expansions in total.
TreeGraph worked_tree() {
  std::vector<TreeGraph::Node> nodes;
  nodes.push_back(tnode(0, 0, {1, 7}));
  nodes.push_back(tnode(1, 0, {2, 8}));
  nodes.push_back(tnode(2, 0, {3, 9}));
  nodes.push_back(tnode(3, 0, {4}));
  nodes.push_back(tnode(4, 0, {5}));
  nodes.push_back(tnode(5, 0, {6}));
  nodes.push_back(tnode(6, 0));
  nodes.push_back(tnode(0, 1));
  nodes.push_back(tnode(1, 1));
  nodes.push_back(tnode(2, 1));
  nodes.push_back(tnode(20, 0));  // goal, unreachable
  return TreeGraph(std::move(nodes));
}

// Straightforward re-statement of the backtracking rule, kept separate from
// the library class. Records are keyed by node id.
struct ReferenceRecord {
  double b = 0.0;
  double d = 0.0;
  bool complete = false;
};

template <class D>
struct ReferenceCollector {
  const D* domain;
  int K;
  std::map<NodeId, ReferenceRecord> records;
  std::size_t decreases = 0;
  std::size_t completion_below = 0;

  void operator()(const SearchTree<typename D::State>& tree, NodeId id) {
    const auto& s = tree[id];
    NodeId cur = s.parent;
    while (cur != kNoNode) {
      auto it = records.find(cur);
      if (it != records.end() && it->second.complete) break;
      const auto& a = tree[cur];
      const double b = static_cast<double>(s.g) - static_cast<double>(a.g) + s.h - a.h;
      const double d = domain->region_distance(a.state, s.state);
      if (it != records.end() && b < it->second.b - 1e-12) {
        if (d > K)
          ++completion_below;
        else
          ++decreases;
      }
      records[cur] = ReferenceRecord{b, d, d > K};
      cur = a.parent;
    }
  }
};

}  // namespace

TEST(Backtrack, WorkedTreeFourCompleteTwoPartial) {
  const auto t = worked_tree();
  // Counting a state three steps away as outside the window (4 complete,
  // 2 partial) matches the strict escape test at K = 2.
  BacktrackCollector<TreeGraph> col(t, 2);
  std::vector<int> order;
  const auto r = astar(t, 0, 10, SearchOptions{}, [&](const SearchTree<int>& tree, NodeId id) {
    order.push_back(tree[id].state);
    col(tree, id);
  });
  EXPECT_EQ(r.status, SearchStatus::Exhausted);
  EXPECT_EQ(order, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 9, 8, 7}));
  EXPECT_EQ(col.complete_count(), 4u);
  EXPECT_EQ(col.incomplete_count(), 2u);
  const auto samples = col.finalize({"tree", 0, {10}, "astar"});
  ASSERT_EQ(samples.size(), 6u);
  // Complete: n0..n3. Partial: n4 (via n6, d = 2) and n5 (d = 1). Leaves yield nothing.
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(samples[static_cast<std::size_t>(i)].state, std::vector<int>{i});
    EXPECT_TRUE(samples[static_cast<std::size_t>(i)].complete);
    EXPECT_EQ(samples[static_cast<std::size_t>(i)].target, 0.0);
  }
  EXPECT_EQ(samples[4].state, std::vector<int>{4});
  EXPECT_FALSE(samples[4].complete);
  EXPECT_DOUBLE_EQ(samples[4].alpha, 1.0);
  EXPECT_EQ(samples[5].state, std::vector<int>{5});
  EXPECT_DOUBLE_EQ(samples[5].alpha, 0.5);
}

TEST(Backtrack, WorkedTreeUnderStrictKThree) {
  const auto t = worked_tree();
  BacktrackCollector<TreeGraph> col(t, 3);
  astar(t, 0, 10, SearchOptions{}, col);
  // n0..n2 escape via n4..n6; n3..n5 only see descendants within 3.
  EXPECT_EQ(col.complete_count(), 3u);
  EXPECT_EQ(col.incomplete_count(), 3u);
}

TEST(Backtrack, CompletedChainIsNotRevisited) {
  const auto t = worked_tree();
  BacktrackCollector<TreeGraph> col(t, 2);
  std::vector<std::uint64_t> steps;
  astar(t, 0, 10, SearchOptions{}, [&](const SearchTree<int>& tree, NodeId id) {
    const auto before = col.stats().backtrack_steps;
    col(tree, id);
    steps.push_back(col.stats().backtrack_steps - before);
  });
  ASSERT_EQ(steps.size(), 10u);
  // L2, L1, L0 hang off completed parents.
  EXPECT_EQ(steps[7], 0u);
  EXPECT_EQ(steps[8], 0u);
  EXPECT_EQ(steps[9], 0u);
  // n4's walk touches n3, n2, n1 and stops at the completed n0.
  EXPECT_EQ(steps[4], 3u);
}

TEST(Backtrack, OneWideCorridor) {
  const int len = 20, K = 3;
  OccupancyGrid g(len, 3);
  for (int x = 0; x < len; ++x) {
    g.set_blocked(x, 0, true);
    g.set_blocked(x, 2, true);
  }
  Grid2D d(g);
  BacktrackCollector<Grid2D> col(d, K);
  const auto r = astar(d, Cell{0, 1}, Cell{len - 1, 1}, SearchOptions{}, col);
  ASSERT_TRUE(r.solved());
  ASSERT_EQ(r.expansions, static_cast<std::uint64_t>(len - 1));
  const int last = len - 2;  // last expanded cell
  const auto samples = col.finalize({"corridor", 0, {len - 1, 1}, "astar"});
  ASSERT_EQ(samples.size(), static_cast<std::size_t>(last));
  for (const auto& s : samples) {
    const int x = s.state[0];
    if (last - x >= K + 1) {
      EXPECT_TRUE(s.complete) << x;
      EXPECT_EQ(s.target, 0.0);
      EXPECT_EQ(s.alpha, 1.0);
    } else {
      EXPECT_FALSE(s.complete) << x;
      EXPECT_EQ(s.target, 0.0);
      EXPECT_DOUBLE_EQ(s.alpha, static_cast<double>(last - x) / K);
    }
  }
}

TEST(Finalize, AlphaFromDistanceAndDropRules) {
  OccupancyGrid g(16, 16);
  Grid2D d(g);
  SearchTree<Cell> tree;
  auto [root, _r] = tree.find_or_add(d.key(Cell{0, 0}), Cell{0, 0});
  tree[root].g = 0;
  tree[root].h = 10.0;
  auto [child, _c] = tree.find_or_add(d.key(Cell{2, 0}), Cell{2, 0});
  tree[child].g = 2;
  tree[child].h = 9.5;
  tree[child].parent = root;

  BacktrackCollector<Grid2D> col(d, 4);
  col(tree, root);
  EXPECT_TRUE(col.finalize({}).empty());  // only the start expanded
  col(tree, child);
  auto out = col.finalize({"m", 3, {9, 9}, "focal"});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].target, 1.5);
  EXPECT_DOUBLE_EQ(out[0].alpha, 0.5);
  EXPECT_FALSE(out[0].complete);
  EXPECT_EQ(out[0].source, SampleSource::BacktrackIncomplete);
  EXPECT_EQ(out[0].map_id, "m");
  EXPECT_EQ(out[0].problem_id, 3);
  EXPECT_EQ(out[0].mode, "focal");
  EXPECT_EQ(out[0].h_g_s, 10.0);

  auto [far, _f] = tree.find_or_add(d.key(Cell{5, 1}), Cell{5, 1});
  tree[far].g = 6;
  tree[far].h = 8.0;
  tree[far].parent = child;
  col(tree, far);
  out = col.finalize({});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].complete);
  EXPECT_EQ(out[0].alpha, 1.0);
  EXPECT_DOUBLE_EQ(out[0].target, 4.0);
  EXPECT_FALSE(out[1].complete);
  EXPECT_DOUBLE_EQ(out[1].alpha, 0.75);

  // A descendant on the same cell carries no positional progress.
  BacktrackCollector<Grid2D> col2(d, 4);
  auto [same, _s] = tree.find_or_add(d.key(Cell{7, 7}) + 1000000, Cell{0, 0});
  tree[same].g = 1;
  tree[same].h = 10.0;
  tree[same].parent = root;
  col2(tree, same);
  EXPECT_EQ(col2.incomplete_count(), 1u);
  EXPECT_TRUE(col2.finalize({}).empty());
}

TEST(Backtrack, MatchesReferenceAndBoundsAreMonotone) {
  Rng rng(21);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = generate_random(40, 40, 0.3, seed + 77);
    Grid2D d(g);
    const Cell s = random_free(g, rng), t = random_free(g, rng);
    const int K = 2 + static_cast<int>(seed % 4);
    BacktrackCollector<Grid2D> col(d, K);
    ReferenceCollector<Grid2D> ref{&d, K, {}, 0, 0};
    std::map<NodeId, Cell> states;
    astar(d, s, t, SearchOptions{}, [&](const SearchTree<Cell>& tree, NodeId id) {
      col(tree, id);
      ref(tree, id);
      states[id] = tree[id].state;
    });
    EXPECT_EQ(ref.decreases, 0u);
    EXPECT_EQ(ref.completion_below, 0u);
    EXPECT_EQ(col.stats().overwrite_decreases, 0u);
    EXPECT_EQ(col.stats().completion_below_bound, 0u);

    std::vector<Sample> expected;
    for (const auto& [id, rec] : ref.records) {
      if (!rec.complete && rec.d <= 0.0) continue;
      Sample smp;
      smp.state = {states.at(id).x, states.at(id).y};
      smp.target = rec.b;
      smp.complete = rec.complete;
      smp.alpha = rec.complete ? 1.0 : rec.d / K;
      expected.push_back(smp);
    }
    const auto got = col.finalize({});
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].state, expected[i].state);
      EXPECT_EQ(got[i].target, expected[i].target);
      EXPECT_EQ(got[i].complete, expected[i].complete);
      EXPECT_EQ(got[i].alpha, expected[i].alpha);
      EXPECT_GE(got[i].target, 0.0);
    }
  }
}

namespace {

struct TreeComparison {
  std::size_t compared = 0;
  std::size_t equal = 0;
  std::size_t below_oracle = 0;
};

TreeComparison compare_on_trees(WalkRule walk, std::uint64_t count) {
  Rng rng(4);
  TreeComparison c;
  for (std::uint64_t seed = 0; seed < count; ++seed) {
    const auto t = TreeGraph::random(60 + static_cast<int>(seed * 7), seed);
    // Every other tree uses an unreachable goal so the whole tree is expanded.
    const int goal = seed % 2 ? -1 : static_cast<int>(rng.below(static_cast<std::uint64_t>(t.size())));
    const int K = 1 + static_cast<int>(seed % 4);
    BacktrackCollector<TreeGraph> col(t, K, walk);
    astar(t, 0, goal, SearchOptions{}, col);
    OracleOptions<int> opts;
    opts.rule = BorderRule::BeyondK;
    for (const auto& smp : col.finalize({})) {
      if (!smp.complete) continue;
      const auto o = local_residual_oracle(t, smp.state[0], goal, K, opts);
      EXPECT_EQ(o.status, OracleStatus::Found);
      ++c.compared;
      c.equal += smp.target == o.residual;
      c.below_oracle += smp.target < o.residual;
    }
  }
  return c;
}

}  // namespace

TEST(Backtrack, SkippingCompletedAncestorsEqualsOracleOnTrees) {
  const auto c = compare_on_trees(WalkRule::SkipCompleted, 40);
  EXPECT_GT(c.compared, 100u);
  EXPECT_EQ(c.equal, c.compared);
}

TEST(Backtrack, StoppingAtCompletedAncestorsDominatesOracleOnTrees) {
  // The literal stop rule can hide the first escape from a higher ancestor,
  // so only the inequality is guaranteed.
  const auto c = compare_on_trees(WalkRule::StopAtCompleted, 40);
  EXPECT_GT(c.compared, 100u);
  EXPECT_EQ(c.below_oracle, 0u);
  RecordProperty("equal", static_cast<int>(c.equal));
  RecordProperty("compared", static_cast<int>(c.compared));
}

TEST(Backtrack, DominatesOracleOnGrids) {
  Rng rng(6);
  std::size_t compared = 0, equal = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = generate_random(32, 32, 0.3, seed + 300);
    Grid2D d(g);
    const Cell s = random_free(g, rng), t = random_free(g, rng);
    BacktrackCollector<Grid2D> col(d, 3);
    astar(d, s, t, SearchOptions{}, col);
    OracleOptions<Cell> opts;
    opts.rule = BorderRule::BeyondK;
    for (const auto& smp : col.finalize({})) {
      if (!smp.complete) continue;
      const auto o = local_residual_oracle(d, Grid2D::from_ints(smp.state), t, 3, opts);
      ASSERT_EQ(o.status, OracleStatus::Found);
      EXPECT_GE(smp.target, o.residual);
      equal += smp.target == o.residual;
      ++compared;
    }
  }
  EXPECT_GT(compared, 100u);
  RecordProperty("equality_rate", std::to_string(static_cast<double>(equal) / static_cast<double>(compared)));
}

TEST(Backtrack, TransparentToSearch) {
  Rng rng(12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = generate_random(48, 48, 0.3, seed + 40);
    Grid2D d(g);
    const Cell s = random_free(g, rng), t = random_free(g, rng);
    const auto plain = astar(d, s, t, SearchOptions{2.0});
    BacktrackCollector<Grid2D> col(d, 4);
    const auto hooked = astar(d, s, t, SearchOptions{2.0}, col);
    EXPECT_EQ(plain.status, hooked.status);
    EXPECT_EQ(plain.path, hooked.path);
    EXPECT_EQ(plain.expansions, hooked.expansions);
    EXPECT_EQ(plain.stats.collision_checks, hooked.stats.collision_checks);
    EXPECT_EQ(plain.stats.generated, hooked.stats.generated);
  }
}

TEST(OracleCollection, AccountsEveryCall) {
  const auto g = generate_random(32, 32, 0.3, 9);
  Grid2D d(g);
  Rng rng(10);
  std::vector<Cell> states;
  for (int i = 0; i < 100; ++i) states.push_back(random_free(g, rng));
  const Cell goal = random_free(g, rng);
  std::uint64_t sum = 0;
  std::size_t found = 0;
  for (const auto& s : states) {
    const auto r = local_residual_oracle(d, s, goal, 3);
    sum += r.expansions;
    found += r.status == OracleStatus::Found;
  }
  const auto c = collect_via_oracle(d, states, goal, 3, {"m", 1, {goal.x, goal.y}, "oracle"});
  EXPECT_EQ(c.total_expansions, sum);
  EXPECT_EQ(c.samples.size(), found);
  EXPECT_EQ(c.samples.size() + c.dead_ends + c.capped, states.size());
  for (const auto& smp : c.samples) {
    EXPECT_EQ(smp.source, SampleSource::Oracle);
    EXPECT_EQ(smp.alpha, 1.0);
    EXPECT_TRUE(std::isfinite(smp.target));
  }
}

TEST(OracleCollection, EmptyGridTargetsAreZero) {
  OccupancyGrid g(32, 32);
  Grid2D d(g);
  std::vector<Cell> states{{3, 3}, {10, 20}, {16, 16}, {28, 5}};
  const auto c = collect_via_oracle(d, states, Cell{31, 31}, 3, {});
  ASSERT_EQ(c.samples.size(), states.size());
  for (const auto& smp : c.samples) EXPECT_EQ(smp.target, 0.0);
}

TEST(SampleSourceNames, RoundTrip) {
  for (auto s : {SampleSource::Oracle, SampleSource::BacktrackComplete, SampleSource::BacktrackIncomplete})
    EXPECT_EQ(parse_sample_source(to_string(s)), s);
  EXPECT_THROW(parse_sample_source("magic"), ValidationError);
}
