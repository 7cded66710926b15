#pragma once

// LoHA*: focal search guided by a learned local residual, with optional
// backtracking collection during the same search; paired evaluation against
// a baseline; and the online collect/retrain loop.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "loha/collector.hpp"
#include "loha/dataset.hpp"
#include "loha/features.hpp"
#include "loha/model.hpp"
#include "loha/problem.hpp"
#include "loha/search.hpp"

namespace loha {

/// Secondary (FOCAL) ordering, with r the predicted residual:
///   Weighted     g + w h_g + r      (weighted A* priority plus the residual)
///   WeightedAll  g + w (h_g + r)
///   Additive     g + h_g + r
enum class FocalRule { Weighted, WeightedAll, Additive };

inline const char* to_string(FocalRule r) {
  switch (r) {
    case FocalRule::Weighted: return "weighted";
    case FocalRule::WeightedAll: return "weighted-all";
    case FocalRule::Additive: return "additive";
  }
  return "?";
}

inline FocalRule parse_focal_rule(const std::string& s) {
  if (s == "weighted") return FocalRule::Weighted;
  if (s == "weighted-all") return FocalRule::WeightedAll;
  if (s == "additive") return FocalRule::Additive;
  throw ValidationError("unknown focal rule '" + s + "' (expected weighted, weighted-all or additive)");
}

struct PlanOptions {
  double w = 4.0;
  std::uint64_t expansion_limit = kNoLimit;
  FocalRule rule = FocalRule::Weighted;
  bool collect = false;
  int K = 4;  ///< collection window; must match the model's K
};

template <class State>
struct PlanOutcome {
  SearchResult<State> result;
  std::vector<Sample> samples;
  CollectorStats collector;
};

/// Predicted residual for `s`; the model must match (domain, K).
template <class D>
double predict_residual(const ResidualModel& model, const D& domain, const typename D::State& s,
                        const typename D::State& goal, int K) {
  if (model.input_size() != feature_size<D>(K))
    throw ValidationError("model input size " + std::to_string(model.input_size()) + " does not match K=" +
                          std::to_string(K) + " for this domain");
  return model.predict(featurize(domain, s, goal, K));
}

namespace detail {

template <class Search, class D>
PlanOutcome<typename D::State> run_collecting(const D& domain, const ProblemInstance<typename D::State>& problem,
                                              const PlanOptions& opts, const std::string& mode, Search&& search) {
  PlanOutcome<typename D::State> out;
  if (opts.collect) {
    BacktrackCollector<D> collector(domain, opts.K);
    out.result = search([&](const auto& tree, NodeId id) { collector.on_expand(tree, id); });
    out.samples = collector.finalize({problem.map_id, problem.id, D::to_ints(problem.goal), mode});
    out.collector = collector.stats();
  } else {
    out.result = search(NoHook{});
  }
  return out;
}

}  // namespace detail

/// Weighted A* baseline, optionally collecting by backtracking.
template <SearchDomain D>
PlanOutcome<typename D::State> wastar_plan(const D& domain, const ProblemInstance<typename D::State>& problem,
                                           const PlanOptions& opts) {
  const std::string mode = opts.w == 1.0 ? "astar" : "wastar";
  return detail::run_collecting(domain, problem, opts, mode, [&](auto&& hook) {
    return astar(domain, problem.start, problem.goal, SearchOptions{opts.w, opts.expansion_limit}, hook);
  });
}

/// Focal search with FOCAL ordered per `opts.rule`, the residual coming from
/// the model. FOCAL membership uses h_g only, so the w bound holds for any
/// model.
template <SearchDomain D>
PlanOutcome<typename D::State> loha_plan(const D& domain, const ProblemInstance<typename D::State>& problem,
                                         const ResidualModel& model, const PlanOptions& opts) {
  using State = typename D::State;
  if (model.input_size() != feature_size<D>(opts.K))
    throw ValidationError("model does not match K=" + std::to_string(opts.K));
  std::unordered_map<std::uint64_t, double> cache;
  Eigen::VectorXd x(feature_size<D>(opts.K));
  const double h_scale = opts.rule == FocalRule::Additive ? 1.0 : opts.w;
  const double r_scale = opts.rule == FocalRule::WeightedAll ? opts.w : 1.0;
  auto priority = [&](const SearchNode<State>& n) {
    auto [it, fresh] = cache.try_emplace(domain.key(n.state), 0.0);
    if (fresh) {
      featurize_into(domain, n.state, problem.goal, opts.K, x.data());
      it->second = model.predict(x);
    }
    return static_cast<double>(n.g) + h_scale * n.h + r_scale * it->second;
  };
  return detail::run_collecting(domain, problem, opts, "focal", [&](auto&& hook) {
    return focal_search(domain, problem.start, problem.goal, SearchOptions{opts.w, opts.expansion_limit}, priority,
                        hook);
  });
}

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalRow {
  std::int64_t problem_id = 0;
  bool baseline_solved = false;
  bool method_solved = false;
  std::uint64_t baseline_expansions = 0;
  std::uint64_t method_expansions = 0;
  std::optional<Cost> baseline_cost;
  std::optional<Cost> method_cost;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double speedup = 1.0;  ///< median over paired-solved problems of baseline / method expansions
  std::size_t paired = 0;
  std::size_t unsolved = 0;  ///< problems dropped because either side failed
  std::vector<double> cost_ratios;  ///< method cost / baseline cost, paired problems
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Builds the report from per-problem rows.
inline EvalReport summarize(std::vector<EvalRow> rows) {
  EvalReport rep;
  std::vector<double> ratios;
  for (const auto& r : rows) {
    if (!r.baseline_solved || !r.method_solved) {
      ++rep.unsolved;
      continue;
    }
    ++rep.paired;
    ratios.push_back(static_cast<double>(std::max<std::uint64_t>(1, r.baseline_expansions)) /
                     static_cast<double>(std::max<std::uint64_t>(1, r.method_expansions)));
    rep.cost_ratios.push_back(static_cast<double>(*r.method_cost) / static_cast<double>(std::max<Cost>(1, *r.baseline_cost)));
  }
  rep.speedup = ratios.empty() ? 0.0 : median(ratios);
  rep.rows = std::move(rows);
  return rep;
}

/// Paired comparison of two solvers ("A" is the baseline).
template <class Problem, class State>
EvalReport evaluate(const std::vector<Problem>& problems,
                    const std::function<SearchResult<State>(const Problem&)>& baseline,
                    const std::function<SearchResult<State>(const Problem&)>& method) {
  std::vector<EvalRow> rows;
  for (const auto& p : problems) {
    const auto a = baseline(p);
    const auto b = method(p);
    EvalRow row;
    row.problem_id = p.id;
    row.baseline_solved = a.solved();
    row.method_solved = b.solved();
    row.baseline_expansions = a.expansions;
    row.method_expansions = b.expansions;
    row.baseline_cost = a.cost;
    row.method_cost = b.cost;
    rows.push_back(row);
  }
  return summarize(std::move(rows));
}

// ---------------------------------------------------------------------------
// Online loop.

struct OnlineConfig {
  int batch_size = 5;
  int rounds = 6;
  double w = 4.0;
  /// Weight of the round-0 search that bootstraps the dataset; 0 means w,
  /// the planner with no model. 1 gives plain A*.
  double bootstrap_weight = 0.0;
  int K = 4;
  std::uint64_t seed = 0;
  std::uint64_t expansion_limit = 2000000;
  FocalRule rule = FocalRule::Weighted;
  TrainConfig train;
  DataConfig data;
  /// Continue from the previous round's model instead of retraining from scratch.
  bool fine_tune = false;
};

struct OnlineRound {
  int round = 0;
  EvalReport report;
  std::size_t dataset_size = 0;
  std::uint64_t collection_expansions = 0;  ///< cumulative, all training searches so far
  std::size_t unsolved_training = 0;
};

/// Round 0 solves the first batch with weighted A* while collecting; each
/// later round solves the next batch with LoHA* while collecting. After every
/// round the model is retrained on all accumulated samples and evaluated
/// against weighted A* on the fixed held-out problems.
/// `training` must hold at least batch_size * rounds problems.
template <SearchDomain D>
std::vector<OnlineRound> online_loop(const OnlineConfig& cfg, const MapSet& maps,
                                     const std::vector<ProblemInstance<typename D::State>>& training,
                                     const std::vector<ProblemInstance<typename D::State>>& eval_set,
                                     ResidualModel* final_model = nullptr) {
  using State = typename D::State;
  using Problem = ProblemInstance<State>;
  if (cfg.batch_size < 1 || cfg.rounds < 1 || !(cfg.w >= 1.0) || !(cfg.bootstrap_weight == 0.0 || cfg.bootstrap_weight >= 1.0))
    throw ValidationError("online loop needs batch_size >= 1, rounds >= 1, w >= 1, bootstrap weight 0 or >= 1");
  if (training.size() < static_cast<std::size_t>(cfg.batch_size) * static_cast<std::size_t>(cfg.rounds))
    throw ValidationError("not enough training problems for the online loop");

  PlanOptions plan{cfg.w, cfg.expansion_limit, cfg.rule, true, cfg.K};
  PlanOptions eval_plan = plan;
  eval_plan.collect = false;
  PlanOptions bootstrap = plan;
  bootstrap.w = cfg.bootstrap_weight == 0.0 ? cfg.w : cfg.bootstrap_weight;

  // Baseline expansions on the held-out set do not change across rounds.
  std::vector<SearchResult<State>> baseline;
  for (const auto& p : eval_set) baseline.push_back(wastar_plan(D(lookup_map(maps, p.map_id)), p, eval_plan).result);

  std::vector<Sample> dataset;
  std::vector<OnlineRound> out;
  std::optional<ResidualModel> model;
  std::uint64_t collection = 0;
  for (int round = 0; round < cfg.rounds; ++round) {
    OnlineRound info;
    info.round = round;
    for (int i = 0; i < cfg.batch_size; ++i) {
      const Problem& p = training[static_cast<std::size_t>(round * cfg.batch_size + i)];
      const D domain(lookup_map(maps, p.map_id));
      auto outcome = model ? loha_plan(domain, p, *model, plan) : wastar_plan(domain, p, bootstrap);
      if (!outcome.result.solved()) ++info.unsolved_training;
      collection += outcome.result.expansions;
      dataset.insert(dataset.end(), outcome.samples.begin(), outcome.samples.end());
    }
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train", static_cast<std::uint64_t>(round));
    DataConfig dc = cfg.data;
    dc.seed = derive_seed(cfg.seed, "data", static_cast<std::uint64_t>(round));
    const Dataset data = prepare_training_data<D>(dataset, maps, dc);
    model = train(data, tc, cfg.fine_tune && model ? &*model : nullptr).model;

    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
      const auto& p = eval_set[i];
      const auto r = loha_plan(D(lookup_map(maps, p.map_id)), p, *model, eval_plan).result;
      EvalRow row;
      row.problem_id = p.id;
      row.baseline_solved = baseline[i].solved();
      row.method_solved = r.solved();
      row.baseline_expansions = baseline[i].expansions;
      row.method_expansions = r.expansions;
      row.baseline_cost = baseline[i].cost;
      row.method_cost = r.cost;
      rows.push_back(row);
    }
    info.report = summarize(std::move(rows));
    info.dataset_size = dataset.size();
    info.collection_expansions = collection;
    out.push_back(std::move(info));
  }
  if (final_model && model) *final_model = *model;
  return out;
}

}  // namespace loha
