#pragma once

// Experiment drivers behind the `plan` CLI. Each command reads maps and
// problems, runs searches (in parallel across problems, merged in problem
// order) and writes its outputs through one writer. CSV files carry the
// config hash in a leading comment; JSONL, map and model files carry it in a
// `<file>.meta.json` sidecar.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loha/collector.hpp"
#include "loha/dataset.hpp"
#include "loha/model.hpp"
#include "loha/planner.hpp"
#include "loha/problem.hpp"

namespace loha::harness {

using Json = nlohmann::ordered_json;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// fnv1a64 over "command\nkey=value\n..." with keys sorted, as 16 hex digits.
inline std::string config_hash(const std::string& command, std::vector<std::pair<std::string, std::string>> items) {
  std::sort(items.begin(), items.end());
  std::string canon = command + "\n";
  for (const auto& [k, v] : items) canon += k + "=" + v + "\n";
  return hex64(fnv1a64(canon));
}

// ---------------------------------------------------------------------------
// Workers.

/// Hardware threads, capped by LOHA_THREADS when set.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LOHA_THREADS"); env && *env) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (*end != '\0' || cap < 1) throw ValidationError(std::string("LOHA_THREADS must be a positive integer, got '") + env + "'");
    n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

/// Runs fn(i) for i in [0, n). Results must go to per-index slots; the
/// exception from the lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t threads = std::min(worker_count(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Files.

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

inline void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string meta_path(const std::string& path) { return path + ".meta.json"; }

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
}

/// Shortest round-trip decimal form, as the JSON writer prints doubles.
inline std::string fmt(double v) { return Json(v).dump(); }

// ---------------------------------------------------------------------------
// Maps.

struct GenMapsArgs {
  std::string out_dir;
  int count = 10;
  int width = 256;
  int height = 256;
  double density = 0.3;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Writes map_000.map, map_001.map, ... and manifest.json; returns the map paths.
inline std::vector<std::string> gen_maps(const GenMapsArgs& a) {
  if (a.count < 1) throw ValidationError("--count must be >= 1");
  if (a.width < 1 || a.height < 1) throw ValidationError("map size must be positive");
  if (!(a.density >= 0.0 && a.density < 1.0)) throw ValidationError("--density must lie in [0, 1)");
  std::vector<std::string> paths;
  Json list = Json::array();
  for (int i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "map_%03d.map", i);
    const std::uint64_t seed = derive_seed(a.seed, "maps", static_cast<std::uint64_t>(i));
    const auto grid = generate_random(a.width, a.height, a.density, seed);
    const std::string path = (std::filesystem::path(a.out_dir) / name).string();
    ensure_parent(path);
    write_map(grid, path);
    paths.push_back(path);
    list.push_back(Json{{"file", name}, {"id", map_id_from_path(name)}, {"seed", seed}});
  }
  Json manifest;
  manifest["config_hash"] = a.config_hash;
  manifest["command"] = "gen-maps";
  manifest["width"] = a.width;
  manifest["height"] = a.height;
  manifest["density"] = a.density;
  manifest["seed"] = a.seed;
  manifest["maps"] = std::move(list);
  write_json((std::filesystem::path(a.out_dir) / "manifest.json").string(), manifest);
  return paths;
}

struct MapDir {
  MapSet maps;
  std::vector<std::string> paths;  ///< sorted; map id = file stem
};

inline MapDir load_map_dir(const std::string& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("map directory not found: " + dir);
  MapDir out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".map") out.paths.push_back(e.path().string());
  if (out.paths.empty()) throw IoError("no .map files in " + dir);
  std::sort(out.paths.begin(), out.paths.end());
  for (const auto& p : out.paths) out.maps.emplace(map_id_from_path(p), read_map(p));
  return out;
}

// ---------------------------------------------------------------------------
// Problems.

struct ProblemArgs {
  std::string file;  ///< JSONL of problems; empty means sample `count` of them
  std::size_t count = 20;
  double min_distance = 40.0;
  double max_distance = 80.0;
  std::uint64_t check_limit = 200000;
};

/// Problems spread round-robin over the maps. Sampling streams are keyed by
/// (seed, purpose, map index), so training and evaluation sets drawn with
/// different purposes are independent.
template <SearchDomain D>
std::vector<ProblemInstance<typename D::State>> make_problems(const MapDir& md, const ProblemArgs& a, int K, double w,
                                                              std::uint64_t seed, const std::string& purpose) {
  using Problem = ProblemInstance<typename D::State>;
  std::vector<Problem> out;
  if (!a.file.empty()) {
    std::ifstream in(a.file);
    if (!in) throw IoError("cannot open " + a.file);
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed problem JSON: ") + e.what(), lineno);
      }
      auto p = problem_from_json<D>(j, static_cast<std::int64_t>(out.size()));
      lookup_map(md.maps, p.map_id);
      out.push_back(std::move(p));
    }
    if (out.empty()) throw ValidationError("no problems in " + a.file);
    return out;
  }
  if (a.count == 0) throw ValidationError("problem count must be >= 1");
  if (!(a.min_distance >= 0.0 && a.max_distance >= a.min_distance)) throw ValidationError("bad distance band");
  ProblemSampling sampling;
  sampling.min_distance = a.min_distance;
  sampling.max_distance = a.max_distance;
  sampling.check_weight = 4.0;
  sampling.check_limit = a.check_limit;
  const std::size_t n_maps = md.paths.size();
  std::vector<std::vector<Problem>> per_map(n_maps);
  parallel_for(n_maps, [&](std::size_t m) {
    const std::size_t want = a.count / n_maps + (m < a.count % n_maps ? 1 : 0);
    if (want == 0) return;
    const D domain(lookup_map(md.maps, map_id_from_path(md.paths[m])));
    per_map[m] = sample_problems(domain, md.paths[m], want, derive_seed(seed, purpose, m), sampling, K, w);
  });
  for (std::size_t j = 0; out.size() < a.count; ++j)
    for (std::size_t m = 0; m < n_maps && out.size() < a.count; ++m)
      if (j < per_map[m].size()) out.push_back(per_map[m][j]);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<std::int64_t>(i);
  return out;
}

template <SearchDomain D>
Json problems_json(const std::vector<ProblemInstance<typename D::State>>& ps) {
  Json list = Json::array();
  for (const auto& p : ps) list.push_back(problem_to_json<D>(p));
  return list;
}

// ---------------------------------------------------------------------------
// Collection.

struct CollectionRun {
  std::vector<Sample> samples;
  std::uint64_t expansions = 0;  ///< all collecting searches, solved or not
  std::size_t unsolved = 0;
  std::size_t complete = 0;
};

/// Solves every problem while collecting: weighted A* when `model` is null,
/// LoHA* otherwise. `opts.collect` is forced on.
template <SearchDomain D>
CollectionRun collect_samples(const MapSet& maps, const std::vector<ProblemInstance<typename D::State>>& problems,
                              PlanOptions opts, const ResidualModel* model = nullptr) {
  opts.collect = true;
  std::vector<PlanOutcome<typename D::State>> outcomes(problems.size());
  parallel_for(problems.size(), [&](std::size_t i) {
    const D domain(lookup_map(maps, problems[i].map_id));
    outcomes[i] = model ? loha_plan(domain, problems[i], *model, opts) : wastar_plan(domain, problems[i], opts);
  });
  CollectionRun run;
  for (auto& o : outcomes) {
    run.expansions += o.result.expansions;
    if (!o.result.solved()) ++run.unsolved;
    for (auto& s : o.samples) {
      if (s.complete) ++run.complete;
      run.samples.push_back(std::move(s));
    }
  }
  return run;
}

struct OracleRun {
  std::vector<Sample> samples;
  std::uint64_t global_expansions = 0;
  std::uint64_t oracle_expansions = 0;
  std::size_t states = 0;
  std::size_t dead_ends = 0;
  std::size_t capped = 0;
};

/// Up to `n` states expanded by a global search, chosen uniformly and
/// returned in expansion order.
template <SearchDomain D>
std::vector<typename D::State> sample_tree_states(const D& domain, const ProblemInstance<typename D::State>& p,
                                                  const SearchOptions& search, std::size_t n, std::uint64_t seed,
                                                  std::uint64_t* expansions = nullptr) {
  std::vector<typename D::State> seen;
  const auto r = astar(domain, p.start, p.goal, search,
                       [&](const SearchTree<typename D::State>& tree, NodeId id) { seen.push_back(tree[id].state); });
  if (expansions) *expansions = r.expansions;
  if (seen.size() <= n) return seen;
  std::vector<std::size_t> idx(seen.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<typename D::State> out;
  for (auto i : idx) out.push_back(seen[i]);
  return out;
}

/// Labels states drawn from global-search trees with the local oracle.
template <SearchDomain D>
OracleRun oracle_samples(const MapSet& maps, const std::vector<ProblemInstance<typename D::State>>& problems, int K,
                         const SearchOptions& global, std::size_t states_per_problem, std::uint64_t oracle_cap,
                         std::uint64_t seed) {
  std::vector<OracleCollection<typename D::State>> parts(problems.size());
  std::vector<std::uint64_t> global_exp(problems.size());
  std::vector<std::size_t> n_states(problems.size());
  parallel_for(problems.size(), [&](std::size_t i) {
    const auto& p = problems[i];
    const D domain(lookup_map(maps, p.map_id));
    const auto states = sample_tree_states(domain, p, global, states_per_problem,
                                           derive_seed(seed, "oracle-states", static_cast<std::uint64_t>(p.id)),
                                           &global_exp[i]);
    n_states[i] = states.size();
    OracleOptions<typename D::State> oo;
    oo.expansion_cap = oracle_cap;
    parts[i] = collect_via_oracle(domain, states, p.goal, K, {p.map_id, p.id, D::to_ints(p.goal), "oracle"}, oo);
  });
  OracleRun run;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    run.global_expansions += global_exp[i];
    run.oracle_expansions += parts[i].total_expansions;
    run.states += n_states[i];
    run.dead_ends += parts[i].dead_ends;
    run.capped += parts[i].capped;
    for (auto& s : parts[i].samples) run.samples.push_back(std::move(s));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Evaluation.

template <SearchDomain D>
EvalReport evaluate_model(const MapSet& maps, const std::vector<ProblemInstance<typename D::State>>& problems,
                          const ResidualModel& model, PlanOptions opts) {
  opts.collect = false;
  std::vector<EvalRow> rows(problems.size());
  parallel_for(problems.size(), [&](std::size_t i) {
    const auto& p = problems[i];
    const D domain(lookup_map(maps, p.map_id));
    const auto a = wastar_plan(domain, p, opts).result;
    const auto b = loha_plan(domain, p, model, opts).result;
    EvalRow& row = rows[i];
    row.problem_id = p.id;
    row.baseline_solved = a.solved();
    row.method_solved = b.solved();
    row.baseline_expansions = a.expansions;
    row.method_expansions = b.expansions;
    row.baseline_cost = a.cost;
    row.method_cost = b.cost;
  });
  return summarize(std::move(rows));
}

inline std::string eval_csv(const EvalReport& rep, const std::string& hash) {
  std::string s = "# config_hash=" + hash + "\n";
  s += "problem_id,baseline_solved,method_solved,baseline_expansions,method_expansions,baseline_cost,method_cost\n";
  auto cost = [](const std::optional<Cost>& c) { return c ? std::to_string(*c) : std::string(); };
  for (const auto& r : rep.rows)
    s += std::to_string(r.problem_id) + "," + (r.baseline_solved ? "1" : "0") + "," + (r.method_solved ? "1" : "0") + "," +
         std::to_string(r.baseline_expansions) + "," + std::to_string(r.method_expansions) + "," +
         cost(r.baseline_cost) + "," + cost(r.method_cost) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Collection efficiency.

struct EfficiencyRow {
  int K = 0;
  std::string method;       ///< "local-astar", "complete" or "incomplete"
  std::uint64_t expansions = 0;
  std::size_t samples = 0;
  double per_sample = 0.0;  ///< expansions / samples (0 when there are no samples)
};

struct EfficiencyOptions {
  std::vector<int> Ks{2, 4, 8};
  SearchOptions global{1.0, 2000000};
  std::size_t states_per_problem = 20;
  std::uint64_t oracle_cap = 200000;
  std::uint64_t seed = 0;
};

/// Per K: the oracle labels states sampled from each global-search tree
/// (Local A*), and the same global searches collect by backtracking. The
/// global search runs once per problem with one collector per K attached.
template <SearchDomain D>
std::vector<EfficiencyRow> bench_efficiency(const MapSet& maps,
                                            const std::vector<ProblemInstance<typename D::State>>& problems,
                                            const EfficiencyOptions& o) {
  if (o.Ks.empty()) throw ValidationError("K list must be non-empty");
  for (int K : o.Ks)
    if (K < 1) throw ValidationError("K must be >= 1");
  const std::size_t nk = o.Ks.size();
  struct Part {
    std::uint64_t global = 0;
    std::vector<std::uint64_t> oracle_exp, oracle_n;
    std::vector<std::size_t> complete, total;
  };
  std::vector<Part> parts(problems.size());
  parallel_for(problems.size(), [&](std::size_t i) {
    const auto& p = problems[i];
    const D domain(lookup_map(maps, p.map_id));
    Part& part = parts[i];
    std::vector<BacktrackCollector<D>> collectors;
    for (int K : o.Ks) collectors.emplace_back(domain, K);
    const auto r = astar(domain, p.start, p.goal, o.global, [&](const SearchTree<typename D::State>& tree, NodeId id) {
      for (auto& c : collectors) c.on_expand(tree, id);
    });
    part.global = r.expansions;
    const auto states = sample_tree_states(domain, p, o.global, o.states_per_problem,
                                           derive_seed(o.seed, "oracle-states", static_cast<std::uint64_t>(p.id)));
    for (std::size_t k = 0; k < nk; ++k) {
      const auto samples = collectors[k].finalize({p.map_id, p.id, D::to_ints(p.goal), "astar"});
      std::size_t complete = 0;
      for (const auto& s : samples) complete += s.complete ? 1 : 0;
      part.complete.push_back(complete);
      part.total.push_back(samples.size());
      OracleOptions<typename D::State> oo;
      oo.expansion_cap = o.oracle_cap;
      const auto oc = collect_via_oracle(domain, states, p.goal, o.Ks[k], {p.map_id, p.id, D::to_ints(p.goal), "oracle"}, oo);
      part.oracle_exp.push_back(oc.total_expansions);
      part.oracle_n.push_back(oc.samples.size());
    }
  });
  auto ratio = [](std::uint64_t e, std::size_t n) { return n ? static_cast<double>(e) / static_cast<double>(n) : 0.0; };
  std::vector<EfficiencyRow> rows;
  for (std::size_t k = 0; k < nk; ++k) {
    std::uint64_t global = 0, oracle = 0;
    std::size_t on = 0, complete = 0, total = 0;
    for (const auto& p : parts) {
      global += p.global;
      oracle += p.oracle_exp[k];
      on += p.oracle_n[k];
      complete += p.complete[k];
      total += p.total[k];
    }
    rows.push_back({o.Ks[k], "local-astar", oracle, on, ratio(oracle, on)});
    rows.push_back({o.Ks[k], "complete", global, complete, ratio(global, complete)});
    rows.push_back({o.Ks[k], "incomplete", global, total, ratio(global, total)});
  }
  return rows;
}

inline std::string efficiency_csv(const std::vector<EfficiencyRow>& rows, const std::string& hash) {
  std::string s = "# config_hash=" + hash + "\n";
  s += "# expansions_per_sample = expansions / samples, totals summed over all problems.\n";
  s += "# local-astar: expansions of every oracle call (dead ends and capped calls included) / states labelled.\n";
  s += "# complete: global-search expansions / complete backtrack samples.\n";
  s += "# incomplete: the same global-search expansions / all backtrack samples (complete and incomplete).\n";
  s += "K,method,expansions,samples,expansions_per_sample\n";
  for (const auto& r : rows)
    s += std::to_string(r.K) + "," + r.method + "," + std::to_string(r.expansions) + "," + std::to_string(r.samples) +
         "," + fmt(r.per_sample) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Training.

inline Json train_config_json(const TrainConfig& t, const DataConfig& d) {
  Json j;
  j["learning_rate"] = t.learning_rate;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["seed"] = t.seed;
  j["optimizer"] = t.optimizer == Optimizer::Adam ? "adam" : "sgd";
  j["hidden"] = t.hidden;
  j["use_alpha"] = t.use_alpha;
  j["incomplete_ratio"] = d.incomplete_ratio;
  j["max_samples"] = d.max_samples;
  j["augment"] = d.augment;
  return j;
}

struct TrainedModel {
  ResidualModel model;
  std::vector<double> loss_history;
  std::size_t rows = 0;
  int K = 0;
};

/// All samples must share one K. Throws "empty dataset" on no samples.
template <SearchDomain D>
TrainedModel train_on_samples(const std::vector<Sample>& samples, const MapSet& maps, const TrainConfig& t,
                              const DataConfig& d) {
  if (samples.empty()) throw ValidationError("empty dataset: no samples to train on");
  const Dataset data = prepare_training_data<D>(samples, maps, d);
  auto r = train(data, t);
  return {std::move(r.model), std::move(r.loss_history), static_cast<std::size_t>(data.size()), samples.front().K};
}

/// Model K recovered from its input width.
template <class D>
int model_K(const ResidualModel& m) {
  for (int K = 1; K <= 64; ++K)
    if (feature_size<D>(K) == m.input_size()) return K;
  throw ValidationError("model input size " + std::to_string(m.input_size()) + " does not fit this domain");
}

}  // namespace loha::harness
