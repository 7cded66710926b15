#pragma once

// Start-goal problem instances, their JSON form and seeded sampling.
//
// Problem file: a JSON object {"map", "start", "goal", "K", "w", "seed"} or an
// array of such objects.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "loha/grid_map.hpp"
#include "loha/random.hpp"
#include "loha/search.hpp"
#include "loha/state_space.hpp"

namespace loha {

template <class State>
struct ProblemInstance {
  std::string map_path;
  std::string map_id;
  State start{};
  State goal{};
  int K = 4;
  double w = 1.0;
  std::uint64_t seed = 0;
  std::int64_t id = 0;
};

/// Map identifier used in sample files: the file stem of its path.
inline std::string map_id_from_path(const std::string& path) { return std::filesystem::path(path).stem().string(); }

/// Maps by id; problems and samples refer to maps through their id.
using MapSet = std::map<std::string, OccupancyGrid>;

inline const OccupancyGrid& lookup_map(const MapSet& maps, const std::string& id) {
  auto it = maps.find(id);
  if (it == maps.end()) throw ValidationError("unknown map id '" + id + "'");
  return it->second;
}

template <class D>
nlohmann::ordered_json problem_to_json(const ProblemInstance<typename D::State>& p) {
  nlohmann::ordered_json j;
  j["map"] = p.map_path;
  j["start"] = D::to_ints(p.start);
  j["goal"] = D::to_ints(p.goal);
  j["K"] = p.K;
  j["w"] = p.w;
  j["seed"] = p.seed;
  return j;
}

template <class D>
ProblemInstance<typename D::State> problem_from_json(const nlohmann::json& j, std::int64_t id = 0) {
  ProblemInstance<typename D::State> p;
  try {
    p.map_path = j.at("map").get<std::string>();
    p.start = D::from_ints(j.at("start").get<std::vector<int>>());
    p.goal = D::from_ints(j.at("goal").get<std::vector<int>>());
    p.K = j.at("K").get<int>();
    p.w = j.at("w").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed problem: ") + e.what());
  }
  if (p.K < 1) throw ValidationError("problem K must be >= 1");
  if (!(p.w >= 1.0)) throw ValidationError("problem w must be >= 1");
  p.map_id = map_id_from_path(p.map_path);
  p.id = id;
  return p;
}

// ---------------------------------------------------------------------------
// Sampling.

struct ProblemSampling {
  double min_distance = 20.0;  ///< Euclidean start-goal distance in cells
  double max_distance = 40.0;
  /// Solvability check: weighted A* with this weight and expansion limit.
  double check_weight = 1.0;
  std::uint64_t check_limit = 200000;
  int max_retries = 5000;
};

inline Cell random_free_cell(const OccupancyGrid& grid, Rng& rng) {
  for (;;) {
    const Cell c{static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width()))),
                 static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height())))};
    if (!grid.is_blocked(c.x, c.y)) return c;
  }
}

inline Cell random_state(const Grid2D& d, Rng& rng) { return random_free_cell(d.grid(), rng); }

/// Random free lattice point with a random heading, at rest.
inline CarState random_state(const Car4D& d, Rng& rng) {
  for (;;) {
    CarState s{static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d.grid().width()))),
               static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d.grid().height()))),
               static_cast<int>(rng.below(Car4D::kHeadings)), 0};
    if (d.is_free(s)) return s;
  }
}

/// Draws start/goal pairs until one lies in the distance band and the
/// solvability search solves it. Returns nullopt after max_retries draws.
template <SearchDomain D>
std::optional<ProblemInstance<typename D::State>> sample_problem(const D& domain, Rng& rng,
                                                                 const ProblemSampling& opts, int K, double w) {
  for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
    const auto start = random_state(domain, rng);
    auto goal = random_state(domain, rng);
    if constexpr (std::is_same_v<D, Car4D>) goal.theta = 0;
    const auto a = D::position(start);
    const auto b = D::position(goal);
    const double dist = std::hypot(a[0] - b[0], a[1] - b[1]);
    if (dist < opts.min_distance || dist > opts.max_distance) continue;
    const auto r = astar(domain, start, goal, SearchOptions{opts.check_weight, opts.check_limit});
    if (!r.solved()) continue;
    ProblemInstance<typename D::State> p;
    p.start = start;
    p.goal = goal;
    p.K = K;
    p.w = w;
    p.seed = rng.next();
    return p;
  }
  return std::nullopt;
}

/// `count` problems on one map, ids assigned from `first_id`.
template <SearchDomain D>
std::vector<ProblemInstance<typename D::State>> sample_problems(const D& domain, const std::string& map_path,
                                                                std::size_t count, std::uint64_t seed,
                                                                const ProblemSampling& opts, int K, double w,
                                                                std::int64_t first_id = 0) {
  Rng rng(seed);
  std::vector<ProblemInstance<typename D::State>> out;
  while (out.size() < count) {
    auto p = sample_problem(domain, rng, opts, K, w);
    if (!p) throw ValidationError("could not sample a solvable problem on " + map_path);
    p->map_path = map_path;
    p->map_id = map_id_from_path(map_path);
    p->id = first_id + static_cast<std::int64_t>(out.size());
    out.push_back(std::move(*p));
  }
  return out;
}

}  // namespace loha
