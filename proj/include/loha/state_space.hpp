#pragma once

// State spaces over an occupancy grid.
//
// A domain exposes:
//   State                                   lattice state, exact identity
//   successors(s, out, stats)               filtered unit-cost transitions
//   heuristic(s, goal)                      global heuristic h_g
//   is_goal(s, goal)
//   region_distance(a, b)                   Chebyshev distance in cells
//   key(s)                                  64-bit identity for hashing
//   to_ints(s) / from_ints(v)               serialization

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdlib>
#include <string_view>
#include <vector>

#include "loha/error.hpp"
#include "loha/grid_map.hpp"

namespace loha {

using Cost = std::int64_t;

enum class DomainKind { Grid2D, Car4D };

inline std::string_view to_string(DomainKind k) { return k == DomainKind::Grid2D ? "grid2d" : "car4d"; }

inline DomainKind parse_domain(std::string_view s) {
  if (s == "grid2d") return DomainKind::Grid2D;
  if (s == "car4d") return DomainKind::Car4D;
  throw ValidationError("unknown domain '" + std::string(s) + "' (expected grid2d or car4d)");
}

template <class State>
struct Transition {
  State successor;
  Cost cost = 1;
};

/// Work counters shared by every search over a domain.
struct SearchStats {
  std::uint64_t collision_checks = 0;
  std::uint64_t generated = 0;
};

template <class D>
concept SearchDomain = requires(const D& d, const typename D::State& s, std::vector<Transition<typename D::State>>& out,
                                SearchStats& stats) {
  typename D::State;
  { d.successors(s, out, stats) } -> std::same_as<void>;
  { d.heuristic(s, s) } -> std::convertible_to<double>;
  { d.is_goal(s, s) } -> std::convertible_to<bool>;
  { d.region_distance(s, s) } -> std::convertible_to<double>;
  { d.key(s) } -> std::convertible_to<std::uint64_t>;
  { d.is_free(s) } -> std::convertible_to<bool>;
};

/// Local region predicates. `escaped` is the backtracking completion test.
inline bool in_lrb(double region_distance, int K) noexcept { return region_distance == static_cast<double>(K); }
inline bool escaped(double region_distance, int K) noexcept { return region_distance > static_cast<double>(K); }

// ---------------------------------------------------------------------------
// Grid2D: 4-connected unit-cost grid, Manhattan heuristic.

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

class Grid2D {
 public:
  using State = Cell;
  static constexpr DomainKind kind = DomainKind::Grid2D;
  static constexpr std::size_t state_arity = 2;

  explicit Grid2D(const OccupancyGrid& grid) : grid_(&grid) {}

  const OccupancyGrid& grid() const noexcept { return *grid_; }

  bool is_free(const State& s) const noexcept { return !grid_->is_blocked(s.x, s.y); }

  void successors(const State& s, std::vector<Transition<State>>& out, SearchStats& stats) const {
    out.clear();
    static constexpr std::array<std::array<int, 2>, 4> moves{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (const auto& m : moves) {
      const State n{s.x + m[0], s.y + m[1]};
      ++stats.collision_checks;
      if (grid_->is_blocked(n.x, n.y)) continue;
      out.push_back({n, 1});
    }
    stats.generated += out.size();
  }

  double heuristic(const State& s, const State& goal) const noexcept {
    return static_cast<double>(std::abs(s.x - goal.x) + std::abs(s.y - goal.y));
  }

  bool is_goal(const State& s, const State& goal) const noexcept { return s == goal; }

  double region_distance(const State& a, const State& b) const noexcept {
    return static_cast<double>(std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)));
  }

  std::uint64_t key(const State& s) const noexcept {
    return static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.y)) << 32 | static_cast<std::uint32_t>(s.x);
  }

  /// Cell containing the state and its position in world units (cell = 1 unit).
  static Cell cell_of(const State& s) noexcept { return s; }
  static std::array<double, 2> position(const State& s) noexcept {
    return {static_cast<double>(s.x), static_cast<double>(s.y)};
  }

  static std::vector<int> to_ints(const State& s) { return {s.x, s.y}; }
  static State from_ints(const std::vector<int>& v) {
    if (v.size() != 2) throw ValidationError("grid2d state needs 2 integers");
    return {v[0], v[1]};
  }

 private:
  const OccupancyGrid* grid_;
};

// ---------------------------------------------------------------------------
// Car4D: (x, y, heading, velocity) lattice.
//
// Positions are half-cell indices (world x = 0.5 * xi, one cell = one world
// unit), heading is a multiple of 30 degrees, velocity is in {-1,...,3}
// half-cells per step. Each action picks dv in {-1,0,1} and a steering change
// in {-60,-30,0,30,60} degrees; the car turns first, then translates v' half
// cells along the new heading with the endpoint snapped to the lattice. A
// stationary car (v' == 0) keeps its position and turns at most 30 degrees.

struct CarState {
  int xi = 0;
  int yi = 0;
  int theta = 0;
  int v = 0;
  friend bool operator==(const CarState&, const CarState&) = default;
};

class Car4D {
 public:
  using State = CarState;
  static constexpr DomainKind kind = DomainKind::Car4D;
  static constexpr std::size_t state_arity = 4;
  static constexpr int kHeadings = 12;
  static constexpr int kMinV = -1;
  static constexpr int kMaxV = 3;
  static constexpr int kVelocities = kMaxV - kMinV + 1;
  static constexpr double kLatticeStep = 0.5;  // cells per index
  static constexpr double kHeuristicScale = 1.0 / 3.0;

  explicit Car4D(const OccupancyGrid& grid) : grid_(&grid) {}

  const OccupancyGrid& grid() const noexcept { return *grid_; }

  static Cell cell_of(const State& s) noexcept { return {s.xi >> 1, s.yi >> 1}; }
  static std::array<double, 2> position(const State& s) noexcept {
    return {kLatticeStep * s.xi, kLatticeStep * s.yi};
  }

  bool valid(const State& s) const noexcept {
    return s.theta >= 0 && s.theta < kHeadings && s.v >= kMinV && s.v <= kMaxV;
  }

  bool is_free(const State& s) const noexcept {
    if (!valid(s) || s.xi < 0 || s.yi < 0) return false;
    const Cell c = cell_of(s);
    return !grid_->is_blocked(c.x, c.y);
  }

  void successors(const State& s, std::vector<Transition<State>>& out, SearchStats& stats) const {
    out.clear();
    for (int dv = -1; dv <= 1; ++dv) {
      const int v = std::clamp(s.v + dv, kMinV, kMaxV);
      for (int steer = -2; steer <= 2; ++steer) {
        State n;
        n.v = v;
        if (v == 0) {
          n.xi = s.xi;
          n.yi = s.yi;
          n.theta = std::abs(steer) <= 1 ? wrap_heading(s.theta + steer) : s.theta;
        } else {
          n.theta = wrap_heading(s.theta + steer);
          const auto& d = direction(n.theta);
          n.xi = s.xi + static_cast<int>(std::lround(v * d[0]));
          n.yi = s.yi + static_cast<int>(std::lround(v * d[1]));
          if (!segment_free(s, n, stats)) continue;
        }
        if (std::find_if(out.begin(), out.end(), [&](const auto& t) { return t.successor == n; }) != out.end())
          continue;
        out.push_back({n, 1});
      }
    }
    stats.generated += out.size();
  }

  /// Euclidean distance in world units divided by the top speed (3).
  double heuristic(const State& s, const State& goal) const noexcept {
    const double dx = kLatticeStep * (s.xi - goal.xi);
    const double dy = kLatticeStep * (s.yi - goal.yi);
    return std::sqrt(dx * dx + dy * dy) * kHeuristicScale;
  }

  /// Goal test matches position only.
  bool is_goal(const State& s, const State& goal) const noexcept { return s.xi == goal.xi && s.yi == goal.yi; }

  double region_distance(const State& a, const State& b) const noexcept {
    return kLatticeStep * std::max(std::abs(a.xi - b.xi), std::abs(a.yi - b.yi));
  }

  std::uint64_t key(const State& s) const noexcept {
    const auto pos = static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.yi)) << 32 |
                     static_cast<std::uint32_t>(s.xi);
    return pos * (kHeadings * kVelocities) + static_cast<std::uint64_t>(s.theta * kVelocities + (s.v - kMinV));
  }

  static std::vector<int> to_ints(const State& s) { return {s.xi, s.yi, s.theta, s.v}; }
  static State from_ints(const std::vector<int>& v) {
    if (v.size() != 4) throw ValidationError("car4d state needs 4 integers");
    return {v[0], v[1], v[2], v[3]};
  }

  /// Unit heading vector; 30-degree multiples with exact 0.5 components.
  static const std::array<double, 2>& direction(int theta) noexcept {
    static constexpr double c = 0.86602540378443864676;  // sqrt(3)/2
    static constexpr std::array<std::array<double, 2>, kHeadings> table{{
        {1.0, 0.0}, {c, 0.5}, {0.5, c}, {0.0, 1.0}, {-0.5, c}, {-c, 0.5},
        {-1.0, 0.0}, {-c, -0.5}, {-0.5, -c}, {0.0, -1.0}, {0.5, -c}, {c, -0.5},
    }};
    return table[static_cast<std::size_t>(theta)];
  }

  static int wrap_heading(int theta) noexcept { return ((theta % kHeadings) + kHeadings) % kHeadings; }

 private:
  // Samples the straight segment every half cell, endpoint included.
  bool segment_free(const State& from, const State& to, SearchStats& stats) const {
    const double x0 = kLatticeStep * from.xi, y0 = kLatticeStep * from.yi;
    const double x1 = kLatticeStep * to.xi, y1 = kLatticeStep * to.yi;
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int n = std::max(1, static_cast<int>(std::ceil(len / 0.5 - 1e-9)));
    for (int i = 1; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      const double x = x0 + t * (x1 - x0);
      const double y = y0 + t * (y1 - y0);
      ++stats.collision_checks;
      if (grid_->is_blocked(static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y)))) return false;
    }
    return true;
  }

  const OccupancyGrid* grid_;
};

}  // namespace loha
