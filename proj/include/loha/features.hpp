#pragma once

// Local-region feature vectors.
//
// Layout for window radius K (side n = 2K + 1, cells row-major, dy outer):
//   [0, n^2)          occupancy, 1 = obstacle (out of bounds counts)
//   [n^2, 2 n^2)      (h_g(cell centre) - h_g(s)) / K
//   then              heading one-hot (12) and velocity one-hot (5), Car4D only
//   last              bias, constant 1

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <vector>

#include <Eigen/Dense>

#include "loha/state_space.hpp"

namespace loha {

template <class D>
struct FeatureTraits;

template <>
struct FeatureTraits<Grid2D> {
  static constexpr int extras = 0;
  static std::array<double, 2> cell_center(Cell c) { return {static_cast<double>(c.x), static_cast<double>(c.y)}; }
  static double heuristic_at(const std::array<double, 2>& p, const Cell& goal) {
    return std::abs(p[0] - goal.x) + std::abs(p[1] - goal.y);
  }
  static void write_extras(const Cell&, double*) {}
  static void transform_extras(const double*, double*, int) {}
};

template <>
struct FeatureTraits<Car4D> {
  static constexpr int extras = Car4D::kHeadings + Car4D::kVelocities;
  static std::array<double, 2> cell_center(Cell c) { return {c.x + 0.5, c.y + 0.5}; }
  static double heuristic_at(const std::array<double, 2>& p, const CarState& goal) {
    const auto g = Car4D::position(goal);
    return std::hypot(p[0] - g[0], p[1] - g[1]) * Car4D::kHeuristicScale;
  }
  static void write_extras(const CarState& s, double* out) {
    out[s.theta] = 1.0;
    out[Car4D::kHeadings + (s.v - Car4D::kMinV)] = 1.0;
  }
  // Heading one-hot under symmetry t (see transform_features).
  static void transform_extras(const double* in, double* out, int t) {
    for (int th = 0; th < Car4D::kHeadings; ++th) {
      int mapped = t & 4 ? (Car4D::kHeadings - th) % Car4D::kHeadings : th;
      mapped = (mapped + 3 * (t & 3)) % Car4D::kHeadings;
      out[mapped] = in[th];
    }
    for (int v = 0; v < Car4D::kVelocities; ++v) out[Car4D::kHeadings + v] = in[Car4D::kHeadings + v];
  }
};

template <class D>
constexpr int feature_size(int K) {
  const int n = 2 * K + 1;
  return 2 * n * n + FeatureTraits<D>::extras + 1;
}

inline int feature_size(DomainKind kind, int K) {
  return kind == DomainKind::Grid2D ? feature_size<Grid2D>(K) : feature_size<Car4D>(K);
}

/// Writes the features of `s` into `out` (length feature_size<D>(K)).
template <class D>
void featurize_into(const D& domain, const typename D::State& s, const typename D::State& goal, int K, double* out) {
  using Traits = FeatureTraits<D>;
  const int n = 2 * K + 1;
  const int cells = n * n;
  const Cell c = D::cell_of(s);
  const double h_s = domain.heuristic(s, goal);
  const double inv_k = 1.0 / K;
  const auto& grid = domain.grid();
  for (int dy = -K, i = 0; dy <= K; ++dy) {
    for (int dx = -K; dx <= K; ++dx, ++i) {
      const Cell q{c.x + dx, c.y + dy};
      out[i] = grid.is_blocked(q.x, q.y) ? 1.0 : 0.0;
      out[cells + i] = (Traits::heuristic_at(Traits::cell_center(q), goal) - h_s) * inv_k;
    }
  }
  double* extras = out + 2 * cells;
  std::fill(extras, extras + Traits::extras, 0.0);
  Traits::write_extras(s, extras);
  out[2 * cells + Traits::extras] = 1.0;
}

/// Feature vector of the same situation under one of the 8 symmetries of the
/// square: t & 3 quarter turns counter-clockwise, after a mirror in the x
/// axis when t & 4. Exact for Grid2D; for Car4D the half-cell offset of the
/// state inside its cell is not carried along, so it is an approximation
/// used only to augment training data.
template <class D>
void transform_features(const double* in, double* out, int K, int t) {
  const int n = 2 * K + 1;
  const int cells = n * n;
  for (int dy = -K, i = 0; dy <= K; ++dy) {
    for (int dx = -K; dx <= K; ++dx, ++i) {
      int x = dx, y = t & 4 ? -dy : dy;
      for (int r = 0; r < (t & 3); ++r) {
        const int nx = -y;
        y = x;
        x = nx;
      }
      const int j = (y + K) * n + (x + K);
      out[j] = in[i];
      out[cells + j] = in[cells + i];
    }
  }
  FeatureTraits<D>::transform_extras(in + 2 * cells, out + 2 * cells, t);
  out[2 * cells + FeatureTraits<D>::extras] = in[2 * cells + FeatureTraits<D>::extras];
}

template <class D>
Eigen::VectorXd featurize(const D& domain, const typename D::State& s, const typename D::State& goal, int K) {
  Eigen::VectorXd x(feature_size<D>(K));
  featurize_into(domain, s, goal, K, x.data());
  return x;
}

}  // namespace loha
