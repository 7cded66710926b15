#pragma once

// Occupancy grids: random generation and MovingAI-style text I/O.
//
//   type octile
//   height <H>
//   width <W>
//   map
//   <H rows of W chars, '.' free, '@' obstacle>
//
// Row 0 of the file is cell row y = 0.

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "loha/error.hpp"
#include "loha/random.hpp"

namespace loha {

class OccupancyGrid {
 public:
  OccupancyGrid() = default;

  OccupancyGrid(int width, int height, double resolution = 0.5, std::uint64_t seed = 0)
      : width_(width), height_(height), resolution_(resolution), seed_(seed) {
    if (width <= 0 || height <= 0) throw ValidationError("grid dimensions must be positive");
    if (!(resolution > 0.0)) throw ValidationError("grid resolution must be positive");
    cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  /// Lattice spacing metadata; the Car4D lattice uses half-cell steps.
  double resolution() const noexcept { return resolution_; }
  std::uint64_t seed() const noexcept { return seed_; }

  bool in_bounds(int cx, int cy) const noexcept {
    return cx >= 0 && cy >= 0 && cx < width_ && cy < height_;
  }

  /// Out-of-bounds cells are obstacles.
  bool is_blocked(int cx, int cy) const noexcept {
    return !in_bounds(cx, cy) || cells_[index(cx, cy)] != 0;
  }

  void set_blocked(int cx, int cy, bool blocked) {
    if (!in_bounds(cx, cy)) throw ValidationError("cell out of bounds");
    cells_[index(cx, cy)] = blocked ? 1 : 0;
  }

  std::size_t obstacle_count() const noexcept {
    std::size_t n = 0;
    for (auto c : cells_) n += c;
    return n;
  }

  const std::vector<std::uint8_t>& cells() const noexcept { return cells_; }

  /// Cell-wise equality; resolution and seed are provenance, not content.
  friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) noexcept {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.cells_ == b.cells_;
  }

 private:
  std::size_t index(int cx, int cy) const noexcept {
    return static_cast<std::size_t>(cy) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(cx);
  }

  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.5;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Each cell is independently an obstacle with probability `density`.
inline OccupancyGrid generate_random(int width, int height, double density, std::uint64_t seed) {
  if (width < 4 || height < 4) throw ValidationError("map dimensions must be at least 4x4");
  if (!(density >= 0.0 && density < 1.0)) throw ValidationError("density must lie in [0, 1)");
  OccupancyGrid grid(width, height, 0.5, seed);
  Rng rng(seed);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (rng.uniform() < density) grid.set_blocked(x, y, true);
  return grid;
}

inline void write_map(const OccupancyGrid& grid, std::ostream& out) {
  out << "type octile\n"
      << "height " << grid.height() << "\n"
      << "width " << grid.width() << "\n"
      << "map\n";
  std::string row(static_cast<std::size_t>(grid.width()), '.');
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) row[static_cast<std::size_t>(x)] = grid.is_blocked(x, y) ? '@' : '.';
    out << row << '\n';
  }
}

inline void write_map(const OccupancyGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open map for writing: " + path);
  write_map(grid, out);
  if (!out) throw IoError("failed writing map: " + path);
}

namespace detail {

inline int parse_header_int(const std::string& line, const std::string& key, std::size_t lineno) {
  std::istringstream ss(line);
  std::string k;
  long long v = 0;
  if (!(ss >> k >> v) || k != key) throw ParseError("expected '" + key + " <n>'", lineno);
  std::string rest;
  if (ss >> rest) throw ParseError("trailing data after " + key, lineno);
  if (v <= 0 || v > (1 << 20)) throw ParseError(key + " out of range", lineno);
  return static_cast<int>(v);
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

/// Accepts the MovingAI passable/blocked alphabet ('.', 'G', 'S' free;
/// '@', 'O', 'T', 'W' blocked); writes only '.' and '@'.
inline OccupancyGrid read_map(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(std::string("unexpected end of file, expected ") + what, lineno + 1);
    ++lineno;
    detail::strip_cr(line);
  };

  next("'type octile'");
  if (line.rfind("type", 0) != 0) throw ParseError("expected 'type' header", lineno);
  next("height");
  const int height = detail::parse_header_int(line, "height", lineno);
  next("width");
  const int width = detail::parse_header_int(line, "width", lineno);
  next("'map'");
  if (line != "map") throw ParseError("expected 'map'", lineno);

  OccupancyGrid grid(width, height);
  for (int y = 0; y < height; ++y) {
    next("map row");
    if (line.size() != static_cast<std::size_t>(width))
      throw ParseError("row " + std::to_string(y) + " has " + std::to_string(line.size()) +
                           " characters, expected " + std::to_string(width),
                       lineno);
    for (int x = 0; x < width; ++x) {
      switch (line[static_cast<std::size_t>(x)]) {
        case '.': case 'G': case 'S': break;
        case '@': case 'O': case 'T': case 'W': grid.set_blocked(x, y, true); break;
        default:
          throw ParseError("row " + std::to_string(y) + ": invalid character '" +
                               line.substr(static_cast<std::size_t>(x), 1) + "'",
                           lineno);
      }
    }
  }
  return grid;
}

inline OccupancyGrid read_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open map: " + path);
  try {
    return read_map(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.message(), e.line());
  }
}

}  // namespace loha
