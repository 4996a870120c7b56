#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mea {

inline constexpr int kGridSide = 64;
inline constexpr int kChannels = kGridSide * kGridSide;
inline constexpr double kDefaultSampleRateHz = 20000.0;

struct GridCoord {
  int row = 0;
  int col = 0;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

inline bool on_grid(int row, int col) noexcept {
  return row >= 0 && row < kGridSide && col >= 0 && col < kGridSide;
}

inline GridCoord channel_to_grid(int channel) {
  if (channel < 0 || channel >= kChannels)
    throw std::out_of_range("channel index " + std::to_string(channel) + " outside [0, 4096)");
  return {channel / kGridSide, channel % kGridSide};
}

inline int grid_to_channel(GridCoord g) {
  if (!on_grid(g.row, g.col))
    throw std::out_of_range("grid coordinate (" + std::to_string(g.row) + ", " +
                            std::to_string(g.col) + ") outside the 64x64 array");
  return g.row * kGridSide + g.col;
}

inline int chebyshev_distance(GridCoord a, GridCoord b) noexcept {
  const int dr = a.row > b.row ? a.row - b.row : b.row - a.row;
  const int dc = a.col > b.col ? a.col - b.col : b.col - a.col;
  return dr > dc ? dr : dc;
}

}  // namespace mea
