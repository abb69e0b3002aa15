#pragma once

// Scripted hand paths for replays and demos.

#include <cstdint>
#include <span>
#include <vector>

#include "aeroselect/game_core.hpp"
#include "aeroselect/localization.hpp"
#include "aeroselect/sensor_wire.hpp"

namespace aeroselect {

inline Point2 cell_center(const GridCell& cell, const SensorGeometry& g) {
  return {(cell.col + 0.5) * g.board_width_mm() / kGridSize, (cell.row + 0.5) * g.board_height_mm() / kGridSize};
}

// Holds the hand over each cell for hover_ms, moving between cells in
// transit_ms.
inline Trajectory hover_trajectory(const SensorGeometry& g, std::span<const int> cells, double hover_ms = 1000.0,
                                   double transit_ms = 200.0, double start_ms = 0.0) {
  std::vector<TrajectoryPoint> pts;
  double t = start_ms;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Point2 p = cell_center(GridCell::from_index(cells[i]), g);
    if (i > 0) t += transit_ms;
    pts.push_back({t, p});
    t += hover_ms;
    pts.push_back({t, p});
  }
  return Trajectory(std::move(pts));
}

// The cells holding the round's targets, in presentation order.
inline std::vector<int> target_cells(const RoundLayout& layout) {
  std::vector<int> cells;
  for (int ch : layout.target_order) cells.push_back(*layout.cell_of(ch));
  return cells;
}

}  // namespace aeroselect
