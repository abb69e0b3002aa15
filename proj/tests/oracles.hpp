#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the code paths it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "aeroselect/sensor_wire.hpp"

namespace oracle {

// Exact ranges from a known point.
inline std::array<double, 3> ranges_from(const aeroselect::SensorGeometry& g, aeroselect::Point2 p) {
  std::array<double, 3> d{};
  for (std::size_t i = 0; i < 3; ++i) d[i] = std::hypot(p.x - g.sensor(i).x, p.y - g.sensor(i).y);
  return d;
}

// Minimizes sum_i (|p - s_i| - d_i)^2 by exhaustive search over the board on
// a square lattice.
inline aeroselect::Point2 grid_minimizer(const aeroselect::SensorGeometry& g, const std::array<double, 3>& d,
                                         double step = 0.5) {
  aeroselect::Point2 best{};
  double best_cost = std::numeric_limits<double>::infinity();
  const int nx = static_cast<int>(std::round(g.board_width_mm() / step));
  const int ny = static_cast<int>(std::round(g.board_height_mm() / step));
  for (int ix = 0; ix <= nx; ++ix) {
    const double x = ix * step;
    for (int iy = 0; iy <= ny; ++iy) {
      const double y = iy * step;
      double cost = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        const double r = std::hypot(x - g.sensor(i).x, y - g.sensor(i).y) - d[i];
        cost += r * r;
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = {x, y};
      }
    }
  }
  return best;
}

// Two-sided exact rank-sum p by listing every way to assign n_a of the pooled
// ranks to sample a. Requires no ties.
inline double enumerate_rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  const auto rank_of = [&](double v) {
    return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin() + 1);
  };
  const std::size_t na = a.size(), n = pooled.size();
  double observed = 0.0;
  for (double v : a) observed += rank_of(v);

  // Walk all n-bit masks with exactly na bits set.
  std::uint64_t le = 0, ge = 0, total = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != na) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (mask & (std::uint64_t{1} << r)) sum += static_cast<double>(r + 1);
    }
    ++total;
    if (sum <= observed) ++le;
    if (sum >= observed) ++ge;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

}  // namespace oracle
