#pragma once

// Hand localization: echo times -> board position -> 3x3 cell -> dwell
// selection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <variant>

#include <json.hpp>

#include "aeroselect/error.hpp"
#include "aeroselect/sensor_wire.hpp"

namespace aeroselect {

inline constexpr int kGridSize = 3;
inline constexpr int kCellCount = kGridSize * kGridSize;

struct HandEstimate {
  Point2 position_mm;
  double residual_mm = 0.0;  // RMS range residual
  bool in_bounds = false;
  std::uint8_t source_seq = 0;
};

namespace detail {

inline double rms_residual(const Point2& p, const SensorGeometry& g, const std::array<double, kSensorCount>& ranges) {
  double ss = 0.0;
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    const double r = distance(p, g.sensor(i)) - ranges[i];
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(kSensorCount));
}

// Linear seed from the circle differences |p-s_k|^2 - |p-s_0|^2 = d_k^2 - d_0^2.
// When the sensors are collinear the difference system only fixes the
// coordinate along the baseline; the offset from the baseline is recovered
// from the circle equations, on the side facing the board interior.
inline Point2 linear_seed(const SensorGeometry& g, const std::array<double, kSensorCount>& d) {
  const auto& s = g.positions();
  const double a1x = 2.0 * (s[1].x - s[0].x), a1y = 2.0 * (s[1].y - s[0].y);
  const double a2x = 2.0 * (s[2].x - s[0].x), a2y = 2.0 * (s[2].y - s[0].y);
  const auto sq = [](const Point2& p) { return p.x * p.x + p.y * p.y; };
  const double b1 = d[0] * d[0] - d[1] * d[1] + sq(s[1]) - sq(s[0]);
  const double b2 = d[0] * d[0] - d[2] * d[2] + sq(s[2]) - sq(s[0]);

  const double det = a1x * a2y - a1y * a2x;
  const double scale = std::hypot(a1x, a1y) * std::hypot(a2x, a2y);
  if (std::abs(det) > 1e-9 * scale) {
    return {(b1 * a2y - a1y * b2) / det, (a1x * b2 - b1 * a2x) / det};
  }

  const double l1 = distance(s[1], s[0]);
  const double l2 = distance(s[2], s[0]);
  const std::size_t k = l2 >= l1 ? 2 : 1;
  const double len = std::max(l1, l2);
  const double ux = (s[k].x - s[0].x) / len, uy = (s[k].y - s[0].y) / len;
  double nx = -uy, ny = ux;
  const Point2 c = g.board_center();
  if ((c.x - s[0].x) * nx + (c.y - s[0].y) * ny < 0.0) {
    nx = -nx;
    ny = -ny;
  }

  const double t = (d[0] * d[0] - d[k] * d[k] + len * len) / (2.0 * len);
  double h2 = 0.0;
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    const double ti = (s[i].x - s[0].x) * ux + (s[i].y - s[0].y) * uy;
    h2 += d[i] * d[i] - (t - ti) * (t - ti);
  }
  const double h = std::sqrt(std::max(0.0, h2 / static_cast<double>(kSensorCount)));
  return {s[0].x + t * ux + h * nx, s[0].y + t * uy + h * ny};
}

// One Gauss-Newton step on sum_i (|p - s_i| - d_i)^2. A tiny ridge keeps the
// step finite on the sensor baseline, where the normal matrix loses rank.
inline Point2 gauss_newton_step(const Point2& p, const SensorGeometry& g, const std::array<double, kSensorCount>& d) {
  double nxx = 0.0, nxy = 0.0, nyy = 0.0, gx = 0.0, gy = 0.0;
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    const double rho = distance(p, g.sensor(i));
    if (rho < 1e-12) continue;
    const double jx = (p.x - g.sensor(i).x) / rho;
    const double jy = (p.y - g.sensor(i).y) / rho;
    const double r = rho - d[i];
    nxx += jx * jx;
    nxy += jx * jy;
    nyy += jy * jy;
    gx += jx * r;
    gy += jy * r;
  }
  const double ridge = 1e-12 * (nxx + nyy);
  nxx += ridge;
  nyy += ridge;
  const double det = nxx * nyy - nxy * nxy;
  if (!(det > 0.0)) return p;
  const double dx = -(nyy * gx - nxy * gy) / det;
  const double dy = -(nxx * gy - nxy * gx) / det;
  return {p.x + dx, p.y + dy};
}

}  // namespace detail

// Trilateration from three ranges in millimeters.
inline HandEstimate trilaterate(const std::array<double, kSensorCount>& ranges_mm, const SensorGeometry& geometry,
                                std::uint8_t source_seq = 0) {
  const Point2 seed = detail::linear_seed(geometry, ranges_mm);
  const double seed_res = detail::rms_residual(seed, geometry, ranges_mm);
  const Point2 refined = detail::gauss_newton_step(seed, geometry, ranges_mm);
  const double refined_res = detail::rms_residual(refined, geometry, ranges_mm);

  HandEstimate est;
  // Keep the seed if the step made things worse (far from the baseline this
  // never happens at realistic noise).
  const bool use_refined = std::isfinite(refined_res) && refined_res <= seed_res;
  est.position_mm = use_refined ? refined : seed;
  est.residual_mm = use_refined ? refined_res : seed_res;
  est.in_bounds = geometry.contains(est.position_mm);
  est.source_seq = source_seq;
  return est;
}

inline HandEstimate ranges_to_position(const RangeFrame& frame, const SensorGeometry& geometry) {
  std::array<double, kSensorCount> d{};
  for (std::size_t i = 0; i < kSensorCount; ++i) d[i] = geometry.echo_to_range_mm(frame.echo_us[i]);
  return trilaterate(d, geometry, frame.seq);
}

struct GridCell {
  int row = 0;
  int col = 0;

  int index() const { return row * kGridSize + col; }
  static GridCell from_index(int index) { return {index / kGridSize, index % kGridSize}; }

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

inline constexpr double kDefaultRejectResidualMm = 15.0;

// Cell index = row*3 + col. The far edges x = W and y = H fall in the last
// column/row so that the board is partitioned.
inline std::optional<GridCell> position_to_cell(const HandEstimate& estimate, const SensorGeometry& geometry,
                                                double reject_residual_mm = kDefaultRejectResidualMm) {
  if (!estimate.in_bounds || !(estimate.residual_mm <= reject_residual_mm)) return std::nullopt;
  const auto bucket = [](double v, double extent) {
    return std::clamp(static_cast<int>(std::floor(kGridSize * v / extent)), 0, kGridSize - 1);
  };
  return GridCell{bucket(estimate.position_mm.y, geometry.board_height_mm()),
                  bucket(estimate.position_mm.x, geometry.board_width_mm())};
}

struct SelectionEvent {
  GridCell cell;
  std::int64_t committed_at_ms = 0;
  std::int64_t dwell_ms = 0;

  friend bool operator==(const SelectionEvent&, const SelectionEvent&) = default;
};

struct DwellConfig {
  std::int64_t dwell_ms = 800;
  std::int64_t flicker_ms = 120;
  std::int64_t cooldown_ms = 500;
};

struct DwellIdle {
  friend bool operator==(const DwellIdle&, const DwellIdle&) = default;
};

struct DwellHovering {
  GridCell cell;
  std::int64_t since_ms = 0;
  // Set while the hand is out of the cell; cleared when it comes back.
  std::optional<std::int64_t> absent_since_ms;

  friend bool operator==(const DwellHovering&, const DwellHovering&) = default;
};

struct DwellCooldown {
  std::int64_t until_ms = 0;

  friend bool operator==(const DwellCooldown&, const DwellCooldown&) = default;
};

struct DwellState {
  std::variant<DwellIdle, DwellHovering, DwellCooldown> mode;
  std::optional<std::int64_t> last_now_ms;
};

struct DwellStep {
  DwellState state;
  std::optional<SelectionEvent> event;
};

// Idle --cell--> Hovering --same cell for dwell_ms--> Cooldown --cooldown_ms--> Idle.
// Absences (no cell) up to flicker_ms keep the hover alive; a different cell
// restarts it.
inline DwellStep dwell_step(const DwellState& state, std::optional<GridCell> cell, std::int64_t now_ms,
                            const DwellConfig& config = {}) {
  if (state.last_now_ms && now_ms < *state.last_now_ms) {
    throw Error(ErrorCode::ClockRegression,
                "now_ms " + std::to_string(now_ms) + " < " + std::to_string(*state.last_now_ms));
  }
  DwellStep out{state, std::nullopt};
  out.state.last_now_ms = now_ms;
  auto& mode = out.state.mode;

  if (auto* cd = std::get_if<DwellCooldown>(&mode)) {
    if (now_ms < cd->until_ms) return out;
    mode = DwellIdle{};
  }

  if (std::holds_alternative<DwellIdle>(mode)) {
    if (!cell) return out;
    mode = DwellHovering{*cell, now_ms, std::nullopt};
  } else {
    auto& hover = std::get<DwellHovering>(mode);
    if (!cell) {
      if (!hover.absent_since_ms) hover.absent_since_ms = now_ms;
      if (now_ms - *hover.absent_since_ms > config.flicker_ms) mode = DwellIdle{};
      return out;
    }
    if (*cell != hover.cell ||
        (hover.absent_since_ms && now_ms - *hover.absent_since_ms > config.flicker_ms)) {
      mode = DwellHovering{*cell, now_ms, std::nullopt};
    } else {
      hover.absent_since_ms.reset();
    }
  }

  const auto& hover = std::get<DwellHovering>(mode);
  const std::int64_t held = now_ms - hover.since_ms;
  if (held >= config.dwell_ms) {
    out.event = SelectionEvent{hover.cell, now_ms, held};
    mode = DwellCooldown{now_ms + config.cooldown_ms};
  }
  return out;
}

// Stateful wrapper for one input stream.
class DwellSelector {
 public:
  explicit DwellSelector(DwellConfig config = {}) : config_(config) {}

  std::optional<SelectionEvent> step(std::optional<GridCell> cell, std::int64_t now_ms) {
    auto next = dwell_step(state_, cell, now_ms, config_);
    state_ = std::move(next.state);
    return next.event;
  }

  // Fraction of the dwell completed, for the UI progress ring.
  double progress(std::int64_t now_ms) const {
    const auto* hover = std::get_if<DwellHovering>(&state_.mode);
    if (!hover || config_.dwell_ms <= 0) return 0.0;
    return std::clamp(static_cast<double>(now_ms - hover->since_ms) / static_cast<double>(config_.dwell_ms), 0.0, 1.0);
  }

  std::optional<GridCell> hovered_cell() const {
    if (const auto* hover = std::get_if<DwellHovering>(&state_.mode)) return hover->cell;
    return std::nullopt;
  }

  const DwellState& state() const { return state_; }
  const DwellConfig& config() const { return config_; }

 private:
  DwellConfig config_;
  DwellState state_;
};

inline void to_json(nlohmann::json& j, const GridCell& c) {
  j = nlohmann::json{{"row", c.row}, {"col", c.col}, {"index", c.index()}};
}

inline void to_json(nlohmann::json& j, const HandEstimate& e) {
  j = nlohmann::json{{"x_mm", e.position_mm.x},
                     {"y_mm", e.position_mm.y},
                     {"residual_mm", e.residual_mm},
                     {"in_bounds", e.in_bounds},
                     {"source_seq", e.source_seq}};
}

inline void to_json(nlohmann::json& j, const SelectionEvent& e) {
  j = nlohmann::json{{"cell", e.cell}, {"committed_at_ms", e.committed_at_ms}, {"dwell_ms", e.dwell_ms}};
}

inline SelectionEvent selection_from_json(const nlohmann::json& j) {
  return {GridCell::from_index(j.at("cell").at("index").get<int>()), j.at("committed_at_ms").get<std::int64_t>(),
          j.at("dwell_ms").get<std::int64_t>()};
}

}  // namespace aeroselect
