#pragma once

// Serial frame format for the three-sensor ultrasound array, plus a software
// device that produces frames from a synthetic hand trajectory.
//
// Frame layout (11 bytes):
//
//   0   1   2    3..8                 9      10
//   AA  55  seq  echo[0..2] u16 LE    xor    0A
//
// The checksum is the XOR of bytes 2..8 (seq and the six echo bytes).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aeroselect/error.hpp"

namespace aeroselect {

inline constexpr std::size_t kFrameSize = 11;
inline constexpr std::uint8_t kSync0 = 0xAA;
inline constexpr std::uint8_t kSync1 = 0x55;
inline constexpr std::uint8_t kTerminator = 0x0A;
inline constexpr std::uint16_t kMaxEchoUs = 60000;
inline constexpr std::size_t kSensorCount = 3;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// One sample from the array. Sensor order is fixed: left, center, right.
// rx_time_ms is host-side and does not travel on the wire.
struct RangeFrame {
  std::uint8_t seq = 0;
  std::array<std::uint16_t, kSensorCount> echo_us{};
  std::int64_t rx_time_ms = 0;

  friend bool operator==(const RangeFrame&, const RangeFrame&) = default;
};

inline bool echoes_in_band(const RangeFrame& frame) {
  return std::all_of(frame.echo_us.begin(), frame.echo_us.end(),
                     [](std::uint16_t e) { return e <= kMaxEchoUs; });
}

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

inline std::uint8_t frame_checksum(std::span<const std::uint8_t> payload) {
  std::uint8_t sum = 0;
  for (std::uint8_t b : payload) sum ^= b;
  return sum;
}

inline FrameBytes encode_frame(const RangeFrame& frame) {
  FrameBytes out{};
  out[0] = kSync0;
  out[1] = kSync1;
  out[2] = frame.seq;
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    out[3 + 2 * i] = static_cast<std::uint8_t>(frame.echo_us[i] & 0xFF);
    out[4 + 2 * i] = static_cast<std::uint8_t>(frame.echo_us[i] >> 8);
  }
  out[9] = frame_checksum(std::span<const std::uint8_t>(out).subspan(2, 7));
  out[10] = kTerminator;
  return out;
}

enum class ParseStatus {
  Ok,
  ChecksumMismatch,  // checksum or terminator wrong; frame dropped
  OutOfRangeEcho,    // well-formed frame with an echo above kMaxEchoUs
  Incomplete,        // need more bytes
};

struct ParseResult {
  ParseStatus status = ParseStatus::Incomplete;
  std::optional<RangeFrame> frame;
  // Bytes the caller may discard from the front of its buffer.
  std::size_t consumed = 0;
};

// Scans for the sync word and decodes the first frame found. Garbage before
// the sync word is counted in `consumed`. On an integrity failure only the
// first sync byte is consumed so that a sync word hidden inside a bogus
// window is still found on the next call.
inline ParseResult parse_frame(std::span<const std::uint8_t> bytes, std::int64_t rx_time_ms = 0) {
  std::size_t start = 0;
  while (start + 1 < bytes.size() && !(bytes[start] == kSync0 && bytes[start + 1] == kSync1)) {
    ++start;
  }
  if (start + 1 >= bytes.size()) {
    // Keep a trailing 0xAA, it may be the first half of a sync word.
    std::size_t keep = (!bytes.empty() && bytes.back() == kSync0) ? 1 : 0;
    return {ParseStatus::Incomplete, std::nullopt, bytes.size() - keep};
  }
  if (bytes.size() - start < kFrameSize) {
    return {ParseStatus::Incomplete, std::nullopt, start};
  }

  auto window = bytes.subspan(start, kFrameSize);
  if (window[10] != kTerminator || frame_checksum(window.subspan(2, 7)) != window[9]) {
    return {ParseStatus::ChecksumMismatch, std::nullopt, start + 1};
  }

  RangeFrame frame;
  frame.seq = window[2];
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    frame.echo_us[i] = static_cast<std::uint16_t>(window[3 + 2 * i] | (window[4 + 2 * i] << 8));
  }
  frame.rx_time_ms = rx_time_ms;
  if (!echoes_in_band(frame)) {
    return {ParseStatus::OutOfRangeEcho, std::nullopt, start + kFrameSize};
  }
  return {ParseStatus::Ok, frame, start + kFrameSize};
}

struct StreamStats {
  std::uint64_t frames = 0;
  std::uint64_t checksum_errors = 0;
  std::uint64_t range_errors = 0;
  std::uint64_t garbage_bytes = 0;
  std::uint64_t seq_gaps = 0;
};

// Incremental reader for one byte stream. Tracks sequence gaps, which are
// reported but never fatal.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

  std::optional<RangeFrame> next(std::int64_t rx_time_ms = 0) {
    while (true) {
      ParseResult r = parse_frame(buffer_, rx_time_ms);
      switch (r.status) {
        case ParseStatus::Incomplete:
          stats_.garbage_bytes += r.consumed;
          erase_front(r.consumed);
          return std::nullopt;
        case ParseStatus::ChecksumMismatch:
          ++stats_.checksum_errors;
          stats_.garbage_bytes += r.consumed;
          erase_front(r.consumed);
          continue;
        case ParseStatus::OutOfRangeEcho:
          ++stats_.range_errors;
          stats_.garbage_bytes += r.consumed - kFrameSize;
          erase_front(r.consumed);
          continue;
        case ParseStatus::Ok:
          break;
      }
      stats_.garbage_bytes += r.consumed - kFrameSize;
      erase_front(r.consumed);
      if (last_seq_ && static_cast<std::uint8_t>(*last_seq_ + 1) != r.frame->seq) ++stats_.seq_gaps;
      last_seq_ = r.frame->seq;
      ++stats_.frames;
      return r.frame;
    }
  }

  const StreamStats& stats() const { return stats_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  void erase_front(std::size_t n) { buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(n)); }

  std::vector<std::uint8_t> buffer_;
  std::optional<std::uint8_t> last_seq_;
  StreamStats stats_;
};

// Board frame: origin at the top-left corner, x right, y down, millimeters.
class SensorGeometry {
 public:
  static constexpr double kDefaultSpeedOfSound = 0.343;  // mm/us at 20 C

  SensorGeometry() : SensorGeometry(default_geometry()) {}

  SensorGeometry(std::array<Point2, kSensorCount> positions, double board_width_mm, double board_height_mm,
                 double speed_of_sound_mm_per_us = kDefaultSpeedOfSound)
      : positions_(positions),
        width_(board_width_mm),
        height_(board_height_mm),
        speed_(speed_of_sound_mm_per_us) {
    validate();
  }

  static SensorGeometry default_geometry(double width = 300.0, double height = 300.0) {
    return SensorGeometry({Point2{0.0, 0.0}, Point2{width / 2.0, 0.0}, Point2{width, 0.0}}, width, height);
  }

  const std::array<Point2, kSensorCount>& positions() const { return positions_; }
  const Point2& sensor(std::size_t i) const { return positions_.at(i); }
  double board_width_mm() const { return width_; }
  double board_height_mm() const { return height_; }
  double speed_of_sound_mm_per_us() const { return speed_; }
  Point2 board_center() const { return {width_ / 2.0, height_ / 2.0}; }

  bool contains(const Point2& p) const { return p.x >= 0.0 && p.x <= width_ && p.y >= 0.0 && p.y <= height_; }

  double echo_to_range_mm(double echo_us) const { return speed_ * echo_us / 2.0; }
  double range_to_echo_us(double range_mm) const { return 2.0 * range_mm / speed_; }

 private:
  // Condition-number ceiling for the Gauss-Newton normal matrix at the board
  // center.
  static constexpr double kMaxCondition = 1e6;

  void validate() const {
    if (!(width_ > 0.0) || !(height_ > 0.0) || !std::isfinite(width_) || !std::isfinite(height_)) {
      throw Error(ErrorCode::InvalidGeometry, "board dimensions must be positive");
    }
    if (!(speed_ > 0.0) || !std::isfinite(speed_)) {
      throw Error(ErrorCode::InvalidGeometry, "speed of sound must be positive");
    }
    for (std::size_t i = 0; i < kSensorCount; ++i) {
      for (std::size_t j = i + 1; j < kSensorCount; ++j) {
        if (positions_[i] == positions_[j]) throw Error(ErrorCode::InvalidGeometry, "sensor positions coincide");
      }
    }
    const Point2 c = board_center();
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& s : positions_) {
      const double d = distance(c, s);
      if (d == 0.0) continue;
      const double ux = (c.x - s.x) / d;
      const double uy = (c.y - s.y) / d;
      sxx += ux * ux;
      sxy += ux * uy;
      syy += uy * uy;
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double lmax = tr / 2.0 + disc;
    const double lmin = tr / 2.0 - disc;
    if (!(lmin > 0.0) || lmax / lmin > kMaxCondition) {
      throw Error(ErrorCode::SingularGeometry, "trilateration normal matrix is singular at the board center");
    }
  }

  std::array<Point2, kSensorCount> positions_;
  double width_;
  double height_;
  double speed_;
};

inline void to_json(nlohmann::json& j, const SensorGeometry& g) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& p : g.positions()) sensors.push_back({p.x, p.y});
  j = nlohmann::json{{"sensors", sensors},
                     {"board_width_mm", g.board_width_mm()},
                     {"board_height_mm", g.board_height_mm()},
                     {"speed_of_sound_mm_per_us", g.speed_of_sound_mm_per_us()}};
}

inline SensorGeometry geometry_from_json(const nlohmann::json& j) {
  try {
    const auto& s = j.at("sensors");
    if (!s.is_array() || s.size() != kSensorCount) {
      throw Error(ErrorCode::InvalidGeometry, "expected exactly three sensor positions");
    }
    std::array<Point2, kSensorCount> pos;
    for (std::size_t i = 0; i < kSensorCount; ++i) pos[i] = {s[i].at(0).get<double>(), s[i].at(1).get<double>()};
    return SensorGeometry(pos, j.at("board_width_mm").get<double>(), j.at("board_height_mm").get<double>(),
                          j.value("speed_of_sound_mm_per_us", SensorGeometry::kDefaultSpeedOfSound));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidGeometry, e.what());
  }
}

struct TrajectoryPoint {
  double t_ms = 0.0;
  Point2 position;
};

// Piecewise-linear hand path. Points must be in nondecreasing time order.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TrajectoryPoint> points) : points_(std::move(points)) {
    std::stable_sort(points_.begin(), points_.end(),
                     [](const TrajectoryPoint& a, const TrajectoryPoint& b) { return a.t_ms < b.t_ms; });
  }

  bool empty() const { return points_.empty(); }
  double start_ms() const { return points_.front().t_ms; }
  double end_ms() const { return points_.back().t_ms; }
  const std::vector<TrajectoryPoint>& points() const { return points_; }

  Point2 at(double t_ms) const {
    if (t_ms <= points_.front().t_ms) return points_.front().position;
    if (t_ms >= points_.back().t_ms) return points_.back().position;
    auto hi = std::upper_bound(points_.begin(), points_.end(), t_ms,
                               [](double t, const TrajectoryPoint& p) { return t < p.t_ms; });
    auto lo = std::prev(hi);
    const double span = hi->t_ms - lo->t_ms;
    const double u = span > 0.0 ? (t_ms - lo->t_ms) / span : 1.0;
    return {lo->position.x + u * (hi->position.x - lo->position.x),
            lo->position.y + u * (hi->position.y - lo->position.y)};
  }

 private:
  std::vector<TrajectoryPoint> points_;
};

inline void to_json(nlohmann::json& j, const Trajectory& t) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : t.points()) pts.push_back({{"t_ms", p.t_ms}, {"x", p.position.x}, {"y", p.position.y}});
  j = nlohmann::json{{"points", pts}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  std::vector<TrajectoryPoint> pts;
  for (const auto& p : j.at("points")) {
    pts.push_back({p.at("t_ms").get<double>(), {p.at("x").get<double>(), p.at("y").get<double>()}});
  }
  return Trajectory(std::move(pts));
}

// Noise-free echo time for a hand at p, before quantization.
inline std::array<double, kSensorCount> ideal_echo_us(const SensorGeometry& g, const Point2& p) {
  std::array<double, kSensorCount> out{};
  for (std::size_t i = 0; i < kSensorCount; ++i) out[i] = g.range_to_echo_us(distance(p, g.sensor(i)));
  return out;
}

// Software stand-in for the microcontroller: samples the trajectory at
// rate_hz starting at its first timestamp, and emits one frame per sample.
inline std::vector<RangeFrame> simulate_stream(const SensorGeometry& geometry, const Trajectory& trajectory,
                                               double noise_sigma_us, double rate_hz, std::uint64_t rng_seed) {
  if (!(rate_hz > 0.0)) throw Error(ErrorCode::InvalidGeometry, "rate_hz must be positive");
  if (!(noise_sigma_us >= 0.0)) throw Error(ErrorCode::InvalidGeometry, "noise sigma must be nonnegative");
  if (trajectory.empty()) return {};
  for (const auto& p : trajectory.points()) {
    if (!geometry.contains(p.position)) {
      throw Error(ErrorCode::TrajectoryOutOfBounds,
                  "point (" + std::to_string(p.position.x) + ", " + std::to_string(p.position.y) + ") off the board");
    }
  }

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double period_ms = 1000.0 / rate_hz;
  const double t0 = trajectory.start_ms();
  const auto samples = static_cast<std::size_t>(std::floor((trajectory.end_ms() - t0) / period_ms + 1e-9)) + 1;

  std::vector<RangeFrame> frames;
  frames.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = t0 + static_cast<double>(k) * period_ms;
    const auto echoes = ideal_echo_us(geometry, trajectory.at(t));
    RangeFrame f;
    f.seq = static_cast<std::uint8_t>(k & 0xFF);
    f.rx_time_ms = std::llround(t);
    for (std::size_t i = 0; i < kSensorCount; ++i) {
      double e = echoes[i];
      if (noise_sigma_us > 0.0) e += noise_sigma_us * noise(rng);
      f.echo_us[i] = static_cast<std::uint16_t>(std::clamp(std::round(e), 0.0, static_cast<double>(kMaxEchoUs)));
    }
    frames.push_back(f);
  }
  return frames;
}

inline std::vector<std::uint8_t> encode_stream(std::span<const RangeFrame> frames) {
  std::vector<std::uint8_t> out;
  out.reserve(frames.size() * kFrameSize);
  for (const auto& f : frames) {
    const auto b = encode_frame(f);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

}  // namespace aeroselect
