#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "aeroselect/error.hpp"
#include "aeroselect/game_core.hpp"
#include "aeroselect/localization.hpp"
#include "aeroselect/sensor_wire.hpp"

namespace aeroselect {

struct ServiceConfig {
  SensorGeometry geometry = SensorGeometry::default_geometry();
  DwellConfig dwell;
  double reject_residual_mm = kDefaultRejectResidualMm;
  std::filesystem::path data_dir = "data";
  std::string listen_address = "127.0.0.1";
  int port = 8080;
  GameRules rules;
  // Nominal device rate; replayed byte streams are timestamped from it.
  double frame_rate_hz = 30.0;
  // Header epoch for session logs written in replay mode.
  std::int64_t replay_epoch_ms = 0;
};

namespace detail {

inline void check_positive(std::int64_t v, const char* key) {
  if (v <= 0) throw Error(ErrorCode::ConfigError, std::string(key) + " must be positive");
}

}  // namespace detail

inline void validate(const ServiceConfig& c) {
  detail::check_positive(c.dwell.dwell_ms, "dwell_ms");
  detail::check_positive(c.dwell.flicker_ms, "flicker_ms");
  detail::check_positive(c.dwell.cooldown_ms, "cooldown_ms");
  detail::check_positive(c.rules.result_display_ms, "result_display_ms");
  detail::check_positive(c.rules.feedback_display_ms, "feedback_display_ms");
  if (!(c.reject_residual_mm > 0.0)) throw Error(ErrorCode::ConfigError, "reject_residual_mm must be positive");
  if (!(c.frame_rate_hz > 0.0)) throw Error(ErrorCode::ConfigError, "frame_rate_hz must be positive");
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::ConfigError, "port out of range");
  for (const auto& d : c.rules.presets) {
    if (d.time_limit_s && !(*d.time_limit_s > 0.0)) throw Error(ErrorCode::ConfigError, "time_limit_s must be positive");
  }
}

// Creates data_dir if needed and proves it is writable.
inline void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::ConfigError, "cannot create data_dir " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok")) throw Error(ErrorCode::ConfigError, "data_dir " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

inline nlohmann::json read_json_file(const std::filesystem::path& path, ErrorCode code) {
  std::ifstream in(path);
  if (!in) throw Error(code, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(code, path.string() + ": " + e.what());
  }
}

// Reads the JSON service config. Relative paths resolve against the config
// file's directory. AEROSELECT_DATA_DIR overrides data_dir.
inline ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ServiceConfig c;
  try {
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      if (g.is_string()) {
        std::filesystem::path p = g.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        c.geometry = geometry_from_json(read_json_file(p, ErrorCode::ConfigError));
      } else {
        c.geometry = geometry_from_json(g);
      }
    }
    c.dwell.dwell_ms = j.value("dwell_ms", c.dwell.dwell_ms);
    c.dwell.flicker_ms = j.value("flicker_ms", c.dwell.flicker_ms);
    c.dwell.cooldown_ms = j.value("cooldown_ms", c.dwell.cooldown_ms);
    c.reject_residual_mm = j.value("reject_residual_mm", c.reject_residual_mm);
    if (j.contains("data_dir")) {
      std::filesystem::path p = j.at("data_dir").get<std::string>();
      c.data_dir = p.is_relative() ? base_dir / p : p;
    }
    c.listen_address = j.value("listen_address", c.listen_address);
    c.port = j.value("port", c.port);
    c.frame_rate_hz = j.value("frame_rate_hz", c.frame_rate_hz);
    c.replay_epoch_ms = j.value("replay_epoch_ms", c.replay_epoch_ms);
    c.rules.result_display_ms = j.value("result_display_ms", c.rules.result_display_ms);
    c.rules.feedback_display_ms = j.value("feedback_display_ms", c.rules.feedback_display_ms);
    if (j.contains("difficulty_presets")) {
      for (const auto& [name, preset] : j.at("difficulty_presets").items()) {
        const auto level = level_from_string(name);
        if (!level) throw Error(ErrorCode::ConfigError, "unknown difficulty '" + name + "'");
        auto& d = c.rules.presets[static_cast<std::size_t>(*level)];
        if (preset.contains("pairs_per_round") && preset.at("pairs_per_round").get<int>() != d.pairs_per_round) {
          throw Error(ErrorCode::ConfigError, name + " pairs_per_round is fixed at " + std::to_string(d.pairs_per_round));
        }
        if (preset.contains("time_limit_s") && !preset.at("time_limit_s").is_null()) {
          d.time_limit_s = preset.at("time_limit_s").get<double>();
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (const char* env = std::getenv("AEROSELECT_DATA_DIR"); env && *env) c.data_dir = env;
  validate(c);
  return c;
}

inline ServiceConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path, ErrorCode::ConfigError), path.parent_path());
}

inline nlohmann::json config_snapshot(const ServiceConfig& c) {
  nlohmann::json presets = nlohmann::json::object();
  for (const auto& d : c.rules.presets) {
    presets[std::string(to_string(d.level))] = {
        {"pairs_per_round", d.pairs_per_round},
        {"time_limit_s", d.time_limit_s ? nlohmann::json(*d.time_limit_s) : nlohmann::json(nullptr)}};
  }
  return nlohmann::json{{"geometry", c.geometry},
                        {"dwell_ms", c.dwell.dwell_ms},
                        {"flicker_ms", c.dwell.flicker_ms},
                        {"cooldown_ms", c.dwell.cooldown_ms},
                        {"reject_residual_mm", c.reject_residual_mm},
                        {"frame_rate_hz", c.frame_rate_hz},
                        {"difficulty_presets", presets}};
}

}  // namespace aeroselect
