// aeroselect command-line entry point.
//
// Exit codes: 0 ok, 1 configuration, 2 I/O, 3 data integrity.

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aeroselect/aeroselect.hpp"

namespace fs = std::filesystem;
using namespace aeroselect;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kIo = 2, kIntegrity = 3 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidGeometry:
    case ErrorCode::SingularGeometry:
    case ErrorCode::TrajectoryOutOfBounds:
    case ErrorCode::InvalidCohortSpec:
      return kConfig;
    case ErrorCode::StorageFailure:
    case ErrorCode::InputClosed:
    case ErrorCode::BindError:
      return kIo;
    default:
      return kIntegrity;
  }
}

// Writes all bytes to a file path, "-" for stdout, or "unix:<path>" for a
// local stream socket.
void write_sink(const std::string& target, const std::vector<std::uint8_t>& bytes) {
  int fd = -1;
  bool owned = true;
  if (target == "-") {
    fd = STDOUT_FILENO;
    owned = false;
  } else if (target.rfind("unix:", 0) == 0) {
    const std::string path = target.substr(5);
    fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (fd < 0 || path.size() >= sizeof(addr.sun_path)) throw Error(ErrorCode::StorageFailure, "bad socket " + path);
    std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      throw Error(ErrorCode::StorageFailure, "cannot connect to " + path + ": " + std::strerror(errno));
    }
  } else {
    std::ofstream out(target, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + target);
    return;
  }
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (owned) ::close(fd);
      throw Error(ErrorCode::StorageFailure, std::string("write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  if (owned) ::close(fd);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
}

SensorGeometry load_geometry(const std::string& path) {
  if (path.empty()) return SensorGeometry::default_geometry();
  return geometry_from_json(read_json_file(path, ErrorCode::ConfigError));
}

Trajectory load_trajectory(const std::string& path) {
  try {
    return trajectory_from_json(read_json_file(path, ErrorCode::ConfigError));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
}

ServiceConfig load_service_config(const std::string& path) {
  if (path.empty()) {
    ServiceConfig c;
    if (const char* env = std::getenv("AEROSELECT_DATA_DIR"); env && *env) c.data_dir = env;
    return c;
  }
  return load_config(path);
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Air-selection therapy game: sensor simulator, session runner, UI service and study analysis"};
  app.require_subcommand(1);

  // simulate
  struct {
    std::string geometry, trajectory, out;
    double noise_us = 0.0, rate_hz = 30.0;
    std::uint64_t seed = 0;
  } sim;
  auto* simulate = app.add_subcommand("simulate", "Emit sensor frames for a hand trajectory");
  simulate->add_option("--geometry", sim.geometry, "Geometry JSON (default: 300x300 board, sensors on the top edge)");
  simulate->add_option("--trajectory", sim.trajectory, "Trajectory JSON")->required();
  simulate->add_option("--noise-us", sim.noise_us, "Echo noise sigma in microseconds");
  simulate->add_option("--rate-hz", sim.rate_hz, "Sample rate");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--out", sim.out, "Byte sink: file path, '-' for stdout, or unix:<socket path>")->required();

  // layout
  struct {
    std::string level = "Beginner", config, trajectory_out;
    std::uint64_t seed = 0;
  } lay;
  auto* layout = app.add_subcommand("layout", "Print a round layout and optionally a hover trajectory that solves it");
  layout->add_option("--level", lay.level, "Beginner|Intermediate|Advanced");
  layout->add_option("--seed", lay.seed, "Layout seed");
  layout->add_option("--config", lay.config, "Service config (for geometry)");
  layout->add_option("--trajectory-out", lay.trajectory_out, "Write a trajectory hovering the targets in order");

  // play
  struct {
    std::string config, input = "sim", source, trajectory, player = "player", group = "EG", method = "sg",
                        level = "Beginner", name;
    double noise_us = 0.0, rate_hz = 0.0;
    std::uint64_t seed = 0, layout_seed = 0;
    int session = 1, avatar = 0;
  } play;
  auto* play_cmd = app.add_subcommand("play", "Run one session from a frame source");
  play_cmd->add_option("--config", play.config, "Service config JSON");
  play_cmd->add_option("--input", play.input, "serial|file|sim")->check(CLI::IsMember({"serial", "file", "sim"}));
  play_cmd->add_option("--source", play.source, "Device or file path for serial/file input");
  play_cmd->add_option("--trajectory", play.trajectory, "Trajectory JSON for sim input");
  play_cmd->add_option("--noise-us", play.noise_us, "Echo noise for sim input");
  play_cmd->add_option("--rate-hz", play.rate_hz, "Frame rate for sim input (default: config frame_rate_hz)");
  play_cmd->add_option("--seed", play.seed, "Simulator seed");
  play_cmd->add_option("--player", play.player, "Player id")->required();
  play_cmd->add_option("--group", play.group, "CG|EG")->check(CLI::IsMember({"CG", "EG"}));
  play_cmd->add_option("--method", play.method, "manual|sg")->check(CLI::IsMember({"manual", "sg"}));
  play_cmd->add_option("--session", play.session, "Session index 1..4");
  play_cmd->add_option("--level", play.level, "Beginner|Intermediate|Advanced");
  play_cmd->add_option("--layout-seed", play.layout_seed, "Round layout seed");
  play_cmd->add_option("--avatar", play.avatar, "Avatar id 0..5");
  play_cmd->add_option("--name", play.name, "Display name (default: player id)");

  // serve
  struct {
    std::string config;
    int port = -1;
  } srv;
  auto* serve = app.add_subcommand("serve", "Serve the UI message channel and report endpoints");
  serve->add_option("--config", srv.config, "Service config JSON");
  serve->add_option("--port", srv.port, "Override the configured port");

  // analyze
  struct {
    std::string data, measure = "time", out, csv;
  } an;
  auto* analyze = app.add_subcommand("analyze", "Compare Manual vs SG over stored session logs");
  analyze->add_option("--data", an.data, "Data directory")->required();
  analyze->add_option("--measure", an.measure, "time|grade")->check(CLI::IsMember({"time", "grade"}));
  analyze->add_option("--out", an.out, "Report JSON path")->required();
  analyze->add_option("--csv", an.csv, "Also write boxplot data as CSV");

  // simulate-study
  struct {
    std::string config, out;
    std::uint64_t seed = 0;
  } study;
  auto* sim_study = app.add_subcommand("simulate-study", "Generate synthetic CG/EG cohorts as session logs");
  sim_study->add_option("--config", study.config, "Cohort spec JSON (defaults when omitted)");
  sim_study->add_option("--seed", study.seed, "RNG seed");
  sim_study->add_option("--out", study.out, "Output data directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto geometry = load_geometry(sim.geometry);
      const auto frames = simulate_stream(geometry, load_trajectory(sim.trajectory), sim.noise_us, sim.rate_hz, sim.seed);
      write_sink(sim.out, encode_stream(frames));
      std::cerr << "wrote " << frames.size() << " frames\n";
    } else if (*layout) {
      const auto level = level_from_string(lay.level);
      if (!level) throw Error(ErrorCode::ConfigError, "unknown level " + lay.level);
      const auto config = load_service_config(lay.config);
      const auto l = layout_round(config.rules.preset(*level), lay.seed);
      auto j = round_layout_json(l);
      j["target_cells"] = target_cells(l);
      std::cout << j.dump(2) << '\n';
      if (!lay.trajectory_out.empty()) {
        const auto cells = target_cells(l);
        write_text(lay.trajectory_out, nlohmann::json(hover_trajectory(config.geometry, cells)).dump(2) + "\n");
      }
    } else if (*play_cmd) {
      auto config = load_service_config(play.config);
      ensure_writable(config.data_dir);
      const auto level = level_from_string(play.level);
      if (!level) throw Error(ErrorCode::ConfigError, "unknown level " + play.level);
      SessionRequest req;
      req.session = {play.player, *group_from_string(play.group), *method_from_string(play.method), play.session};
      req.avatar = play.avatar;
      req.name = play.name.empty() ? play.player : play.name;
      req.level = *level;
      req.layout_seed = play.layout_seed;

      std::unique_ptr<ByteSource> source;
      ClockMode clock = ClockMode::Replay;
      if (play.input == "sim") {
        if (play.trajectory.empty()) throw Error(ErrorCode::ConfigError, "--trajectory is required for sim input");
        const double rate = play.rate_hz > 0.0 ? play.rate_hz : config.frame_rate_hz;
        config.frame_rate_hz = rate;
        const auto frames = simulate_stream(config.geometry, load_trajectory(play.trajectory), play.noise_us, rate, play.seed);
        source = std::make_unique<MemoryByteSource>(encode_stream(frames), 4096);
      } else {
        if (play.source.empty()) throw Error(ErrorCode::ConfigError, "--source is required for serial/file input");
        source = std::make_unique<FileByteSource>(play.source);
        if (play.input == "serial") clock = ClockMode::Wall;
      }
      const auto summary = run_session(config, *source, req, nullptr, clock);
      std::cout << nlohmann::json(summary).dump(2) << '\n';
    } else if (*serve) {
      auto config = load_service_config(srv.config);
      if (srv.port >= 0) config.port = srv.port;
      UiServer server(config);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int port = server.start();
      std::cerr << "listening on " << config.listen_address << ':' << port << '\n';
      while (server.running() && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      server.stop();
    } else if (*analyze) {
      const auto records = DataStore(an.data).read_all();
      const auto comparison = compare_groups(records, *measure_from_string(an.measure));
      write_text(an.out, nlohmann::json(comparison).dump(2) + "\n");
      if (!an.csv.empty()) write_text(an.csv, boxplot_csv(comparison));
      std::cerr << "Manual n=" << comparison.manual.n << " SG n=" << comparison.sg.n
                << " p=" << comparison.test.p_value << '\n';
    } else if (*sim_study) {
      CohortSpec spec;
      if (!study.config.empty()) {
        try {
          spec = read_json_file(study.config, ErrorCode::ConfigError).get<CohortSpec>();
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::ConfigError, e.what());
        }
      }
      const auto records = simulate_study(spec, study.seed);
      DataStore store(study.out);
      for (const auto& r : records) {
        SessionHeader h;
        h.player_id = r.player_id;
        h.group = r.group;
        h.method = r.method;
        h.session_index = r.session_index;
        h.config = {{"cohort", spec}, {"seed", study.seed}};
        auto log = store.open_session(h, false);
        log.append_record(r);
      }
      std::ofstream csv(fs::path(study.out) / "records.csv");
      write_records_csv(csv, records);
      std::cerr << "wrote " << records.size() << " records to " << study.out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
