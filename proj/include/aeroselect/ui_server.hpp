#pragma once

// HTTP face of the service.
//
//   GET  /events                       Server-Sent Events, one envelope per "data:" line
//   POST /command                      {"type": start_session|choose_avatar|choose_scenario|quit, "payload": {...}}
//   GET  /state                        latest game_state snapshot (for client resync)
//   GET  /sessions                     index of stored session logs
//   GET  /sessions/<group>/<player>/<k>  raw NDJSON log
//   GET  /report?measure=time|grade    GroupComparison over the data directory
//   GET  /health

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "aeroselect/analytics.hpp"
#include "aeroselect/channel.hpp"
#include "aeroselect/config.hpp"
#include "aeroselect/pipeline.hpp"
#include "aeroselect/session_store.hpp"

namespace aeroselect {

class UiServer {
 public:
  explicit UiServer(ServiceConfig config) : config_(std::move(config)) {
    validate(config_);
    ensure_writable(config_.data_dir);
    // httplib's default also sets SO_REUSEPORT, which would let a second
    // instance share the port instead of failing with BindError.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    routes();
  }

  UiServer(const UiServer&) = delete;
  UiServer& operator=(const UiServer&) = delete;

  ~UiServer() { stop(); }

  // Binds and starts serving in the background. Port 0 picks a free port.
  int start() {
    if (config_.port == 0) {
      port_ = server_.bind_to_any_port(config_.listen_address);
    } else {
      port_ = server_.bind_to_port(config_.listen_address, config_.port) ? config_.port : -1;
    }
    if (port_ < 0) {
      throw Error(ErrorCode::BindError, "cannot bind " + config_.listen_address + ":" + std::to_string(config_.port));
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    channel_.close_all();
    end_session();
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  bool running() const { return port_ > 0 && !stopping_; }
  Broadcaster& channel() { return channel_; }

  // Applies one inbound message. Returns an error string for the caller;
  // malformed messages also go out as an "error" event.
  std::optional<std::string> handle_command(const std::string& body) {
    std::string err;
    try {
      const auto msg = nlohmann::json::parse(body);
      if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string()) {
        err = "message must be an object with a string 'type'";
      } else {
        const auto type = msg.at("type").get<std::string>();
        const auto payload = msg.value("payload", nlohmann::json::object());
        if (type == "start_session") {
          start_session(payload);
        } else if (type == "choose_avatar") {
          choose_avatar(payload);
        } else if (type == "choose_scenario") {
          choose_scenario(payload);
        } else if (type == "quit") {
          quit();
        } else {
          err = "unknown message type '" + type + "'";
        }
      }
    } catch (const nlohmann::json::exception& e) {
      err = std::string("malformed message: ") + e.what();
    } catch (const Error& e) {
      err = e.what();
    }
    if (!err.empty()) {
      channel_.publish("error", {{"message", err}});
      return err;
    }
    return std::nullopt;
  }

 private:
  void routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"ok":true})", "application/json");
    });

    server_.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = channel_.subscribe();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, sub](std::size_t, httplib::DataSink& sink) {
            if (stopping_ || sub->closed()) return false;
            std::string chunk;
            if (auto msg = sub->next(std::chrono::milliseconds(200))) {
              chunk = "data: " + *msg + "\n\n";
            } else {
              chunk = ": keepalive\n\n";
            }
            return sink.write(chunk.data(), chunk.size());
          },
          [sub](bool) { sub->close(); });
    });

    server_.Post("/command", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto err = handle_command(req.body)) {
        res.status = 400;
        res.set_content(nlohmann::json{{"ok", false}, {"error", *err}}.dump(), "application/json");
      } else {
        res.set_content(R"({"ok":true})", "application/json");
      }
    });

    server_.Get("/state", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(session_mu_);
      const auto snap = session_ ? session_->snapshot() : nlohmann::json(nullptr);
      res.set_content(snap.dump(), "application/json");
    });

    server_.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      DataStore store(config_.data_dir);
      nlohmann::json index = nlohmann::json::array();
      for (const auto& p : store.list_logs()) {
        index.push_back(std::filesystem::relative(p, config_.data_dir).generic_string());
      }
      res.set_content(index.dump(), "application/json");
    });

    server_.Get(R"(/sessions/(CG|EG)/([A-Za-z0-9_.\-]+)/(\d+))", [this](const httplib::Request& req,
                                                                        httplib::Response& res) {
      const std::string player = req.matches[2];
      if (player == "." || player == "..") {
        res.status = 400;
        return;
      }
      const auto group = *group_from_string(std::string(req.matches[1]));
      const auto path = DataStore(config_.data_dir).path_for(group, player, std::stoi(req.matches[3]));
      if (!std::filesystem::exists(path)) {
        res.status = 404;
        res.set_content(R"({"error":"no such session"})", "application/json");
        return;
      }
      res.set_content(read_file(path), "application/x-ndjson");
    });

    server_.Get("/report", [this](const httplib::Request& req, httplib::Response& res) {
      const auto measure = measure_from_string(req.has_param("measure") ? req.get_param_value("measure") : "time");
      if (!measure) {
        res.status = 400;
        res.set_content(R"({"error":"measure must be time or grade"})", "application/json");
        return;
      }
      try {
        const auto records = DataStore(config_.data_dir).read_all();
        res.set_content(nlohmann::json(compare_groups(records, *measure)).dump(), "application/json");
      } catch (const Error& e) {
        res.status = 422;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  }

  void start_session(const nlohmann::json& p) {
    SessionHeader header;
    header.player_id = p.at("player_id").get<std::string>();
    const auto group = group_from_string(p.value("group", "EG"));
    const auto method = method_from_string(p.value("method", "SG"));
    if (!group || !method) throw Error(ErrorCode::InvalidRecord, "bad group or method");
    header.group = *group;
    header.method = *method;
    header.session_index = p.value("session_index", 1);
    header.config = config_snapshot(config_);
    header.start_epoch_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
            .count();

    end_session();
    std::lock_guard lock(session_mu_);
    pending_name_ = p.value("name", header.player_id);
    SessionPipeline::Options options;
    options.clock = ClockMode::Wall;
    options.stop_after_round = false;
    session_ = std::make_unique<SessionPipeline>(config_, header, &channel_, options);

    if (p.contains("input")) start_ingest(p.at("input"));
  }

  // Feeds frames in real time from a simulated trajectory or a byte file.
  void start_ingest(const nlohmann::json& input) {
    const auto kind = input.at("kind").get<std::string>();
    SessionPipeline* pipeline = session_.get();
    if (kind == "sim") {
      const auto trajectory = trajectory_from_json(input.at("trajectory"));
      auto frames = simulate_stream(config_.geometry, trajectory, input.value("noise_us", 0.0),
                                    input.value("rate_hz", config_.frame_rate_hz), input.value("seed", 0ULL));
      ingest_ = std::thread([pipeline, frames = std::move(frames), this] {
        const auto start = pipeline->now_ms();
        for (auto f : frames) {
          while (!ingest_stop_ && !pipeline->stop_requested() && pipeline->now_ms() - start < f.rx_time_ms) {
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
          }
          if (ingest_stop_ || pipeline->stop_requested()) return;
          f.rx_time_ms = pipeline->now_ms();
          if (!pipeline->push_frame(f)) return;
        }
      });
    } else if (kind == "file") {
      auto source = std::make_shared<FileByteSource>(input.at("path").get<std::string>());
      ingest_ = std::thread([pipeline, source, this] {
        FrameReader reader;
        std::vector<std::uint8_t> buffer(512);
        try {
          while (!ingest_stop_ && !pipeline->stop_requested()) {
            const std::size_t n = source->read(buffer);
            if (n == 0) return;
            reader.feed(std::span<const std::uint8_t>(buffer.data(), n));
            while (auto frame = reader.next(pipeline->now_ms())) {
              if (!pipeline->push_frame(*frame)) return;
            }
          }
        } catch (const Error&) {
          // Input closed; the session stays open for UI commands.
        }
      });
    } else {
      throw Error(ErrorCode::ConfigError, "unknown input kind '" + kind + "'");
    }
  }

  void choose_avatar(const nlohmann::json& p) {
    std::lock_guard lock(session_mu_);
    if (!session_) throw Error(ErrorCode::InvalidInputForPhase, "no active session");
    session_->push_input(AvatarChosen{p.at("avatar").get<int>()});
    session_->push_input(NameEntered{p.value("name", pending_name_)});
  }

  void choose_scenario(const nlohmann::json& p) {
    std::lock_guard lock(session_mu_);
    if (!session_) throw Error(ErrorCode::InvalidInputForPhase, "no active session");
    const auto level = level_from_string(p.value("level", "Beginner"));
    if (!level) throw Error(ErrorCode::InvalidInputForPhase, "unknown level");
    session_->push_scenario({*level, p.value("seed", 0ULL)});
  }

  void quit() {
    std::lock_guard lock(session_mu_);
    if (!session_) throw Error(ErrorCode::InvalidInputForPhase, "no active session");
    session_->push_input(Quit{});
  }

  void end_session() {
    std::unique_ptr<SessionPipeline> old;
    {
      std::lock_guard lock(session_mu_);
      old = std::move(session_);
    }
    ingest_stop_ = true;
    if (ingest_.joinable()) ingest_.join();
    ingest_stop_ = false;
    if (old) {
      try {
        old->wait();
      } catch (const Error& e) {
        channel_.publish("error", {{"message", e.what()}});
      }
    }
  }

  ServiceConfig config_;
  httplib::Server server_;
  Broadcaster channel_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<bool> stopping_{false};

  std::mutex session_mu_;
  std::unique_ptr<SessionPipeline> session_;
  std::string pending_name_;
  std::thread ingest_;
  std::atomic<bool> ingest_stop_{false};
};

}  // namespace aeroselect
