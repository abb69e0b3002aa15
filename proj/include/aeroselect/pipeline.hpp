#pragma once

// Live session loop: ingest -> pipeline -> effects, connected by bounded
// queues. The pipeline stage is the only owner of GameState. The effects
// stage persists records (never dropped) and publishes UI envelopes (dropped
// per slow subscriber, see Broadcaster).

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aeroselect/channel.hpp"
#include "aeroselect/config.hpp"
#include "aeroselect/error.hpp"
#include "aeroselect/game_core.hpp"
#include "aeroselect/localization.hpp"
#include "aeroselect/sensor_wire.hpp"
#include "aeroselect/session_store.hpp"

namespace aeroselect {

class ByteSource {
 public:
  virtual ~ByteSource() = default;
  // Returns the number of bytes read; 0 means the source is closed.
  virtual std::size_t read(std::span<std::uint8_t> buffer) = 0;
};

class MemoryByteSource final : public ByteSource {
 public:
  explicit MemoryByteSource(std::vector<std::uint8_t> bytes, std::size_t chunk = 64)
      : bytes_(std::move(bytes)), chunk_(chunk == 0 ? 1 : chunk) {}

  std::size_t read(std::span<std::uint8_t> buffer) override {
    const std::size_t n = std::min({buffer.size(), chunk_, bytes_.size() - pos_});
    std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), n, buffer.begin());
    pos_ += n;
    return n;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t chunk_;
  std::size_t pos_ = 0;
};

// Regular file, FIFO or character device (a serial port configured
// elsewhere).
class FileByteSource final : public ByteSource {
 public:
  explicit FileByteSource(const std::filesystem::path& path) : fd_(::open(path.c_str(), O_RDONLY | O_CLOEXEC)) {
    if (fd_ < 0) throw Error(ErrorCode::StorageFailure, "cannot open input " + path.string() + ": " + std::strerror(errno));
  }
  FileByteSource(const FileByteSource&) = delete;
  FileByteSource& operator=(const FileByteSource&) = delete;
  ~FileByteSource() override { ::close(fd_); }

  std::size_t read(std::span<std::uint8_t> buffer) override {
    while (true) {
      const ssize_t n = ::read(fd_, buffer.data(), buffer.size());
      if (n >= 0) return static_cast<std::size_t>(n);
      if (errno != EINTR) throw Error(ErrorCode::StorageFailure, std::string("read failed: ") + std::strerror(errno));
    }
  }

 private:
  int fd_;
};

enum class ClockMode {
  Replay,  // timestamps derived from frame sequence numbers and the nominal rate
  Wall,    // steady clock since session start
};

// Replay timestamps: each frame advances the clock by its seq distance from
// the previous frame, so dropped frames still move time forward.
class ReplayStamper {
 public:
  explicit ReplayStamper(double rate_hz) : period_ms_(1000.0 / rate_hz) {}

  std::int64_t stamp(std::uint8_t seq) {
    if (last_seq_ >= 0) {
      const auto step = static_cast<std::uint8_t>(seq - last_seq_);
      ticks_ += step == 0 ? 1 : step;
    }
    last_seq_ = seq;
    return std::llround(static_cast<double>(ticks_) * period_ms_);
  }

 private:
  double period_ms_;
  int last_seq_ = -1;
  std::int64_t ticks_ = 0;
};

// Chooses the scenario from whatever screen the child is on: finishes the
// cinematic if it is still playing.
struct ScenarioRequest {
  Level level = Level::Beginner;
  std::uint64_t layout_seed = 0;
};

struct SessionSummary {
  std::uint64_t frames = 0;
  std::uint64_t dropped_frames = 0;  // checksum or range failures
  std::uint64_t seq_gaps = 0;
  std::uint64_t rejected_estimates = 0;
  std::uint64_t selections = 0;
  std::uint64_t records_written = 0;
  bool input_closed_mid_round = false;
  Phase final_phase = Phase::AwaitLogin;
  std::vector<TrialRecord> records;
  std::filesystem::path log_path;
};

inline void to_json(nlohmann::json& j, const SessionSummary& s) {
  j = nlohmann::json{{"frames", s.frames},
                     {"dropped_frames", s.dropped_frames},
                     {"seq_gaps", s.seq_gaps},
                     {"rejected_estimates", s.rejected_estimates},
                     {"selections", s.selections},
                     {"records_written", s.records_written},
                     {"input_closed_mid_round", s.input_closed_mid_round},
                     {"final_phase", to_string(s.final_phase)},
                     {"records", s.records},
                     {"log_path", s.log_path.string()}};
}

class SessionPipeline {
 public:
  struct Options {
    ClockMode clock = ClockMode::Replay;
    bool stop_after_round = true;
    std::size_t queue_capacity = 1024;
    // Wall mode only: interval of synthetic Tick inputs driving timed phases.
    std::chrono::milliseconds tick_interval{50};
  };

  SessionPipeline(ServiceConfig config, const SessionHeader& header, Broadcaster* channel, Options options)
      : config_(std::move(config)),
        options_(options),
        channel_(channel),
        log_(DataStore(config_.data_dir).open_session(header)),
        game_(new_game(SessionInfo{header.player_id, header.group, header.method, header.session_index})),
        dwell_(config_.dwell),
        inputs_(options.queue_capacity),
        effects_(options.queue_capacity),
        started_(std::chrono::steady_clock::now()) {
    summary_.log_path = log_.path();
    snapshot_ = snapshot_json(game_);
    effects_.push(Publish{"game_state", snapshot_});
    pipeline_thread_ = std::thread([this] { run_pipeline(); });
    effects_thread_ = std::thread([this] { run_effects(); });
    if (options_.clock == ClockMode::Wall) {
      ticker_thread_ = std::thread([this] { run_ticker(); });
    }
  }

  SessionPipeline(const SessionPipeline&) = delete;
  SessionPipeline& operator=(const SessionPipeline&) = delete;

  ~SessionPipeline() {
    close_input();
    join();
  }

  bool push_frame(const RangeFrame& frame) { return inputs_.push(frame); }
  bool push_input(GameInput input) { return inputs_.push(std::move(input)); }
  bool push_scenario(ScenarioRequest request) { return inputs_.push(request); }

  // No more input; a round still in progress is closed as incomplete.
  void close_input() {
    bool expected = false;
    if (input_closed_.compare_exchange_strong(expected, true)) {
      ticker_stop_ = true;
      inputs_.push(EndOfInput{});
    }
  }

  // Set once the pipeline no longer wants frames (round finished or error).
  bool stop_requested() const { return stop_.load(); }

  std::int64_t now_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started_).count();
  }

  nlohmann::json snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return snapshot_;
  }

  // Blocks until both stages finish. Rethrows a storage failure.
  SessionSummary wait() {
    close_input();
    join();
    if (failure_) std::rethrow_exception(failure_);
    return summary_;
  }

 private:
  struct EndOfInput {};
  using Item = std::variant<RangeFrame, GameInput, ScenarioRequest, EndOfInput>;

  struct PersistRecord {
    TrialRecord record;
  };
  struct PersistEvent {
    SelectionEvent event;
  };
  struct Publish {
    std::string type;
    nlohmann::json payload;
  };
  struct EndOfEffects {};
  using EffectItem = std::variant<PersistRecord, PersistEvent, Publish, EndOfEffects>;

  void join() {
    ticker_stop_ = true;
    if (ticker_thread_.joinable()) ticker_thread_.join();
    if (pipeline_thread_.joinable()) pipeline_thread_.join();
    if (effects_thread_.joinable()) effects_thread_.join();
  }

  void emit(EffectItem item) { effects_.push(std::move(item)); }

  void publish_state() {
    auto snap = snapshot_json(game_);
    {
      std::lock_guard lock(snapshot_mu_);
      snapshot_ = snap;
    }
    emit(Publish{"game_state", std::move(snap)});
  }

  // Returns false if the input was rejected.
  bool apply(const GameInput& input, bool from_ui) {
    auto t = advance(game_, input, config_.rules);
    if (!t.accepted()) {
      if (from_ui) {
        emit(Publish{"error", {{"code", to_string(*t.error)}, {"message", t.error_detail}}});
      }
      return false;
    }
    const Phase before = game_.phase;
    game_ = std::move(t.state);
    for (const auto& effect : t.effects) {
      if (const auto* rec = std::get_if<RecordTrial>(&effect)) {
        emit(PersistRecord{rec->record});
        const int grade = static_cast<int>(rec->record.grade);
        emit(Publish{"round_result", {{"record", rec->record}, {"grade_meaning", grade_meaning(grade)}}});
      } else if (const auto* match = std::get_if<MatchAttempt>(&effect)) {
        emit(Publish{"match", {{"cell", match->cell}, {"character", match->character}, {"success", match->success}}});
      }
    }
    if (!t.effects.empty() || game_.phase != before || game_.ended) publish_state();
    if (options_.stop_after_round && game_.phase == Phase::RoundResult) stop_ = true;
    if (game_.ended) stop_ = true;
    return true;
  }

  void handle_frame(const RangeFrame& frame) {
    ++summary_.frames;
    const HandEstimate est = ranges_to_position(frame, config_.geometry);
    const auto cell = position_to_cell(est, config_.geometry, config_.reject_residual_mm);
    if (!cell) ++summary_.rejected_estimates;
    const auto selection = dwell_.step(cell, frame.rx_time_ms);

    const double w = config_.geometry.board_width_mm(), h = config_.geometry.board_height_mm();
    emit(Publish{"hand_estimate",
                 {{"estimate", est},
                  {"normalized", {std::clamp(est.position_mm.x / w, 0.0, 1.0), std::clamp(est.position_mm.y / h, 0.0, 1.0)}},
                  {"cell", cell ? nlohmann::json(*cell) : nlohmann::json(nullptr)},
                  {"dwell_progress", dwell_.progress(frame.rx_time_ms)},
                  {"rx_time_ms", frame.rx_time_ms}}});

    if (selection && game_.phase == Phase::InRound) {
      ++summary_.selections;
      emit(PersistEvent{*selection});
      emit(Publish{"selection", *selection});
      apply(Selection{*selection}, false);
    }
    apply(Tick{frame.rx_time_ms}, false);
  }

  void handle_scenario(const ScenarioRequest& req) {
    if (game_.phase == Phase::Cinematic) apply(CinematicDone{}, true);
    apply(ScenarioChosen{req.level, req.layout_seed}, true);
  }

  void run_pipeline() {
    try {
      while (auto item = inputs_.pop()) {
        if (std::holds_alternative<EndOfInput>(*item)) break;
        if (stop_) continue;  // drain so producers never block
        if (const auto* frame = std::get_if<RangeFrame>(&*item)) {
          handle_frame(*frame);
        } else if (const auto* input = std::get_if<GameInput>(&*item)) {
          apply(*input, !std::holds_alternative<Tick>(*input));
        } else if (const auto* req = std::get_if<ScenarioRequest>(&*item)) {
          handle_scenario(*req);
        }
      }
      if (!game_.ended && game_.phase == Phase::InRound) {
        summary_.input_closed_mid_round = true;
        apply(Quit{}, false);
      }
    } catch (...) {
      record_failure(std::current_exception());
    }
    stop_ = true;
    summary_.final_phase = game_.phase;
    emit(EndOfEffects{});
    inputs_.close();
  }

  void run_effects() {
    try {
      while (auto item = effects_.pop()) {
        if (std::holds_alternative<EndOfEffects>(*item)) break;
        if (const auto* rec = std::get_if<PersistRecord>(&*item)) {
          log_.append_record(rec->record);
          ++summary_.records_written;
          summary_.records.push_back(rec->record);
        } else if (const auto* ev = std::get_if<PersistEvent>(&*item)) {
          log_.append_event(ev->event);
        } else if (auto* pub = std::get_if<Publish>(&*item)) {
          if (channel_) channel_->publish(pub->type, std::move(pub->payload));
        }
      }
    } catch (...) {
      record_failure(std::current_exception());
      stop_ = true;
      inputs_.close();
      // Keep draining so the pipeline stage can finish.
      while (auto item = effects_.pop()) {
        if (std::holds_alternative<EndOfEffects>(*item)) break;
      }
    }
  }

  void run_ticker() {
    while (!ticker_stop_) {
      std::this_thread::sleep_for(options_.tick_interval);
      if (ticker_stop_ || stop_) break;
      inputs_.push(GameInput{Tick{now_ms()}});
    }
  }

  void record_failure(std::exception_ptr e) {
    std::lock_guard lock(failure_mu_);
    if (!failure_) failure_ = e;
  }

  ServiceConfig config_;
  Options options_;
  Broadcaster* channel_;
  SessionLog log_;
  GameState game_;
  DwellSelector dwell_;
  SessionSummary summary_;

  BoundedQueue<Item> inputs_;
  BoundedQueue<EffectItem> effects_;
  std::chrono::steady_clock::time_point started_;

  mutable std::mutex snapshot_mu_;
  nlohmann::json snapshot_ = nlohmann::json::object();

  std::mutex failure_mu_;
  std::exception_ptr failure_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> input_closed_{false};
  std::atomic<bool> ticker_stop_{false};

  std::thread pipeline_thread_;
  std::thread effects_thread_;
  std::thread ticker_thread_;
};

struct SessionRequest {
  SessionInfo session;
  int avatar = 0;
  std::string name = "player";
  Level level = Level::Beginner;
  std::uint64_t layout_seed = 0;
};

// Plays one scripted session: logs in, picks the scenario, then feeds frames
// from `input` until the round completes or the input closes.
inline SessionSummary run_session(const ServiceConfig& config, ByteSource& input, const SessionRequest& request,
                                  Broadcaster* channel = nullptr, ClockMode clock = ClockMode::Replay) {
  validate(config);
  SessionHeader header;
  header.player_id = request.session.player_id;
  header.group = request.session.group;
  header.method = request.session.method;
  header.session_index = request.session.session_index;
  header.config = config_snapshot(config);
  header.start_epoch_ms =
      clock == ClockMode::Replay
          ? config.replay_epoch_ms
          : std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
                .count();

  SessionPipeline::Options options;
  options.clock = clock;
  options.stop_after_round = true;
  SessionPipeline pipeline(config, header, channel, options);

  pipeline.push_input(AvatarChosen{request.avatar});
  pipeline.push_input(NameEntered{request.name});
  pipeline.push_scenario({request.level, request.layout_seed});

  FrameReader reader;
  ReplayStamper stamper(config.frame_rate_hz);
  std::vector<std::uint8_t> buffer(4096);
  std::exception_ptr ingest_failure;
  try {
    while (!pipeline.stop_requested()) {
      const std::size_t n = input.read(buffer);
      if (n == 0) break;
      reader.feed(std::span<const std::uint8_t>(buffer.data(), n));
      while (auto frame = reader.next()) {
        frame->rx_time_ms = clock == ClockMode::Replay ? stamper.stamp(frame->seq) : pipeline.now_ms();
        if (!pipeline.push_frame(*frame)) break;
      }
    }
  } catch (...) {
    ingest_failure = std::current_exception();
  }
  pipeline.close_input();
  SessionSummary summary = pipeline.wait();
  if (ingest_failure) std::rethrow_exception(ingest_failure);

  const auto& stats = reader.stats();
  summary.dropped_frames = stats.checksum_errors + stats.range_errors;
  summary.seq_gaps = stats.seq_gaps;
  return summary;
}

}  // namespace aeroselect
