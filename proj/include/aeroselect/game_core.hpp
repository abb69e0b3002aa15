#pragma once

// The Shapes matching game: login, cinematic, scenario menu, round, result,
// feedback. The machine is a pure function of (state, input); persistence
// and UI updates come back as effect values for the caller to dispatch.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aeroselect/error.hpp"
#include "aeroselect/localization.hpp"

namespace aeroselect {

struct Character {
  int id;
  std::string_view name;
  std::string_view sprite_ref;
};

// Neutral placeholders; one per board cell.
inline constexpr std::array<Character, 9> kRoster{{
    {0, "Red Circle", "char_red_circle"},
    {1, "Blue Square", "char_blue_square"},
    {2, "Green Triangle", "char_green_triangle"},
    {3, "Yellow Star", "char_yellow_star"},
    {4, "Purple Heart", "char_purple_heart"},
    {5, "Orange Diamond", "char_orange_diamond"},
    {6, "Pink Hexagon", "char_pink_hexagon"},
    {7, "Teal Moon", "char_teal_moon"},
    {8, "Brown Cross", "char_brown_cross"},
}};

struct Avatar {
  int id;
  std::string_view label;
};

inline constexpr std::array<Avatar, 6> kAvatars{{
    {0, "Fox"}, {1, "Owl"}, {2, "Bear"}, {3, "Cat"}, {4, "Frog"}, {5, "Whale"},
}};

enum class Level { Beginner, Intermediate, Advanced };

inline constexpr std::string_view to_string(Level level) {
  switch (level) {
    case Level::Beginner: return "Beginner";
    case Level::Intermediate: return "Intermediate";
    case Level::Advanced: return "Advanced";
  }
  return "?";
}

inline std::optional<Level> level_from_string(std::string_view s) {
  if (s == "Beginner" || s == "beginner") return Level::Beginner;
  if (s == "Intermediate" || s == "intermediate") return Level::Intermediate;
  if (s == "Advanced" || s == "advanced") return Level::Advanced;
  return std::nullopt;
}

struct Difficulty {
  Level level = Level::Beginner;
  int pairs_per_round = 3;
  std::optional<double> time_limit_s;

  static Difficulty preset(Level level) {
    switch (level) {
      case Level::Beginner: return {level, 3, std::nullopt};
      case Level::Intermediate: return {level, 6, std::nullopt};
      case Level::Advanced: return {level, 9, std::nullopt};
    }
    return {};
  }

  friend bool operator==(const Difficulty&, const Difficulty&) = default;
};

enum class Group { CG, EG };
enum class Method { Manual, SG };

inline constexpr std::string_view to_string(Group g) { return g == Group::CG ? "CG" : "EG"; }
inline constexpr std::string_view to_string(Method m) { return m == Method::Manual ? "Manual" : "SG"; }

inline std::optional<Group> group_from_string(std::string_view s) {
  if (s == "CG" || s == "cg") return Group::CG;
  if (s == "EG" || s == "eg") return Group::EG;
  return std::nullopt;
}

inline std::optional<Method> method_from_string(std::string_view s) {
  if (s == "Manual" || s == "manual") return Method::Manual;
  if (s == "SG" || s == "sg") return Method::SG;
  return std::nullopt;
}

inline constexpr int kSessionsPerChild = 4;

struct TrialRecord {
  std::string player_id;
  Group group = Group::EG;
  int session_index = 1;
  Method method = Method::SG;
  double elapsed_s = 0.0;
  int successes = 0;
  int failures = 0;
  double grade = 1.0;
  bool complete = true;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

inline void validate(const TrialRecord& r) {
  if (r.session_index < 1 || r.session_index > kSessionsPerChild) {
    throw Error(ErrorCode::InvalidRecord, "session_index " + std::to_string(r.session_index) + " outside 1..4");
  }
  if (!(r.elapsed_s > 0.0) || !std::isfinite(r.elapsed_s)) throw Error(ErrorCode::InvalidRecord, "elapsed_s must be > 0");
  if (r.successes < 0 || r.failures < 0) throw Error(ErrorCode::InvalidRecord, "negative counts");
  if (!(r.grade >= 1.0 && r.grade <= 10.0) || std::floor(r.grade * 2.0) != r.grade * 2.0) {
    throw Error(ErrorCode::InvalidRecord, "grade must be in [1,10] in half steps");
  }
  if (r.player_id.empty()) throw Error(ErrorCode::InvalidRecord, "empty player_id");
}

// Proportion correct on a ten-point scale, rounded half away from zero and
// clamped to the scale floor. The only place scoring policy lives.
inline int grade_trial(int successes, int failures) {
  if (successes < 0 || failures < 0) throw Error(ErrorCode::NoAttempts, "negative attempt counts");
  if (successes + failures == 0) throw Error(ErrorCode::NoAttempts, "no attempts recorded");
  const double raw = 10.0 * successes / static_cast<double>(successes + failures);
  return std::clamp(static_cast<int>(std::round(raw)), 1, 10);
}

enum class GradeBand { Surpasses, Masters, Accomplishes, NearAccomplishing, DoesNotAccomplish };

// Ecuadorian Education Ministry scale.
inline GradeBand grade_band(int grade) {
  if (grade < 1 || grade > 10) throw Error(ErrorCode::OutOfScale, "grade " + std::to_string(grade) + " outside 1..10");
  if (grade == 10) return GradeBand::Surpasses;
  if (grade == 9) return GradeBand::Masters;
  if (grade >= 7) return GradeBand::Accomplishes;
  if (grade >= 5) return GradeBand::NearAccomplishing;
  return GradeBand::DoesNotAccomplish;
}

inline constexpr std::string_view band_label(GradeBand band) {
  switch (band) {
    case GradeBand::Surpasses: return "Surpasses the learning";
    case GradeBand::Masters: return "Ace the learnings";
    case GradeBand::Accomplishes: return "Accomplishes the necessary learning";
    case GradeBand::NearAccomplishing: return "Is near accomplishing the learning";
    case GradeBand::DoesNotAccomplish: return "Doesn't accomplish the necessary";
  }
  return "?";
}

inline std::string_view grade_meaning(int grade) { return band_label(grade_band(grade)); }

struct RoundLayout {
  // Character id per cell, row-major.
  std::array<std::optional<int>, kCellCount> board{};
  // Characters in the order they are presented as targets.
  std::vector<int> target_order;

  std::optional<int> cell_of(int character) const {
    for (int i = 0; i < kCellCount; ++i) {
      if (board[static_cast<std::size_t>(i)] == character) return i;
    }
    return std::nullopt;
  }

  int occupied() const {
    return static_cast<int>(std::count_if(board.begin(), board.end(), [](const auto& c) { return c.has_value(); }));
  }

  friend bool operator==(const RoundLayout&, const RoundLayout&) = default;
};

inline RoundLayout layout_round(const Difficulty& difficulty, std::uint64_t rng_seed) {
  const int pairs = std::clamp(difficulty.pairs_per_round, 1, kCellCount);
  std::mt19937_64 rng(rng_seed);

  std::array<int, kCellCount> characters{};
  std::array<int, kCellCount> cells{};
  std::iota(characters.begin(), characters.end(), 0);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(characters.begin(), characters.end(), rng);
  std::shuffle(cells.begin(), cells.end(), rng);

  RoundLayout layout;
  for (int k = 0; k < pairs; ++k) {
    layout.board[static_cast<std::size_t>(cells[static_cast<std::size_t>(k)])] = characters[static_cast<std::size_t>(k)];
    layout.target_order.push_back(characters[static_cast<std::size_t>(k)]);
  }
  std::shuffle(layout.target_order.begin(), layout.target_order.end(), rng);
  return layout;
}

enum class Phase { AwaitLogin, Cinematic, ScenarioMenu, InRound, RoundResult, Feedback };

inline constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::AwaitLogin: return "AwaitLogin";
    case Phase::Cinematic: return "Cinematic";
    case Phase::ScenarioMenu: return "ScenarioMenu";
    case Phase::InRound: return "InRound";
    case Phase::RoundResult: return "RoundResult";
    case Phase::Feedback: return "Feedback";
  }
  return "?";
}

// The only phase changes the machine may make.
inline constexpr bool is_legal_transition(Phase from, Phase to) {
  switch (from) {
    case Phase::AwaitLogin: return to == Phase::Cinematic;
    case Phase::Cinematic: return to == Phase::ScenarioMenu;
    case Phase::ScenarioMenu: return to == Phase::InRound;
    case Phase::InRound: return to == Phase::RoundResult;
    case Phase::RoundResult: return to == Phase::Feedback;
    case Phase::Feedback: return to == Phase::ScenarioMenu;
  }
  return false;
}

struct SessionInfo {
  std::string player_id = "player";
  Group group = Group::EG;
  Method method = Method::SG;
  int session_index = 1;
};

struct RoundState {
  Difficulty difficulty;
  RoundLayout layout;
  std::size_t next_target = 0;
  int successes = 0;
  int failures = 0;
  std::int64_t started_ms = 0;

  int matched() const { return static_cast<int>(next_target); }
  int remaining() const { return static_cast<int>(layout.target_order.size() - next_target); }
  std::optional<int> current_target() const {
    if (next_target >= layout.target_order.size()) return std::nullopt;
    return layout.target_order[next_target];
  }
};

struct GameRules {
  std::array<Difficulty, 3> presets{Difficulty::preset(Level::Beginner), Difficulty::preset(Level::Intermediate),
                                    Difficulty::preset(Level::Advanced)};
  std::int64_t result_display_ms = 3000;
  std::int64_t feedback_display_ms = 3000;

  const Difficulty& preset(Level level) const { return presets[static_cast<std::size_t>(level)]; }
};

struct GameState {
  Phase phase = Phase::AwaitLogin;
  SessionInfo session;
  std::optional<int> avatar;
  std::optional<std::string> name;
  std::optional<RoundState> round;
  std::int64_t clock_ms = 0;
  std::int64_t phase_since_ms = 0;
  int rounds_played = 0;
  bool ended = false;
};

inline GameState new_game(SessionInfo session, std::int64_t start_ms = 0) {
  GameState s;
  s.session = std::move(session);
  s.clock_ms = start_ms;
  s.phase_since_ms = start_ms;
  return s;
}

// Inputs.
struct AvatarChosen {
  int avatar_id = 0;
};
struct NameEntered {
  std::string name;
};
struct CinematicDone {};
struct ScenarioChosen {
  Level level = Level::Beginner;
  std::uint64_t layout_seed = 0;
};
struct Selection {
  SelectionEvent event;
};
struct Tick {
  std::int64_t now_ms = 0;
};
struct Quit {};

using GameInput = std::variant<AvatarChosen, NameEntered, CinematicDone, ScenarioChosen, Selection, Tick, Quit>;

// Effects.
struct PhaseChanged {
  Phase from;
  Phase to;
};
struct MatchAttempt {
  GridCell cell;
  int character = 0;
  bool success = false;
};
struct RecordTrial {
  TrialRecord record;
};

using Effect = std::variant<PhaseChanged, MatchAttempt, RecordTrial>;

struct Transition {
  GameState state;
  std::vector<Effect> effects;
  std::optional<ErrorCode> error;
  std::string error_detail;

  bool accepted() const { return !error.has_value(); }
};

namespace detail {

class Machine {
 public:
  Machine(const GameState& s, const GameRules& rules) : t_{s, {}, std::nullopt, {}}, rules_(rules) {}

  Transition finish() && { return std::move(t_); }

  void reject(ErrorCode code, std::string detail) {
    t_.error = code;
    t_.error_detail = std::move(detail);
  }

  void reject_for_phase(std::string_view input) {
    reject(ErrorCode::InvalidInputForPhase,
           std::string(input) + " not accepted in phase " + std::string(to_string(t_.state.phase)));
  }

  void enter(Phase to) {
    t_.effects.push_back(PhaseChanged{t_.state.phase, to});
    t_.state.phase = to;
    t_.state.phase_since_ms = t_.state.clock_ms;
  }

  void advance_clock(std::int64_t now_ms) { t_.state.clock_ms = std::max(t_.state.clock_ms, now_ms); }

  void maybe_login() {
    if (t_.state.avatar && t_.state.name) enter(Phase::Cinematic);
  }

  void start_round(Level level, std::uint64_t seed) {
    RoundState round;
    round.difficulty = rules_.preset(level);
    round.layout = layout_round(round.difficulty, seed);
    round.started_ms = t_.state.clock_ms;
    t_.state.round = std::move(round);
    enter(Phase::InRound);
  }

  void end_round(bool complete) {
    auto& round = *t_.state.round;
    const auto& session = t_.state.session;
    TrialRecord rec;
    rec.player_id = session.player_id;
    rec.group = session.group;
    rec.session_index = session.session_index;
    rec.method = session.method;
    // One-millisecond timer resolution keeps elapsed time strictly positive.
    rec.elapsed_s = static_cast<double>(std::max<std::int64_t>(1, t_.state.clock_ms - round.started_ms)) / 1000.0;
    rec.successes = round.successes;
    rec.failures = round.failures;
    rec.grade = (round.successes + round.failures) > 0 ? grade_trial(round.successes, round.failures) : 1;
    rec.complete = complete;
    ++t_.state.rounds_played;
    t_.effects.push_back(RecordTrial{std::move(rec)});
    enter(Phase::RoundResult);
  }

  void select(const SelectionEvent& ev) {
    auto& round = *t_.state.round;
    const auto slot = static_cast<std::size_t>(ev.cell.index());
    const auto occupant = round.layout.board[slot];
    if (!occupant) return;  // empty cell: nothing to match
    const bool success = occupant == round.current_target();
    t_.effects.push_back(MatchAttempt{ev.cell, *occupant, success});
    if (success) {
      ++round.successes;
      ++round.next_target;
      round.layout.board[slot].reset();
      if (round.remaining() == 0) end_round(true);
    } else {
      ++round.failures;
    }
  }

  void tick() {
    auto& s = t_.state;
    const std::int64_t in_phase = s.clock_ms - s.phase_since_ms;
    switch (s.phase) {
      case Phase::InRound: {
        const auto& limit = s.round->difficulty.time_limit_s;
        if (limit && static_cast<double>(s.clock_ms - s.round->started_ms) >= *limit * 1000.0) end_round(false);
        break;
      }
      case Phase::RoundResult:
        if (in_phase >= rules_.result_display_ms) enter(Phase::Feedback);
        break;
      case Phase::Feedback:
        if (in_phase >= rules_.feedback_display_ms) enter(Phase::ScenarioMenu);
        break;
      default:
        break;
    }
  }

  GameState& state() { return t_.state; }

 private:
  Transition t_;
  const GameRules& rules_;
};

}  // namespace detail

// Applies one input. Rejected inputs leave the state untouched and set
// Transition::error.
inline Transition advance(const GameState& state, const GameInput& input, const GameRules& rules = {}) {
  detail::Machine m(state, rules);
  auto& s = m.state();

  if (s.ended) {
    m.reject(ErrorCode::SessionEnded, "session already ended");
    auto t = std::move(m).finish();
    t.state = state;
    return t;
  }

  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, AvatarChosen>) {
          if (s.phase != Phase::AwaitLogin) return m.reject_for_phase("AvatarChosen");
          if (in.avatar_id < 0 || in.avatar_id >= static_cast<int>(kAvatars.size())) {
            return m.reject(ErrorCode::InvalidInputForPhase, "unknown avatar " + std::to_string(in.avatar_id));
          }
          s.avatar = in.avatar_id;
          m.maybe_login();
        } else if constexpr (std::is_same_v<T, NameEntered>) {
          if (s.phase != Phase::AwaitLogin) return m.reject_for_phase("NameEntered");
          if (in.name.empty()) return m.reject(ErrorCode::InvalidInputForPhase, "empty name");
          s.name = in.name;
          m.maybe_login();
        } else if constexpr (std::is_same_v<T, CinematicDone>) {
          if (s.phase != Phase::Cinematic) return m.reject_for_phase("CinematicDone");
          m.enter(Phase::ScenarioMenu);
        } else if constexpr (std::is_same_v<T, ScenarioChosen>) {
          if (s.phase == Phase::Feedback) {
            m.enter(Phase::ScenarioMenu);
          } else if (s.phase != Phase::ScenarioMenu) {
            return m.reject_for_phase("ScenarioChosen");
          }
          m.start_round(in.level, in.layout_seed);
        } else if constexpr (std::is_same_v<T, Selection>) {
          if (s.phase != Phase::InRound) return m.reject_for_phase("Selection");
          m.advance_clock(in.event.committed_at_ms);
          m.select(in.event);
        } else if constexpr (std::is_same_v<T, Tick>) {
          m.advance_clock(in.now_ms);
          m.tick();
        } else if constexpr (std::is_same_v<T, Quit>) {
          if (s.phase == Phase::InRound) m.end_round(false);
          s.ended = true;
        }
      },
      input);

  auto t = std::move(m).finish();
  if (!t.accepted()) {
    t.state = state;
    t.effects.clear();
  }
  return t;
}

// Throwing convenience wrapper.
inline Transition advance_or_throw(const GameState& state, const GameInput& input, const GameRules& rules = {}) {
  auto t = advance(state, input, rules);
  if (t.error) throw Error(*t.error, t.error_detail);
  return t;
}

inline void to_json(nlohmann::json& j, const TrialRecord& r) {
  j = nlohmann::json{{"player_id", r.player_id},
                     {"group", to_string(r.group)},
                     {"session_index", r.session_index},
                     {"method", to_string(r.method)},
                     {"elapsed_s", r.elapsed_s},
                     {"successes", r.successes},
                     {"failures", r.failures},
                     {"grade", r.grade},
                     {"complete", r.complete}};
}

inline void from_json(const nlohmann::json& j, TrialRecord& r) {
  r.player_id = j.at("player_id").get<std::string>();
  const auto group = group_from_string(j.at("group").get<std::string>());
  const auto method = method_from_string(j.at("method").get<std::string>());
  if (!group || !method) throw Error(ErrorCode::InvalidRecord, "unknown group or method");
  r.group = *group;
  r.method = *method;
  r.session_index = j.at("session_index").get<int>();
  r.elapsed_s = j.at("elapsed_s").get<double>();
  r.successes = j.at("successes").get<int>();
  r.failures = j.at("failures").get<int>();
  r.grade = j.at("grade").get<double>();
  r.complete = j.value("complete", true);
}

inline nlohmann::json round_layout_json(const RoundLayout& layout) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : layout.board) {
    if (c) {
      const auto& ch = kRoster[static_cast<std::size_t>(*c)];
      cells.push_back({{"character", ch.id}, {"name", ch.name}, {"sprite", ch.sprite_ref}});
    } else {
      cells.push_back(nullptr);
    }
  }
  return nlohmann::json{{"cells", cells}, {"target_order", layout.target_order}};
}

inline nlohmann::json snapshot_json(const GameState& s) {
  nlohmann::json j{{"phase", to_string(s.phase)},
                   {"clock_ms", s.clock_ms},
                   {"ended", s.ended},
                   {"rounds_played", s.rounds_played},
                   {"player",
                    {{"id", s.session.player_id},
                     {"avatar", s.avatar ? nlohmann::json(*s.avatar) : nlohmann::json(nullptr)},
                     {"name", s.name ? nlohmann::json(*s.name) : nlohmann::json(nullptr)}}}};
  if (s.round) {
    const auto& r = *s.round;
    j["round"] = {{"difficulty", to_string(r.difficulty.level)},
                  {"pairs_per_round", r.difficulty.pairs_per_round},
                  {"layout", round_layout_json(r.layout)},
                  {"current_target", r.current_target() ? nlohmann::json(*r.current_target()) : nlohmann::json(nullptr)},
                  {"matched", r.matched()},
                  {"remaining", r.remaining()},
                  {"successes", r.successes},
                  {"failures", r.failures}};
  }
  return j;
}

}  // namespace aeroselect
