// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "aeroselect/aeroselect.hpp"
#include "oracles.hpp"

using namespace aeroselect;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome codec() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> echo(0, kMaxEchoUs);
  int round_trip_failures = 0, false_frames = 0, missed = 0;
  for (int i = 0; i < 10000; ++i) {
    RangeFrame f;
    f.seq = static_cast<std::uint8_t>(byte(rng));
    for (auto& e : f.echo_us) e = static_cast<std::uint16_t>(echo(rng));
    const auto bytes = encode_frame(f);
    const auto r = parse_frame(bytes);
    if (r.status != ParseStatus::Ok || *r.frame != f || r.consumed != kFrameSize) ++round_trip_failures;

    std::vector<std::uint8_t> stream(64);
    for (auto& b : stream) b = static_cast<std::uint8_t>(byte(rng));
    stream.insert(stream.end(), bytes.begin(), bytes.end());
    FrameReader reader;
    reader.feed(stream);
    std::vector<RangeFrame> got;
    while (auto g = reader.next()) got.push_back(*g);
    if (got.empty() || got.back() != f) ++missed;
    false_frames += static_cast<int>(got.size()) - (got.empty() || got.back() != f ? 0 : 1);
  }
  return {round_trip_failures == 0 && false_frames == 0 && missed == 0,
          fmt("round-trip failures %d/10000, garbage-prefix false frames %d, missed %d", round_trip_failures,
              false_frames, missed)};
}

Outcome trilateration() {
  const auto g = SensorGeometry::default_geometry();
  double worst_lattice = 0.0;
  for (int x = 0; x <= 300; x += 10) {
    for (int y = 0; y <= 300; y += 10) {
      const Point2 p{double(x), double(y)};
      const auto est = trilaterate(oracle::ranges_from(g, p), g);
      worst_lattice = std::max(worst_lattice, distance(est.position_mm, p));
    }
  }

  // 10,000 noisy frames per cell center through the device simulator.
  double worst_rate = 1.0;
  int worst_cell = -1;
  double worst_oracle = 0.0;
  for (int cell = 0; cell < kCellCount; ++cell) {
    const Point2 c = cell_center(GridCell::from_index(cell), g);
    const Trajectory still(std::vector<TrajectoryPoint>{{0, c}, {9999, c}});
    const auto frames = simulate_stream(g, still, 2.0, 1000.0, 500 + static_cast<std::uint64_t>(cell));
    int correct = 0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const auto est = ranges_to_position(frames[k], g);
      const auto got = position_to_cell(est, g);
      if (got && got->index() == cell) ++correct;
      if (k < 25) {
        std::array<double, 3> d{};
        for (std::size_t i = 0; i < 3; ++i) d[i] = g.echo_to_range_mm(frames[k].echo_us[i]);
        worst_oracle = std::max(worst_oracle, distance(est.position_mm, oracle::grid_minimizer(g, d)));
      }
    }
    const double rate = correct / static_cast<double>(frames.size());
    if (worst_cell < 0 || rate < worst_rate) {
      worst_rate = rate;
      worst_cell = cell;
    }
  }
  return {worst_lattice <= 1e-6 && worst_rate >= 0.99 && worst_oracle <= 3.0,
          fmt("lattice max error %.2e mm; worst cell %d correct %.4f; max distance to brute-force minimizer %.3f mm "
              "(225 draws)",
              worst_lattice, worst_cell, worst_rate, worst_oracle)};
}

Outcome wilcoxon() {
  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> v(0.0, 1.0);
  std::uniform_int_distribution<int> total(2, 12);
  double worst = 0.0;
  int not_exact = 0;
  for (int i = 0; i < 500; ++i) {
    const int n = total(rng);
    const int na = std::uniform_int_distribution<int>(1, n - 1)(rng);
    std::vector<double> a(static_cast<std::size_t>(na)), b(static_cast<std::size_t>(n - na));
    const double shift = v(rng) - 0.5;
    for (auto& x : a) x = v(rng) + shift;
    for (auto& x : b) x = v(rng);
    const auto r = wilcoxon_rank_sum(a, b);
    if (r.method != RankSumMethod::Exact) ++not_exact;
    worst = std::max(worst, std::abs(r.p_value - oracle::enumerate_rank_sum_p(a, b)));
  }
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto sep = wilcoxon_rank_sum(a, b);
  const bool sep_ok = sep.u_statistic == 0.0 && std::abs(sep.p_value - 0.1) <= 1e-12;
  return {worst <= 1e-12 && not_exact == 0 && sep_ok,
          fmt("500 instances max |p - enumeration| %.1e (non-exact %d); [1,2,3] vs [4,5,6]: U=%g p=%.15g", worst,
              not_exact, sep.u_statistic, sep.p_value)};
}

Outcome shapiro() {
  std::mt19937_64 rng(4004);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  int null_rejections = 0;
  std::vector<double> x(20);
  for (int i = 0; i < 10000; ++i) {
    for (auto& v : x) v = normal(rng);
    if (!shapiro_wilk(x, 0.05).is_normal_at_alpha) ++null_rejections;
  }
  int power_rejections = 0;
  std::vector<double> y(50);
  for (int i = 0; i < 1000; ++i) {
    for (auto& v : y) v = expo(rng);
    if (!shapiro_wilk(y, 0.05).is_normal_at_alpha) ++power_rejections;
  }
  const double size = null_rejections / 10000.0, power = power_rejections / 1000.0;
  return {size >= 0.04 && size <= 0.06 && power > 0.9,
          fmt("null rejection %.4f (n=20, 10000 samples); power %.3f (exponential n=50, 1000 samples)", size, power)};
}

Outcome pipeline_direction() {
  int ok = 0;
  double worst_time_p = 0.0, worst_grade_p = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto records = simulate_study({}, seed);
    const auto t = compare_groups(records, Measure::Time);
    const auto g = compare_groups(records, Measure::Grade);
    worst_time_p = std::max(worst_time_p, t.test.p_value);
    worst_grade_p = std::max(worst_grade_p, g.test.p_value);
    if (t.sg.summary.median < t.manual.summary.median && t.test.p_value < 0.01 && g.test.p_value < 0.01 &&
        g.sg.summary.mean > g.manual.summary.mean) {
      ++ok;
    }
  }
  return {ok == 20, fmt("%d/20 seeds with SG faster and higher-graded; max p time %.2e, grade %.2e", ok, worst_time_p,
                        worst_grade_p)};
}

Outcome end_to_end() {
  const auto base = fs::temp_directory_path() / ("aeroselect_accept_" + std::to_string(::getpid()));
  fs::remove_all(base);
  SessionRequest req;
  req.session = {"kid-01", Group::EG, Method::SG, 1};
  req.name = "Kid";
  req.level = Level::Beginner;
  req.layout_seed = 2024;

  std::string logs[2];
  SessionSummary summary;
  for (int run = 0; run < 2; ++run) {
    ServiceConfig c;
    c.data_dir = base / std::to_string(run);
    c.replay_epoch_ms = 1700000000000;
    const auto cells = target_cells(layout_round(c.rules.preset(req.level), req.layout_seed));
    const auto traj = hover_trajectory(c.geometry, cells, 1000, 200);
    MemoryByteSource src(encode_stream(simulate_stream(c.geometry, traj, 0.0, c.frame_rate_hz, 7)));
    summary = run_session(c, src, req);
    logs[run] = read_file(summary.log_path);
  }
  fs::remove_all(base);
  if (summary.records.size() != 1) return {false, fmt("expected 1 record, got %zu", summary.records.size())};
  const auto& r = summary.records[0];
  const auto meaning = grade_meaning(static_cast<int>(r.grade));
  const bool identical = !logs[0].empty() && logs[0] == logs[1];
  return {identical && summary.selections == 3 && r.failures == 0 && r.grade == 10 &&
              meaning == "Surpasses the learning",
          fmt("selections %llu, failures %d, grade %g \"%s\", logs byte-identical: %s",
              static_cast<unsigned long long>(summary.selections), r.failures, r.grade, std::string(meaning).c_str(),
              identical ? "yes" : "no")};
}

Outcome fuzz() {
  std::mt19937_64 rng(7007);
  std::uniform_int_distribution<int> kind(0, 6), cell(0, 8), avatar(-1, 6), len(1, 60), level(0, 2), dt(0, 2000);
  std::bernoulli_distribution coin(0.5);
  std::uint64_t violations = 0, transitions = 0, rounds = 0;
  for (int seq = 0; seq < 100000; ++seq) {
    auto s = new_game({"fuzz", Group::EG, Method::SG, 1});
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      GameInput in;
      switch (kind(rng)) {
        case 0: in = AvatarChosen{avatar(rng)}; break;
        case 1: in = NameEntered{coin(rng) ? "kid" : ""}; break;
        case 2: in = CinematicDone{}; break;
        case 3: in = ScenarioChosen{static_cast<Level>(level(rng)), rng()}; break;
        case 4: {
          int c = cell(rng);
          // Half the time aim at the current target so rounds finish.
          if (s.round && s.round->current_target() && coin(rng)) c = *s.round->layout.cell_of(*s.round->current_target());
          in = Selection{{GridCell::from_index(c), s.clock_ms + dt(rng), 800}};
          break;
        }
        case 5: in = Tick{s.clock_ms + dt(rng) * 3}; break;
        default: in = coin(rng) && coin(rng) ? GameInput{Quit{}} : GameInput{Tick{s.clock_ms}}; break;
      }
      const auto t = aeroselect::advance(s, in);
      if (!t.accepted()) {
        if (t.state.phase != s.phase || t.state.clock_ms != s.clock_ms || !t.effects.empty()) ++violations;
        continue;
      }
      // Every phase change is an allowed edge and the chain is contiguous.
      Phase cur = s.phase;
      for (const auto& e : t.effects) {
        if (const auto* pc = std::get_if<PhaseChanged>(&e)) {
          if (pc->from != cur || !is_legal_transition(pc->from, pc->to)) ++violations;
          cur = pc->to;
          ++transitions;
          if (pc->to == Phase::RoundResult) ++rounds;
        }
      }
      if (cur != t.state.phase) ++violations;
      s = t.state;
      if (s.phase == Phase::InRound) {
        const auto& r = *s.round;
        if (r.matched() + r.remaining() != r.difficulty.pairs_per_round || r.successes != r.matched()) ++violations;
      }
    }
  }
  return {violations == 0, fmt("100000 sequences, %llu phase changes, %llu rounds closed, %llu violations",
                               static_cast<unsigned long long>(transitions), static_cast<unsigned long long>(rounds),
                               static_cast<unsigned long long>(violations))};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"codec round-trip and resync", 5, codec},
      {"trilateration accuracy and cell classification", 60, trilateration},
      {"rank-sum exact path vs enumeration", 30, wilcoxon},
      {"Shapiro-Wilk calibration and power", 120, shapiro},
      {"study pipeline direction across 20 seeds", 60, pipeline_direction},
      {"end-to-end scripted replay", 60, end_to_end},
      {"game-flow fuzz", 600, fuzz},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < c.limit_s;
    failures += pass ? 0 : 1;
    std::printf("%s  %-48s %7.2f s (limit %g s)  %s\n", pass ? "PASS" : "FAIL", c.name, secs, c.limit_s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
