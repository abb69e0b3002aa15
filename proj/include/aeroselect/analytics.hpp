#pragma once

// Study analysis: six-number summaries, Shapiro-Wilk screening, Wilcoxon
// rank-sum comparison of Manual vs SG, Tukey boxplot data, and a synthetic
// cohort generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aeroselect/error.hpp"
#include "aeroselect/game_core.hpp"
#include "aeroselect/normal.hpp"

namespace aeroselect {

// Column schema of the study tables: Min, 1st, Median, Mean, 3rd, Max.
struct SixNumberSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

namespace detail {

inline void check_sample(std::span<const double> sample) {
  if (sample.empty()) throw Error(ErrorCode::EmptySample, "sample is empty");
  for (double v : sample) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "sample contains a non-finite value");
  }
}

inline std::vector<double> sorted_copy(std::span<const double> sample) {
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  return x;
}

// Hyndman-Fan type 7: h = (n - 1) p, linear between order statistics.
inline double quantile_sorted(const std::vector<double>& x, double p) {
  const double h = static_cast<double>(x.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

}  // namespace detail

inline double quantile(std::span<const double> sample, double p) {
  detail::check_sample(sample);
  return detail::quantile_sorted(detail::sorted_copy(sample), p);
}

inline SixNumberSummary summarize(std::span<const double> sample) {
  detail::check_sample(sample);
  const auto x = detail::sorted_copy(sample);
  SixNumberSummary s;
  s.min = x.front();
  s.max = x.back();
  s.q1 = detail::quantile_sorted(x, 0.25);
  s.median = detail::quantile_sorted(x, 0.5);
  s.q3 = detail::quantile_sorted(x, 0.75);
  s.mean = std::clamp(std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()), s.min, s.max);
  return s;
}

struct BoxplotData {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double lower_whisker = 0.0;  // most extreme datum >= q1 - 1.5 IQR
  double upper_whisker = 0.0;  // most extreme datum <= q3 + 1.5 IQR
  std::vector<double> outliers;
};

inline BoxplotData boxplot(std::span<const double> sample) {
  detail::check_sample(sample);
  const auto x = detail::sorted_copy(sample);
  BoxplotData b;
  b.q1 = detail::quantile_sorted(x, 0.25);
  b.median = detail::quantile_sorted(x, 0.5);
  b.q3 = detail::quantile_sorted(x, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.lower_whisker = b.q1;
  b.upper_whisker = b.q3;
  for (double v : x) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
    } else {
      b.lower_whisker = std::min(b.lower_whisker, v);
      b.upper_whisker = std::max(b.upper_whisker, v);
    }
  }
  return b;
}

struct NormalityVerdict {
  double w_statistic = 1.0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool is_normal_at_alpha = true;
};

// ---------------------------------------------------------------------------
// Shapiro-Wilk W with Royston's (1995) AS R94 approximations for the
// coefficients and for the null distribution of W. Valid for 3 <= n <= 5000.

namespace detail {

template <std::size_t N>
double poly(const std::array<double, N>& c, double x) {
  double r = 0.0;
  for (std::size_t i = N; i-- > 0;) r = r * x + c[i];
  return r;
}

// Half of the antisymmetric weight vector: a[i] pairs x_(n-1-i) with x_(i).
inline std::vector<double> shapiro_wilk_weights(std::size_t n) {
  static constexpr std::array<double, 6> c1{0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr std::array<double, 6> c2{0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};

  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }

  const double an = static_cast<double>(n);
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = stats::normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(an);
  const double a1 = poly(c1, rsn) - m[0] / ssumm2;

  std::size_t first_scaled;
  double fac;
  if (n > 5) {
    const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[1] = a2;
    first_scaled = 2;
  } else {
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    first_scaled = 1;
  }
  a[0] = a1;
  for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

inline double shapiro_wilk_p(double w, std::size_t n) {
  static constexpr std::array<double, 4> c3{0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr std::array<double, 4> c4{1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr std::array<double, 4> c5{-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr std::array<double, 3> c6{-0.4803, -0.082676, 0.0030302};
  static constexpr std::array<double, 2> g{-2.273, 0.459};

  if (n == 3) {
    constexpr double six_over_pi = 1.90985931710274;
    constexpr double asin_sqrt_three_quarters = 1.04719755119660;
    return std::clamp(six_over_pi * (std::asin(std::sqrt(w)) - asin_sqrt_three_quarters), 0.0, 1.0);
  }
  const double w1 = 1.0 - w;
  if (!(w1 > 0.0)) return 1.0;
  double y = std::log(w1);
  const double an = static_cast<double>(n);
  double mean, sd;
  if (n <= 11) {
    const double gamma = poly(g, an);
    if (y >= gamma) return 1e-99;
    y = -std::log(gamma - y);
    mean = poly(c3, an);
    sd = std::exp(poly(c4, an));
  } else {
    const double xx = std::log(an);
    mean = poly(c5, xx);
    sd = std::exp(poly(c6, xx));
  }
  return std::clamp(stats::normal_sf((y - mean) / sd), 0.0, 1.0);
}

}  // namespace detail

inline NormalityVerdict shapiro_wilk(std::span<const double> sample, double alpha = 0.05) {
  const std::size_t n = sample.size();
  if (n < 3) throw Error(ErrorCode::SampleTooSmall, "Shapiro-Wilk needs n >= 3, got " + std::to_string(n));
  if (n > 5000) throw Error(ErrorCode::SampleTooLarge, "Shapiro-Wilk needs n <= 5000, got " + std::to_string(n));
  detail::check_sample(sample);
  const auto x = detail::sorted_copy(sample);
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw Error(ErrorCode::ZeroVariance, "all values are equal");

  // Work on range-scaled values for conditioning.
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (x[i] - x.front()) / range;
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n);
  double ssq = 0.0;
  for (double v : z) ssq += (v - mean) * (v - mean);

  const auto a = detail::shapiro_wilk_weights(n);
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += a[i] * (z[n - 1 - i] - z[i]);

  NormalityVerdict v;
  v.w_statistic = std::min(1.0, num * num / ssq);
  v.p_value = detail::shapiro_wilk_p(v.w_statistic, n);
  v.alpha = alpha;
  v.is_normal_at_alpha = v.p_value > alpha;
  return v;
}

// ---------------------------------------------------------------------------
// Wilcoxon rank-sum / Mann-Whitney U.

enum class RankSumMethod { Exact, NormalApproximation };

inline constexpr std::string_view to_string(RankSumMethod m) {
  return m == RankSumMethod::Exact ? "exact" : "normal-approximation";
}

struct RankSumOptions {
  // Exact null distribution when n_a + n_b is at most this and there are no ties.
  std::size_t exact_threshold = 16;
  bool force_approximation = false;
  bool continuity_correction = true;
};

struct RankSumResult {
  double u_statistic = 0.0;  // for sample_a
  double p_value = 1.0;      // two-sided
  RankSumMethod method = RankSumMethod::Exact;
  bool tie_correction_applied = false;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

// Null frequencies of U for sample sizes (n_a, n_b) without ties: entry u is
// the number of rank subsets giving U = u. Counted by subset-sum dynamic
// programming over ranks 1..n_a+n_b; exact in double up to 2^53.
inline std::vector<double> rank_sum_null_counts(std::size_t n_a, std::size_t n_b) {
  const std::size_t n = n_a + n_b;
  const std::size_t max_sum = n * (n + 1) / 2;
  // ways[c][s]: subsets of size c with rank sum s.
  std::vector<std::vector<double>> ways(n_a + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t rank = 1; rank <= n; ++rank) {
    for (std::size_t c = std::min(rank, n_a); c >= 1; --c) {
      for (std::size_t s = max_sum; s >= rank; --s) ways[c][s] += ways[c - 1][s - rank];
    }
  }
  const std::size_t offset = n_a * (n_a + 1) / 2;
  std::vector<double> counts(n_a * n_b + 1, 0.0);
  for (std::size_t u = 0; u < counts.size(); ++u) counts[u] = ways[n_a][u + offset];
  return counts;
}

// Two-sided exact p: twice the smaller tail, capped at 1.
inline double rank_sum_exact_p(double u, std::size_t n_a, std::size_t n_b) {
  const auto counts = rank_sum_null_counts(n_a, n_b);
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double lower = 0.0, upper = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double kv = static_cast<double>(k);
    if (kv <= u + 1e-9) lower += counts[k];
    if (kv >= u - 1e-9) upper += counts[k];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

namespace detail {

struct Ranking {
  std::vector<double> ranks;  // mid-ranks, in input order (a then b)
  double tie_term = 0.0;      // sum of t^3 - t over tie groups
  bool has_ties = false;
};

inline Ranking midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> values;
  values.reserve(n);
  values.insert(values.end(), a.begin(), a.end());
  values.insert(values.end(), b.begin(), b.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

  Ranking r;
  r.ranks.assign(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = mid;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1.0) {
      r.has_ties = true;
      r.tie_term += t * t * t - t;
    }
    i = j + 1;
  }
  return r;
}

}  // namespace detail

inline RankSumResult wilcoxon_rank_sum(std::span<const double> sample_a, std::span<const double> sample_b,
                                       const RankSumOptions& options = {}) {
  detail::check_sample(sample_a);
  detail::check_sample(sample_b);
  const std::size_t na = sample_a.size();
  const std::size_t nb = sample_b.size();
  const auto ranking = detail::midranks(sample_a, sample_b);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranking.ranks[i];

  RankSumResult res;
  res.n_a = na;
  res.n_b = nb;
  res.u_statistic = rank_sum_a - static_cast<double>(na * (na + 1)) / 2.0;

  const bool exact = !options.force_approximation && !ranking.has_ties && na + nb <= options.exact_threshold;
  if (exact) {
    res.method = RankSumMethod::Exact;
    res.p_value = rank_sum_exact_p(res.u_statistic, na, nb);
    return res;
  }

  res.method = RankSumMethod::NormalApproximation;
  res.tie_correction_applied = ranking.has_ties;
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb);
  const double n = dna + dnb;
  const double mu = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((n + 1.0) - ranking.tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) {
    res.p_value = 1.0;
    return res;
  }
  double d = res.u_statistic - mu;
  if (options.continuity_correction) d -= (d > 0.0) ? 0.5 : (d < 0.0 ? -0.5 : 0.0);
  const double z = d / std::sqrt(var);
  res.p_value = std::min(1.0, 2.0 * std::min(stats::normal_cdf(z), stats::normal_sf(z)));
  return res;
}

// ---------------------------------------------------------------------------
// Manual vs SG comparison.

enum class Measure { Time, Grade };

inline constexpr std::string_view to_string(Measure m) { return m == Measure::Time ? "time" : "grade"; }

inline std::optional<Measure> measure_from_string(std::string_view s) {
  if (s == "time") return Measure::Time;
  if (s == "grade") return Measure::Grade;
  return std::nullopt;
}

// Time is analyzed in minutes, grades in grade points.
inline double measure_value(const TrialRecord& r, Measure m) {
  return m == Measure::Time ? r.elapsed_s / 60.0 : r.grade;
}

struct NormalityScreen {
  std::optional<NormalityVerdict> verdict;
  std::optional<ErrorCode> error;  // SW not computable (too small, zero variance)

  bool rejects_normality() const { return !verdict || !verdict->is_normal_at_alpha; }
};

struct MethodAnalysis {
  std::size_t n = 0;
  SixNumberSummary summary;
  NormalityScreen normality;
  BoxplotData boxplot;
};

struct GroupComparison {
  Measure measure = Measure::Time;
  double alpha = 0.05;
  MethodAnalysis manual;
  MethodAnalysis sg;
  // True when Shapiro-Wilk rejected (or could not be computed for) either
  // sample, which is what sends the comparison down the rank-based route.
  bool nonparametric_required = true;
  RankSumResult test;
};

namespace detail {

inline NormalityScreen screen(std::span<const double> sample, double alpha) {
  NormalityScreen s;
  try {
    s.verdict = shapiro_wilk(sample, alpha);
  } catch (const Error& e) {
    s.error = e.code();
  }
  return s;
}

inline MethodAnalysis analyze_method(std::span<const double> sample, double alpha) {
  return {sample.size(), summarize(sample), screen(sample, alpha), boxplot(sample)};
}

}  // namespace detail

inline GroupComparison compare_groups(std::span<const TrialRecord> records, Measure measure, double alpha = 0.05,
                                      const RankSumOptions& options = {}) {
  std::vector<double> manual, sg;
  for (const auto& r : records) (r.method == Method::Manual ? manual : sg).push_back(measure_value(r, measure));
  if (manual.empty() || sg.empty()) {
    throw Error(ErrorCode::MissingMethod, manual.empty() ? "no Manual records" : "no SG records");
  }
  GroupComparison c;
  c.measure = measure;
  c.alpha = alpha;
  c.manual = detail::analyze_method(manual, alpha);
  c.sg = detail::analyze_method(sg, alpha);
  c.nonparametric_required = c.manual.normality.rejects_normality() || c.sg.normality.rejects_normality();
  c.test = wilcoxon_rank_sum(sg, manual, options);
  return c;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts.
//
// Each child gets a latent ability theta ~ N(0, ability_sd). Per session:
//   log(minutes)  = log(median_time) - ability_time_effect*theta
//                   - learning_time_per_session*(s-1) + N(0, time_log_sd)
//   successes     ~ Binomial(attempts, logistic(success_logit + theta
//                   + learning_logit_per_session*(s-1)))
// CG plays Manual, EG plays SG.

struct CohortSpec {
  int children_per_group = 20;
  int sessions = kSessionsPerChild;
  int attempts_per_session = 10;
  double manual_time_median_min = 4.8;
  double sg_time_median_min = 3.6;
  double time_log_sd = 0.06;
  double ability_sd = 0.5;
  double ability_time_effect = 0.03;
  double learning_time_per_session = 0.01;
  double manual_success_logit = 1.4;
  double sg_success_logit = 2.45;
  double learning_logit_per_session = 0.1;

  void validate() const {
    if (children_per_group < 1) throw Error(ErrorCode::InvalidCohortSpec, "children_per_group must be >= 1");
    if (sessions < 1 || sessions > kSessionsPerChild) throw Error(ErrorCode::InvalidCohortSpec, "sessions must be in 1..4");
    if (attempts_per_session < 1) throw Error(ErrorCode::InvalidCohortSpec, "attempts_per_session must be >= 1");
    if (!(manual_time_median_min > 0.0) || !(sg_time_median_min > 0.0)) {
      throw Error(ErrorCode::InvalidCohortSpec, "time medians must be positive");
    }
    if (!(time_log_sd >= 0.0) || !(ability_sd >= 0.0)) throw Error(ErrorCode::InvalidCohortSpec, "negative spread");
  }
};

inline void to_json(nlohmann::json& j, const CohortSpec& c) {
  j = nlohmann::json{{"children_per_group", c.children_per_group},
                     {"sessions", c.sessions},
                     {"attempts_per_session", c.attempts_per_session},
                     {"manual_time_median_min", c.manual_time_median_min},
                     {"sg_time_median_min", c.sg_time_median_min},
                     {"time_log_sd", c.time_log_sd},
                     {"ability_sd", c.ability_sd},
                     {"ability_time_effect", c.ability_time_effect},
                     {"learning_time_per_session", c.learning_time_per_session},
                     {"manual_success_logit", c.manual_success_logit},
                     {"sg_success_logit", c.sg_success_logit},
                     {"learning_logit_per_session", c.learning_logit_per_session}};
}

inline void from_json(const nlohmann::json& j, CohortSpec& c) {
  const CohortSpec d;
  c.children_per_group = j.value("children_per_group", d.children_per_group);
  c.sessions = j.value("sessions", d.sessions);
  c.attempts_per_session = j.value("attempts_per_session", d.attempts_per_session);
  c.manual_time_median_min = j.value("manual_time_median_min", d.manual_time_median_min);
  c.sg_time_median_min = j.value("sg_time_median_min", d.sg_time_median_min);
  c.time_log_sd = j.value("time_log_sd", d.time_log_sd);
  c.ability_sd = j.value("ability_sd", d.ability_sd);
  c.ability_time_effect = j.value("ability_time_effect", d.ability_time_effect);
  c.learning_time_per_session = j.value("learning_time_per_session", d.learning_time_per_session);
  c.manual_success_logit = j.value("manual_success_logit", d.manual_success_logit);
  c.sg_success_logit = j.value("sg_success_logit", d.sg_success_logit);
  c.learning_logit_per_session = j.value("learning_logit_per_session", d.learning_logit_per_session);
}

inline std::vector<TrialRecord> simulate_study(const CohortSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  std::vector<TrialRecord> out;
  out.reserve(static_cast<std::size_t>(2 * spec.children_per_group * spec.sessions));
  for (Group group : {Group::CG, Group::EG}) {
    const Method method = group == Group::CG ? Method::Manual : Method::SG;
    const double median = method == Method::Manual ? spec.manual_time_median_min : spec.sg_time_median_min;
    const double logit = method == Method::Manual ? spec.manual_success_logit : spec.sg_success_logit;
    for (int child = 1; child <= spec.children_per_group; ++child) {
      const double theta = spec.ability_sd * std_normal(rng);
      char id[32];
      std::snprintf(id, sizeof id, "%s-%02d", std::string(to_string(group)).c_str(), child);
      for (int s = 1; s <= spec.sessions; ++s) {
        const double learned = static_cast<double>(s - 1);
        const double log_min = std::log(median) - spec.ability_time_effect * theta -
                               spec.learning_time_per_session * learned + spec.time_log_sd * std_normal(rng);
        const double p = 1.0 / (1.0 + std::exp(-(logit + theta + spec.learning_logit_per_session * learned)));
        std::binomial_distribution<int> attempts(spec.attempts_per_session, p);

        TrialRecord r;
        r.player_id = id;
        r.group = group;
        r.method = method;
        r.session_index = s;
        r.elapsed_s = 60.0 * std::exp(log_min);
        r.successes = attempts(rng);
        r.failures = spec.attempts_per_session - r.successes;
        r.grade = grade_trial(r.successes, r.failures);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON report.

inline void to_json(nlohmann::json& j, const SixNumberSummary& s) {
  j = nlohmann::json{{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"mean", s.mean}, {"q3", s.q3}, {"max", s.max}};
}

inline void to_json(nlohmann::json& j, const BoxplotData& b) {
  j = nlohmann::json{{"q1", b.q1},
                     {"median", b.median},
                     {"q3", b.q3},
                     {"lower_whisker", b.lower_whisker},
                     {"upper_whisker", b.upper_whisker},
                     {"outliers", b.outliers}};
}

inline void to_json(nlohmann::json& j, const NormalityScreen& s) {
  if (s.verdict) {
    j = nlohmann::json{{"w_statistic", s.verdict->w_statistic},
                       {"p_value", s.verdict->p_value},
                       {"alpha", s.verdict->alpha},
                       {"is_normal_at_alpha", s.verdict->is_normal_at_alpha}};
  } else {
    j = nlohmann::json{{"error", to_string(s.error.value_or(ErrorCode::SampleTooSmall))}};
  }
}

inline void to_json(nlohmann::json& j, const RankSumResult& r) {
  j = nlohmann::json{{"u_statistic", r.u_statistic},
                     {"p_value", r.p_value},
                     {"method", to_string(r.method)},
                     {"tie_correction_applied", r.tie_correction_applied},
                     {"n_a", r.n_a},
                     {"n_b", r.n_b}};
}

inline void to_json(nlohmann::json& j, const GroupComparison& c) {
  j = nlohmann::json{
      {"measure", to_string(c.measure)},
      {"unit", c.measure == Measure::Time ? "minutes" : "grade points"},
      {"alpha", c.alpha},
      {"n", {{"Manual", c.manual.n}, {"SG", c.sg.n}}},
      {"summaries", {{"Manual", c.manual.summary}, {"SG", c.sg.summary}}},
      {"normality", {{"Manual", c.manual.normality}, {"SG", c.sg.normality}}},
      {"nonparametric_required", c.nonparametric_required},
      // U is reported for the SG sample against Manual.
      {"test", c.test},
      {"boxplot_data", {{"Manual", c.manual.boxplot}, {"SG", c.sg.boxplot}}},
  };
}

// Boxplot rows for spreadsheet tools.
inline std::string boxplot_csv(const GroupComparison& c) {
  std::string out = "method,q1,median,q3,lower_whisker,upper_whisker,outliers\n";
  const auto row = [&](std::string_view name, const BoxplotData& b) {
    std::string outliers;
    for (std::size_t i = 0; i < b.outliers.size(); ++i) {
      if (i) outliers += ';';
      outliers += nlohmann::json(b.outliers[i]).dump();
    }
    out += std::string(name) + ',' + nlohmann::json(b.q1).dump() + ',' + nlohmann::json(b.median).dump() + ',' +
           nlohmann::json(b.q3).dump() + ',' + nlohmann::json(b.lower_whisker).dump() + ',' +
           nlohmann::json(b.upper_whisker).dump() + ',' + outliers + '\n';
  };
  row("Manual", c.manual.boxplot);
  row("SG", c.sg.boxplot);
  return out;
}

}  // namespace aeroselect
