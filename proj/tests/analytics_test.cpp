#include <gtest/gtest.h>

#include <random>

#include "aeroselect/analytics.hpp"
#include "oracles.hpp"

using namespace aeroselect;

namespace {

// Reference values from scipy.stats.shapiro / mannwhitneyu (scipy 1.15.3).
const std::vector<double> kSeededNormal20{
    -0.21118912055729136, -0.5177334709845255, 0.1495958369624623,  -1.7898968436779759, 0.2844522535691842,
    -0.3216956064836901,  -0.726050324449302,  0.09853727513129668, -1.9514738484064804, -0.15841288562715672,
    -0.7312848653804448,  0.40969535789355127, 0.44244173776631784, -0.9278626907702291, -0.9331679527718499,
    -1.4700371639889616,  -0.7876892940867893, 0.3194143920162998,  0.8572703661247674,  0.22879972296310866};

struct SwFixture {
  std::vector<double> sample;
  double w;
  double p;
};

const std::vector<SwFixture> kShapiroFixtures{
    {kSeededNormal20, 0.9519150912036414, 0.39709889593342174},
    {{.139, .157, .175, .256, .344, .413, .503, .577, .614, .655, .954, 1.392, 1.557,
      1.648, 1.690, 1.994, 2.174, 2.206, 3.245, 3.510, 3.571, 4.354, 4.980, 6.084, 8.351},
     0.8346662753381485,
     0.0009134904825887374},
    {{1, 2, 4}, 0.9642857142857142, 0.6368868450289689},
    {{2.1, 3.3, 3.4, 5.0, 9.1}, 0.8604743708663887, 0.22995653540674516},
    {{1, 2, 3, 4, 5, 6, 7, 8, 9, 30}, 0.6698890078433926, 0.0003809682833082067},
};

double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

TrialRecord rec(Method m, double minutes, double grade = 8) {
  TrialRecord r;
  r.player_id = "p";
  r.method = m;
  r.group = m == Method::Manual ? Group::CG : Group::EG;
  r.elapsed_s = minutes * 60.0;
  r.grade = grade;
  return r;
}

}  // namespace

TEST(Summary, Singleton) {
  const std::vector<double> x{5};
  const auto s = summarize(x);
  for (double v : {s.min, s.q1, s.median, s.mean, s.q3, s.max}) EXPECT_EQ(v, 5);
}

TEST(Summary, FourValues) {
  const std::vector<double> x{4, 2, 1, 3};
  const auto s = summarize(x);
  EXPECT_DOUBLE_EQ(s.min, 1);
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.q3, 3.25);
  EXPECT_DOUBLE_EQ(s.max, 4);
}

TEST(Summary, EmptyAndNonFinite) {
  const std::vector<double> empty;
  try {
    summarize(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySample);
  }
  const std::vector<double> nan{1, std::nan("")};
  EXPECT_THROW(summarize(nan), Error);
}

TEST(Summary, OrderingAndPermutationInvariance) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> d(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + trial % 17);
    for (auto& v : x) v = d(rng);
    const auto s = summarize(x);
    EXPECT_LE(s.min, s.q1);
    EXPECT_LE(s.q1, s.median);
    EXPECT_LE(s.median, s.q3);
    EXPECT_LE(s.q3, s.max);
    EXPECT_LE(s.min, s.mean);
    EXPECT_LE(s.mean, s.max);
    auto y = x;
    std::shuffle(y.begin(), y.end(), rng);
    const auto t = summarize(y);
    EXPECT_EQ(s.q1, t.q1);
    EXPECT_EQ(s.q3, t.q3);
    // Adding a new maximum never moves the minimum.
    y.push_back(s.max + 1.0);
    const auto u = summarize(y);
    EXPECT_EQ(u.min, s.min);
    EXPECT_GE(u.max, s.max);
    EXPECT_GE(u.q3, s.q3);
  }
}

TEST(Boxplot, TukeyWhiskers) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 30};
  const auto b = boxplot(x);
  EXPECT_DOUBLE_EQ(b.q1, 3.25);
  EXPECT_DOUBLE_EQ(b.q3, 7.75);
  EXPECT_DOUBLE_EQ(b.lower_whisker, 1);
  EXPECT_DOUBLE_EQ(b.upper_whisker, 9);
  EXPECT_EQ(b.outliers, std::vector<double>{30});
}

TEST(ShapiroWilk, MatchesReferenceImplementation) {
  for (const auto& f : kShapiroFixtures) {
    const auto v = shapiro_wilk(f.sample);
    EXPECT_NEAR(v.w_statistic, f.w, 1e-4) << f.sample.size();
    EXPECT_NEAR(v.p_value, f.p, 1e-4) << f.sample.size();
    EXPECT_EQ(v.is_normal_at_alpha, v.p_value > 0.05);
  }
}

TEST(ShapiroWilk, ScaleAndShiftInvariant) {
  auto y = kSeededNormal20;
  for (auto& v : y) v = 3.0 * v + 100.0;
  EXPECT_NEAR(shapiro_wilk(y).w_statistic, shapiro_wilk(kSeededNormal20).w_statistic, 1e-12);
}

TEST(ShapiroWilk, Errors) {
  const auto code_of = [](std::vector<double> x) {
    try {
      shapiro_wilk(x);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  EXPECT_EQ(code_of({1, 2}), ErrorCode::SampleTooSmall);
  EXPECT_EQ(code_of(std::vector<double>(5001, 1.0)), ErrorCode::SampleTooLarge);
  EXPECT_EQ(code_of({4, 4, 4, 4}), ErrorCode::ZeroVariance);
}

TEST(ShapiroWilk, OutputsInRange) {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(1.0);
  for (std::size_t n = 3; n < 200; n += 7) {
    std::vector<double> x(n);
    for (auto& v : x) v = e(rng);
    const auto r = shapiro_wilk(x);
    EXPECT_GT(r.w_statistic, 0.0);
    EXPECT_LE(r.w_statistic, 1.0);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(RankSum, SeparatedSamples) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto r = wilcoxon_rank_sum(a, b);
  EXPECT_EQ(r.u_statistic, 0);
  EXPECT_EQ(r.method, RankSumMethod::Exact);
  EXPECT_NEAR(r.p_value, 0.1, 1e-15);
  EXPECT_NEAR(oracle::enumerate_rank_sum_p(a, b), 0.1, 1e-15);
}

TEST(RankSum, CompleteOverlap) {
  const std::vector<double> a{1, 2, 3};
  const auto r = wilcoxon_rank_sum(a, a);
  EXPECT_EQ(r.u_statistic, 4.5);
  EXPECT_EQ(r.method, RankSumMethod::NormalApproximation);
  EXPECT_TRUE(r.tie_correction_applied);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(RankSum, EmptySample) {
  const std::vector<double> a{1}, none;
  try {
    wilcoxon_rank_sum(a, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySample);
  }
}

TEST(RankSum, NullCountsMatchBinomial) {
  for (std::size_t na = 1; na <= 8; ++na) {
    for (std::size_t nb = 1; nb <= 8; ++nb) {
      const auto c = rank_sum_null_counts(na, nb);
      const double total = std::accumulate(c.begin(), c.end(), 0.0);
      EXPECT_EQ(total, binom(static_cast<int>(na + nb), static_cast<int>(na)));
      for (std::size_t u = 0; u < c.size(); ++u) EXPECT_EQ(c[u], c[c.size() - 1 - u]);
    }
  }
}

TEST(RankSum, ExactMatchesEnumeration) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> value(-10, 10);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> a(size(rng)), b(size(rng));
    for (auto& v : a) v = value(rng);
    for (auto& v : b) v = value(rng) + 2.0;
    const auto r = wilcoxon_rank_sum(a, b);
    ASSERT_EQ(r.method, RankSumMethod::Exact);
    const double ref = oracle::enumerate_rank_sum_p(a, b);
    EXPECT_NEAR(r.p_value, ref, 1e-12);
    // Exact p is a multiple of 1/C(n, n_a).
    const double c = binom(static_cast<int>(a.size() + b.size()), static_cast<int>(a.size()));
    const double k = r.p_value * c;
    EXPECT_NEAR(k, std::round(k), 1e-6);
  }
}

TEST(RankSum, ApproximationConvergesToExact) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0, 1);
  RankSumOptions exact;
  exact.exact_threshold = 40;
  RankSumOptions approx;
  approx.force_approximation = true;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(20), b(20);
    for (auto& v : a) v = d(rng);
    for (auto& v : b) v = d(rng) + 0.5;
    const auto e = wilcoxon_rank_sum(a, b, exact);
    const auto n = wilcoxon_rank_sum(a, b, approx);
    ASSERT_EQ(e.method, RankSumMethod::Exact);
    EXPECT_NEAR(e.p_value, n.p_value, 0.01);
  }
}

TEST(RankSum, ThresholdSelectsMethod) {
  std::vector<double> a(8), b(9);
  std::iota(a.begin(), a.end(), 0.0);
  std::iota(b.begin(), b.end(), 100.0);
  EXPECT_EQ(wilcoxon_rank_sum(a, b).method, RankSumMethod::NormalApproximation);
  b.pop_back();
  EXPECT_EQ(wilcoxon_rank_sum(a, b).method, RankSumMethod::Exact);
}

TEST(CompareGroups, DetectsShiftInTime) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> manual(4.8, 0.2), sg(3.6, 0.3);
  std::vector<TrialRecord> records;
  for (int i = 0; i < 20; ++i) {
    records.push_back(rec(Method::Manual, manual(rng)));
    records.push_back(rec(Method::SG, sg(rng)));
  }
  const auto c = compare_groups(records, Measure::Time);
  EXPECT_LT(c.sg.summary.median, c.manual.summary.median);
  EXPECT_LT(c.test.p_value, 0.01);
  EXPECT_NEAR(c.manual.summary.median, 4.8, 0.3);
  EXPECT_EQ(c.manual.n, 20u);
}

TEST(CompareGroups, NullCalibration) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> d(4.0, 0.3);
  int rejections = 0;
  const int reps = 1000;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<TrialRecord> records;
    for (int i = 0; i < 20; ++i) {
      records.push_back(rec(Method::Manual, d(rng)));
      records.push_back(rec(Method::SG, d(rng)));
    }
    if (compare_groups(records, Measure::Time).test.p_value <= 0.05) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / reps;
  EXPECT_GE(rate, 0.03);
  EXPECT_LE(rate, 0.07);
}

TEST(CompareGroups, FlagsNonNormalSamples) {
  std::vector<TrialRecord> records;
  for (int i = 1; i <= 10; ++i) {
    records.push_back(rec(Method::Manual, i == 10 ? 30.0 : i));
    records.push_back(rec(Method::SG, 0.5 * i));
  }
  const auto c = compare_groups(records, Measure::Time);
  EXPECT_TRUE(c.nonparametric_required);
  EXPECT_FALSE(c.manual.normality.verdict->is_normal_at_alpha);

  // Constant grades: Shapiro-Wilk is undefined, which also counts as a rejection.
  const auto g = compare_groups(records, Measure::Grade);
  EXPECT_TRUE(g.nonparametric_required);
  EXPECT_EQ(g.manual.normality.error, ErrorCode::ZeroVariance);
}

TEST(CompareGroups, MissingMethod) {
  const std::vector<TrialRecord> records{rec(Method::SG, 3), rec(Method::SG, 4)};
  try {
    compare_groups(records, Measure::Time);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingMethod);
  }
}

TEST(CompareGroups, ReportJson) {
  std::vector<TrialRecord> records;
  for (int i = 1; i <= 5; ++i) {
    records.push_back(rec(Method::Manual, 4 + 0.1 * i, 7));
    records.push_back(rec(Method::SG, 3 + 0.1 * i, 9));
  }
  const auto c = compare_groups(records, Measure::Time);
  const nlohmann::json j = c;
  EXPECT_EQ(j.at("measure"), "time");
  EXPECT_DOUBLE_EQ(j.at("boxplot_data").at("SG").at("median").get<double>(), c.sg.boxplot.median);
  EXPECT_EQ(j.at("test").at("method"), "exact");
  const auto csv = boxplot_csv(c);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,q1,median,q3,lower_whisker,upper_whisker,outliers");
}

TEST(Study, DefaultCounts) {
  const auto rs = simulate_study({}, 1);
  EXPECT_EQ(rs.size(), 160u);
  int manual = 0;
  for (const auto& r : rs) {
    EXPECT_NO_THROW(validate(r));
    EXPECT_EQ(r.method == Method::Manual, r.group == Group::CG);
    manual += r.method == Method::Manual;
  }
  EXPECT_EQ(manual, 80);
}

TEST(Study, SmallestCohort) {
  CohortSpec spec;
  spec.children_per_group = 1;
  spec.sessions = 1;
  EXPECT_EQ(simulate_study(spec, 9).size(), 2u);
}

TEST(Study, Deterministic) {
  EXPECT_EQ(simulate_study({}, 77), simulate_study({}, 77));
  EXPECT_NE(simulate_study({}, 77), simulate_study({}, 78));
}

TEST(Study, InvalidSpec) {
  CohortSpec spec;
  spec.children_per_group = 0;
  try {
    simulate_study(spec, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidCohortSpec);
  }
}

TEST(Study, SpecJsonRoundTrip) {
  CohortSpec spec;
  spec.children_per_group = 7;
  spec.sg_success_logit = 3.0;
  const nlohmann::json j = spec;
  const auto back = j.get<CohortSpec>();
  EXPECT_EQ(back.children_per_group, 7);
  EXPECT_EQ(back.sg_success_logit, 3.0);
  EXPECT_EQ(simulate_study(back, 5), simulate_study(spec, 5));
}
