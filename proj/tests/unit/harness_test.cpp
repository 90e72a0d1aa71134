#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spme/spme.hpp"

using namespace spme;

TEST(SlopeFit, ExactPowerLaw) {
  const std::vector<double> x{0.1, 0.05, 0.025, 0.0125};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.5));
  const SlopeFit f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, 1.5, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-12);
  EXPECT_NEAR(f.residual, 0.0, 1e-12);
  EXPECT_EQ(f.levels, 4);
  EXPECT_THROW(fit_loglog({0.1, 0.05}, {1.0, 0.5}), std::invalid_argument);
  EXPECT_THROW(fit_loglog({0.1, 0.05, 0.02}, {1.0, -0.5, 0.1}), std::invalid_argument);
}

TEST(KahanSum, CompensatesRoundOff) {
  std::vector<double> v{1.0};
  for (int i = 0; i < 1000; ++i) v.push_back(1e-16);
  double naive = 0.0;
  for (double x : v) naive += x;
  EXPECT_EQ(naive, 1.0);
  EXPECT_NEAR(kahan_sum(v), 1.0 + 1e-13, 1e-16);
}

TEST(ExperimentConfig, CasesAndValidation) {
  ExperimentConfig cfg;
  cfg.J_list = {8, 16};
  cfg.N_list = {4, 8, 16};
  const auto all = cfg.cases();
  ASSERT_EQ(all.size(), 6u);
  EXPECT_EQ(all[0], std::make_pair(8, 4));
  EXPECT_EQ(all[1], std::make_pair(16, 4));
  cfg.pairs = true;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.N_list = {8, 16};
  EXPECT_EQ(cfg.cases().size(), 2u);
  cfg.t_lo = 0.2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(parse_experiment("converge-stoch"), ExperimentKind::converge_stoch);
  EXPECT_FALSE(parse_experiment("converge"));
  EXPECT_EQ(parse_noise("spacetime"), NoiseKind::spacetime);
}

TEST(ErrorTable, CsvLayout) {
  ErrorTable t;
  t.add({8, 4, 0.5});
  t.add({16, 4, 0.25});
  t.add({8, 8, 0.125});
  std::ostringstream wide;
  t.write_wide_csv(wide);
  EXPECT_EQ(wide.str(), "N\\J,8,16\n4,0.5,0.25\n8,0.125,\n");
  std::ostringstream lng;
  t.write_long_csv(lng);
  EXPECT_EQ(lng.str().substr(0, lng.str().find('\n')), "N,J,error,std_error,samples,failures,seconds,note");
  EXPECT_EQ(t.error(16, 4), 0.25);
  EXPECT_THROW(t.error(16, 8), std::out_of_range);
}

TEST(ConvergenceDet, SmallTable) {
  ExperimentConfig cfg;
  cfg.J_list = {8, 16, 32};
  cfg.N_list = {8};
  const auto t = run_convergence_det(cfg);
  EXPECT_EQ(t.failures(), 0);
  EXPECT_GT(t.error(8, 8), t.error(32, 8));
}

TEST(ConvergenceStoch, SerialAndThreadedAgree) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::converge_stoch;
  cfg.J_list = {16};
  cfg.N_list = {16};
  cfg.samples = 8;
  cfg.seed = 100;
  cfg.threads = 1;
  const auto serial = run_convergence_stoch(cfg);
  cfg.threads = 3;
  const auto threaded = run_convergence_stoch(cfg);
  EXPECT_NEAR(serial.error(16, 16), threaded.error(16, 16), 1e-12);
  EXPECT_GT(serial.entries()[0].std_error, 0.0);
  EXPECT_EQ(serial.entries()[0].samples, 8);
}

TEST(AggregatePaths, MomentsAndFailures) {
  PathErrors p;
  p.error_pow = {1.0, 3.0};
  const auto e = aggregate_paths(4, 4, p, 2.0);
  EXPECT_NEAR(e.error, std::sqrt(2.0), 1e-15);
  // sd of the mean is 1; delta method divides by p * mean^{1 - 1/p}.
  EXPECT_NEAR(e.std_error, std::sqrt(2.0) / (2.0 * 2.0), 1e-15);
  p.error_pow.push_back(std::numeric_limits<double>::quiet_NaN());
  p.failures = 1;
  EXPECT_THROW(aggregate_paths(4, 4, p, 2.0), std::runtime_error);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  parallel_for_index(100, 4, [&](int i) { ++hits[static_cast<std::size_t>(i)]; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(SupportStudy, DeterministicContained) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::support;
  cfg.J_list = {32};
  cfg.N_list = {32};
  const auto s = run_support_study(cfg);
  EXPECT_EQ(s.rows.size(), 33u);
  EXPECT_TRUE(s.all_contained());
  EXPECT_FALSE(s.touches_boundary());
}

TEST(Spacetime, SeedsDiffer) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::spacetime;
  cfg.J_list = {32};
  cfg.N_list = {32};
  cfg.samples = 2;
  cfg.threads = 1;
  const auto r = run_spacetime(cfg);
  ASSERT_EQ(r.max_mass.size(), 2u);
  EXPECT_NE(r.snapshots.back().means.values, r.snapshots[4].means.values);
  for (double m : r.max_mass) {
    EXPECT_GT(m, 0.5);
    EXPECT_LT(m, 2.0);
  }
}
