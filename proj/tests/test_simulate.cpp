#include "oracles.hpp"

#include <adabon/experiment.hpp>
#include <adabon/simulate.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace adabon;

namespace {

struct Pearson {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  std::size_t n = 0;
  void add(double x, double y)
  {
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    ++n;
  }
  double value() const
  {
    const double c = static_cast<double>(n);
    const double cov = sxy / c - sx / c * sy / c;
    const double vx = sxx / c - sx / c * sx / c;
    const double vy = syy / c - sy / c * sy / c;
    return cov / std::sqrt(vx * vy);
  }
  // normal-theory standard error of a sample correlation
  double se(double rho) const { return (1.0 - rho * rho) / std::sqrt(static_cast<double>(n)); }
};

SimulationConfig small(double rho, std::size_t m, std::optional<std::size_t> blocks = std::nullopt)
{
  SimulationConfig cfg;
  cfg.m = m;
  cfg.n = 2;
  cfg.rho = rho;
  cfg.blocks = blocks;
  return cfg;
}

} // namespace

TEST(GenerateEffects, ZeroDensity)
{
  SimulationConfig cfg;
  cfg.pi1 = 0.0;
  auto rng = StreamKey(1).engine();
  const auto t = generate_effects(cfg, rng);
  EXPECT_TRUE(std::all_of(t.mu.begin(), t.mu.end(), [](double x) { return x == 0.0; }));
  EXPECT_EQ(t.false_count(), 0u);
}

TEST(GenerateEffects, FullDensityFalseShare)
{
  SimulationConfig cfg;
  cfg.m = 50000;
  cfg.pi1 = 1.0;
  auto rng = StreamKey(2).engine();
  const auto t = generate_effects(cfg, rng);
  const double p = 11.0 / 16.0;
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(cfg.m));
  EXPECT_NEAR(static_cast<double>(t.false_count()) / static_cast<double>(cfg.m), p, 3 * se);
  for (double x : t.mu)
    EXPECT_TRUE(x == 0.0 || x == cfg.mu_magnitude);
}

TEST(GenerateEffects, LabelsFollowNonZeroCount)
{
  SimulationConfig cfg;
  cfg.pi1 = 0.5;
  auto rng = StreamKey(3).engine();
  const auto t = generate_effects(cfg, rng);
  std::size_t all_zero_signal_rows = 0;
  for (std::size_t i = 0; i < cfg.m; ++i) {
    std::size_t nz = 0;
    for (std::size_t j = 0; j < cfg.n; ++j)
      nz += t.mu[i * cfg.n + j] != 0.0;
    EXPECT_EQ(t.is_false_pc_null[i], nz >= cfg.u);
    all_zero_signal_rows += nz == 0;
  }
  EXPECT_EQ(label_pc_nulls(t.mu, t.m, t.n, cfg.u), t.is_false_pc_null);
  for (unsigned u = 2; u <= 4; ++u)
    EXPECT_EQ(relabel(t, u).is_false_pc_null, label_pc_nulls(t.mu, t.m, t.n, u));
}

TEST(GenerateNoise, IndependentWhenRhoIsZero)
{
  const auto cfg = small(0.0, 10);
  Pearson within, across;
  for (int r = 0; r < 20000; ++r) {
    const auto e = generate_noise(cfg, StreamKey(4).child(r));
    within.add(e[0 * 2], e[1 * 2]);
    across.add(e[0 * 2], e[0 * 2 + 1]);
  }
  EXPECT_NEAR(within.value(), 0.0, 3 * within.se(0.0));
  EXPECT_NEAR(across.value(), 0.0, 3 * across.se(0.0));
}

TEST(GenerateNoise, PositiveEquicorrelationBlocks)
{
  // m = 10 in 5 blocks: features (0,1), (2,3), ...
  const auto cfg = small(0.8, 10);
  Pearson within, cross_block, cross_study;
  double sum = 0, sum_sq = 0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    const auto e = generate_noise(cfg, StreamKey(5).child(r));
    within.add(e[0 * 2], e[1 * 2]);
    cross_block.add(e[1 * 2], e[2 * 2]);
    cross_study.add(e[0 * 2], e[0 * 2 + 1]);
    sum += e[3 * 2 + 1];
    sum_sq += e[3 * 2 + 1] * e[3 * 2 + 1];
  }
  EXPECT_NEAR(within.value(), 0.8, 3 * within.se(0.8));
  EXPECT_NEAR(cross_block.value(), 0.0, 3 * cross_block.se(0.0));
  EXPECT_NEAR(cross_study.value(), 0.0, 3 * cross_study.se(0.0));
  EXPECT_NEAR(sum / reps, 0.0, 3 / std::sqrt(double(reps)));
  EXPECT_NEAR(sum_sq / reps, 1.0, 3 * std::sqrt(2.0 / reps));
}

TEST(GenerateNoise, NegativeCorrelationPairs)
{
  const auto cfg = small(-0.8, 6);
  EXPECT_EQ(cfg.block_size(), 2u);
  Pearson pair, cross;
  double sum_sq = 0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    const auto e = generate_noise(cfg, StreamKey(6).child(r));
    pair.add(e[2 * 2], e[3 * 2]);
    cross.add(e[3 * 2], e[4 * 2]);
    sum_sq += e[3 * 2] * e[3 * 2];
  }
  EXPECT_NEAR(pair.value(), -0.8, 3 * pair.se(-0.8));
  EXPECT_NEAR(cross.value(), 0.0, 3 * cross.se(0.0));
  EXPECT_NEAR(sum_sq / reps, 1.0, 3 * std::sqrt(2.0 / reps));
}

TEST(GenerateNoise, CholeskyForLargerNegativeBlocks)
{
  const auto cfg = small(-0.3, 6, 2);
  EXPECT_EQ(cfg.block_size(), 3u);
  Pearson a, b;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    const auto e = generate_noise(cfg, StreamKey(7).child(r));
    a.add(e[0 * 2], e[2 * 2]);
    b.add(e[1 * 2], e[2 * 2]);
  }
  EXPECT_NEAR(a.value(), -0.3, 3 * a.se(-0.3));
  EXPECT_NEAR(b.value(), -0.3, 3 * b.se(-0.3));
}

TEST(SimulationConfig, RejectsBadShapes)
{
  EXPECT_THROW(small(0.2, 12).validate(), configuration_error); // 12 not in 5 blocks
  EXPECT_THROW(small(-0.2, 7).validate(), configuration_error); // odd m, pairs
  EXPECT_THROW(small(-0.8, 4, 1).validate(), configuration_error); // 4x4 block not PD
  EXPECT_THROW(small(0.2, 10, 3).validate(), configuration_error);
  EXPECT_THROW(small(-1.0, 10).validate(), configuration_error);
  SimulationConfig c;
  c.u = 5;
  EXPECT_THROW(c.validate(), configuration_error);
  EXPECT_NO_THROW(SimulationConfig{}.validate());
}

TEST(GeneratePvalues, FormulaPoints)
{
  TruthLabels t;
  t.m = 1;
  t.n = 2;
  t.mu = {0.0, 4.0};
  t.is_false_pc_null = {false};
  const auto p = generate_pvalues(t, std::vector{0.0, 0.0});
  EXPECT_EQ(p(0, 0), 0.5);
  EXPECT_NEAR(p(0, 1), 3.1671241833119857e-5, 1e-16);
  EXPECT_NEAR(p(0, 1), oracle::normal_sf(4.0), 1e-18);
  EXPECT_THROW(generate_pvalues(t, std::vector{0.0}), std::invalid_argument);
}

TEST(GeneratePvalues, NullsAreUniform)
{
  SimulationConfig cfg;
  cfg.m = 100000;
  cfg.n = 2;
  cfg.pi1 = 0.0;
  cfg.rho = 0.0;
  const auto rep = generate_replicate(cfg, 0);
  std::vector<double> p(rep.pvalues.data().begin(), rep.pvalues.data().end());
  std::sort(p.begin(), p.end());
  double d = 0.0;
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    d = std::max({d, (i + 1) / n - p[i], p[i] - i / n});
  EXPECT_LT(d, 1.63 / std::sqrt(n)); // 1% Kolmogorov-Smirnov critical value
  for (double t : {0.01, 0.05, 0.5}) {
    const auto hits = std::upper_bound(p.begin(), p.end(), t) - p.begin();
    EXPECT_LE(hits / n, t + 3 * std::sqrt(t * (1 - t) / n));
  }
}

TEST(Replicates, DeterministicAndOrderIndependent)
{
  SimulationConfig cfg;
  cfg.reps = 6;
  const auto a = generate_replicate(cfg, 3);
  const auto b = generate_replicate(cfg, 3);
  EXPECT_EQ(a.truth.mu, b.truth.mu);
  EXPECT_TRUE(std::equal(a.pvalues.data().begin(), a.pvalues.data().end(), b.pvalues.data().begin()));
  const auto c = generate_replicate(cfg, 4);
  EXPECT_FALSE(std::equal(a.pvalues.data().begin(), a.pvalues.data().end(), c.pvalues.data().begin()));

  const std::vector<Method> methods(std::begin(all_methods), std::end(all_methods));
  const std::vector<ProcedureContext> ctxs{{2, 1, 0.05, 0.5, 0.1}};
  const auto one = run_replicates(cfg, methods, ctxs, {}, 1);
  const auto many = run_replicates(cfg, methods, ctxs, {}, 4);
  ASSERT_EQ(one.size(), 6u);
  for (std::size_t r = 0; r < one.size(); ++r) {
    EXPECT_EQ(one[r].replicate, r);
    ASSERT_EQ(one[r].evaluations.size(), many[r].evaluations.size());
    for (std::size_t e = 0; e < one[r].evaluations.size(); ++e)
      EXPECT_EQ(one[r].evaluations[e].result, many[r].evaluations[e].result);
    EXPECT_EQ(one[r].truth.is_false_pc_null, many[r].truth.is_false_pc_null);
  }
}

TEST(Replicates, ZeroRepsIsEmptyAndFwerOnlySkippedForLargeK)
{
  SimulationConfig cfg;
  cfg.reps = 0;
  EXPECT_TRUE(run_replicates(cfg, {Method::bonferroni}, {{2, 1, 0.05, 0.5, 0.1}}).empty());
  cfg.reps = 1;
  const auto r = run_replicates(cfg, {Method::adaptive_hochberg, Method::hochberg},
                                {{2, 5, 0.05, 0.5, 0.1}});
  ASSERT_EQ(r.size(), 1u);
  ASSERT_EQ(r[0].evaluations.size(), 1u);
  EXPECT_EQ(r[0].evaluations[0].result.method, Method::hochberg);
}

TEST(Replicates, ContextLevelMustMatch)
{
  SimulationConfig cfg;
  cfg.reps = 1;
  EXPECT_THROW(run_replicates(cfg, {Method::bonferroni}, {{3, 1, 0.05, 0.5, 0.1}}),
               configuration_error);
}

TEST(StreamKey, ChildrenDiffer)
{
  const StreamKey k(99);
  EXPECT_NE(k.child(0).seed(), k.child(1).seed());
  EXPECT_NE(k.child(0).child(1).seed(), k.child(1).child(0).seed());
  EXPECT_EQ(k.child(5).seed(), StreamKey(99).child(5).seed());
}
