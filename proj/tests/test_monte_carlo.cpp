#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hnoma/hnoma.hpp"

using namespace hnoma;

namespace {

SystemConfig fig_config(int m, int n, double rate_m, double snr_db, double ratio = 5.0) {
  SystemConfig c;
  c.users = 5;
  c.m = m;
  c.n = n;
  c.beta = 1.0 / 3.0;
  c.rate_m = rate_m;
  return with_snr(c, snr_db, ratio);
}

SamplerSpec sampler(std::uint64_t n, std::uint64_t seed = 1) {
  SamplerSpec s;
  s.n_samples = n;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(SampleOrderedGains, MeansOfExtremes) {
  const auto draws = sample_ordered_gains(5, sampler(1'000'000));
  ASSERT_EQ(draws.size(), 1'000'000u);
  for (auto [idx, expected] : {std::pair{0, 0.2}, {4, 1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5}}) {
    double sum = 0, sq = 0;
    for (const auto& r : draws) {
      sum += r.gains[idx];
      sq += r.gains[idx] * r.gains[idx];
    }
    const double n = static_cast<double>(draws.size());
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_NEAR(mean, expected, 3.0 * se) << "order " << idx + 1;
  }
}

TEST(SampleOrderedGains, AscendingOnEveryDraw) {
  for (int users : {2, 5, 8}) {
    const auto draws = sample_ordered_gains(users, sampler(100'000, 9));
    for (const auto& r : draws) {
      ASSERT_EQ(r.gains.size(), static_cast<std::size_t>(users));
      for (int i = 1; i < users; ++i) ASSERT_LE(r.gains[i - 1], r.gains[i]);
    }
  }
}

TEST(SampleOrderedGains, RejectsSingleUser) { EXPECT_THROW(sample_ordered_gains(1, sampler(10)), ConfigError); }

TEST(SampleOrderedGains, IndependentOfWorkerCount) {
  auto s = sampler(300'001, 42);
  s.chunk_size = 4096;
  s.workers = 1;
  const auto a = sample_ordered_gains(4, s);
  s.workers = 7;
  const auto b = sample_ordered_gains(4, s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i].gains, b[i].gains);
}

TEST(McProbability, BitIdenticalAcrossWorkers) {
  const auto cfg = fig_config(2, 5, 0.2, 5.0);
  auto s = sampler(1'000'000, 77);
  std::vector<double> values;
  for (unsigned w : {1u, 3u, 0u}) {
    s.workers = w;
    values.push_back(mc_probability(cfg, Scheme::hsic_hybrid, s).value);
  }
  EXPECT_EQ(values[0], values[1]);
  EXPECT_EQ(values[0], values[2]);
}

TEST(McProbability, StandardErrorIsBinomial) {
  const auto cfg = fig_config(5, 1, 0.2, 10.0);
  const auto e = mc_probability(cfg, Scheme::hsic_hybrid, sampler(200'000));
  EXPECT_EQ(e.method, Method::monte_carlo);
  EXPECT_EQ(e.n_samples, 200'000u);
  EXPECT_DOUBLE_EQ(e.std_error, std::sqrt(e.value * (1 - e.value) / 200'000.0));
}

TEST(McProbability, EmptyTallyUsesThreeOverN) {
  const auto e = binomial_estimate(0, 1000);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_DOUBLE_EQ(e.std_error, 3e-3);
  const auto f = binomial_estimate(1000, 1000);
  EXPECT_EQ(f.value, 1.0);
  EXPECT_DOUBLE_EQ(f.std_error, 3e-3);
}

TEST(McProbability, VanishingPowerIsCertainFailure) {
  auto cfg = fig_config(2, 4, 0.7, 15.0);
  cfg.beta = 1e-9;
  for (Scheme s : {Scheme::hsic_hybrid, Scheme::fsic_hybrid})
    EXPECT_GT(mc_probability(cfg, s, sampler(200'000)).value, 0.9999);
}

TEST(McProbability, RejectsOma) {
  EXPECT_THROW(mc_probability(fig_config(1, 2, 0.2, 10), Scheme::oma, sampler(10)), DomainError);
}

TEST(McProbability, HsicNeverAboveFsicOnSharedStream) {
  for (auto [m, n] : {std::pair{2, 5}, {5, 2}, {1, 3}, {4, 1}}) {
    for (double db : {0.0, 10.0, 20.0}) {
      const auto cfg = fig_config(m, n, 1.0, db);
      const auto s = sampler(200'000, 5);
      EXPECT_LE(mc_probability(cfg, Scheme::hsic_hybrid, s).value, mc_probability(cfg, Scheme::fsic_hybrid, s).value)
          << m << n << ' ' << db;
    }
  }
}

TEST(McProbability, MatchesClosedFormDeepTail) {
  const auto cfg = fig_config(1, 5, 0.2, 30.0);
  const auto mc = mc_probability(cfg, Scheme::hsic_hybrid, sampler(10'000'000));
  const double closed = ptilde_closed(cfg).estimate.value;
  EXPECT_NEAR(mc.value, closed, 3.0 * mc.std_error);
}

TEST(McRegionDecomposition, PartitionIsExact) {
  std::mt19937_64 g(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 12; ++k) {
    SystemConfig c;
    c.users = 3 + k % 4;
    c.m = 1 + static_cast<int>(g() % c.users);
    do c.n = 1 + static_cast<int>(g() % c.users);
    while (c.n == c.m);
    c.beta = 0.05 + 0.4 * u(g);
    c.rate_m = 0.1 + 1.9 * u(g);
    c = with_snr(c, 40.0 * u(g), 0.5 + 11.5 * u(g));
    const auto s = sampler(100'000, 100 + k);
    const auto d = mc_region_decomposition(c, s);
    EXPECT_EQ(d.region_hits(), d.tally.hsic_hits);
    EXPECT_EQ(d.tally.hsic_hits, static_cast<std::uint64_t>(
                                     std::llround(mc_probability(c, Scheme::hsic_hybrid, s).value * 100'000.0)));
    EXPECT_EQ(d.hsic.value, mc_probability(c, Scheme::hsic_hybrid, s).value);
  }
}

TEST(McRegionDecomposition, HugeRateLeavesOnlyLowLegacyRegions) {
  auto cfg = fig_config(2, 5, 40.0, 20.0);
  const auto d = mc_region_decomposition(cfg, sampler(200'000));
  EXPECT_EQ(d.tally.counts[0], 0u);
  EXPECT_EQ(d.tally.counts[2], 0u);
}

TEST(McRegionDecomposition, MatchesQuadratureRegions) {
  for (double db : {5.0, 20.0}) {
    const auto cfg = fig_config(2, 5, 0.2, db);
    const auto d = mc_region_decomposition(cfg, sampler(2'000'000));
    const auto q = quadrature_region_decomposition(cfg);
    for (int r = 0; r < 4; ++r) {
      EXPECT_NEAR(d.regions[r].value, q.regions[r].value, 3.0 * d.regions[r].std_error)
          << db << " dB region " << to_string(static_cast<Region>(r));
    }
  }
}

// The true value should sit inside the 95% interval for at least 95% of configs.
TEST(McProbability, IntervalCoverage) {
  std::mt19937_64 g(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int tested = 0, covered = 0;
  while (tested < 200) {
    SystemConfig c;
    c.users = 3 + static_cast<int>(g() % 4);
    c.m = 1 + static_cast<int>(g() % c.users);
    do c.n = 1 + static_cast<int>(g() % c.users);
    while (c.n == c.m);
    c.beta = 0.05 + 0.4 * u(g);
    c.rate_m = 0.1 + 1.9 * u(g);
    c = with_snr(c, 5.0 + 25.0 * u(g), 0.5 + 11.5 * u(g));
    double truth = 0;
    try {
      truth = ptilde_closed(c).estimate.value;
    } catch (const SingularRegime&) {
      truth = ptilde_quadrature(c).value;
    }
    if (truth < 1e-3 || truth > 1 - 1e-3) continue;
    const auto e = mc_probability(c, Scheme::hsic_hybrid, sampler(200'000, 1000 + tested));
    ++tested;
    covered += std::abs(e.value - truth) <= 1.96 * e.std_error;
  }
  EXPECT_GE(covered, 190) << covered << " of " << tested;
}
