#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "dirnet/analytic.hpp"
#include "dirnet/montecarlo.hpp"

using dirnet::AntennaPattern;
using dirnet::LinkGeometry;
using dirnet::SimulationConfig;

namespace {

constexpr double pi = std::numbers::pi;

SimulationConfig defaults(std::uint64_t trials = 30000) {
  SimulationConfig c;
  c.trials = trials;
  c.rng_seed = 777;
  c.workers = 1;
  return c;
}

LinkGeometry aligned(double t) { return {t, 0.0, pi}; }

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Seeding, SplitMixStreamRule) {
  // First SplitMix64 output for state 0 is a published reference value.
  EXPECT_EQ(dirnet::trial_seed(0, 0), 0xE220A8397B1DCDAFULL);
  EXPECT_NE(dirnet::trial_seed(1, 0), dirnet::trial_seed(1, 1));
  EXPECT_EQ(dirnet::trial_seed(5, 3), dirnet::splitmix64_mix(5 + 4 * 0x9E3779B97F4A7C15ULL));
}

TEST(Seeding, UniformDrawsStayInsideOpenInterval) {
  dirnet::TrialEngine rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = dirnet::uniform_open(rng);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Realization, EmptyAtZeroDensity) {
  auto c = defaults();
  c.params.density = 0.0;
  dirnet::TrialEngine rng(3);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(dirnet::sample_realization(c, aligned(0.4), rng).interferers.empty());
}

TEST(Realization, PoissonCountUniformPositionsAndOrientations) {
  const auto c = defaults();
  const int draws = 10000;
  double count_sum = 0.0, count_sq = 0.0, r2_sum = 0.0, orient_sum = 0.0, fading_sum = 0.0;
  std::size_t points = 0;
  for (int j = 0; j < draws; ++j) {
    dirnet::TrialEngine rng(dirnet::trial_seed(99, j));
    const auto r = dirnet::sample_realization(c, aligned(0.4), rng);
    const double n = static_cast<double>(r.interferers.size());
    count_sum += n;
    count_sq += n * n;
    for (const auto& k : r.interferers) {
      ASSERT_LE(k.distance, c.disk_radius);
      ASSERT_GT(k.fading, 0.0);
      r2_sum += k.distance * k.distance;
      orient_sum += k.orientation;
      fading_sum += k.fading;
    }
    points += r.interferers.size();
  }
  const double mean = 64.0 * pi;
  const double sample_mean = count_sum / draws;
  const double sample_var = count_sq / draws - sample_mean * sample_mean;
  EXPECT_NEAR(sample_mean, mean, 3.0 * std::sqrt(mean / draws));
  EXPECT_NEAR(sample_var / mean, 1.0, 0.05);  // Poisson: variance equals mean
  // Uniform on the disk: E[r^2] = R^2 / 2. Orientation mean pi, fading mean 1.
  const double m = static_cast<double>(points);
  EXPECT_NEAR(r2_sum / m, 32.0, 3.0 * std::sqrt((64.0 * 64.0 / 3.0 - 32.0 * 32.0) / m));
  EXPECT_NEAR(orient_sum / m, pi, 3.0 * std::sqrt(pi * pi / 3.0 / m));
  EXPECT_NEAR(fading_sum / m, 1.0, 3.0 / std::sqrt(m));
}

TEST(Realization, DeterministicForSeed) {
  const auto c = defaults();
  dirnet::TrialEngine a(42), b(42);
  const auto ra = dirnet::sample_realization(c, aligned(0.4), a);
  const auto rb = dirnet::sample_realization(c, aligned(0.4), b);
  ASSERT_EQ(ra.interferers.size(), rb.interferers.size());
  EXPECT_EQ(ra.tagged_fading, rb.tagged_fading);
  for (std::size_t i = 0; i < ra.interferers.size(); ++i) {
    EXPECT_EQ(ra.interferers[i].distance, rb.interferers[i].distance);
    EXPECT_EQ(ra.interferers[i].orientation, rb.interferers[i].orientation);
  }
}

TEST(Realization, TaggedLinkMustBeInsideDisk) {
  const auto c = defaults();
  dirnet::TrialEngine rng(1);
  EXPECT_THROW(dirnet::sample_realization(c, aligned(8.0), rng), dirnet::domain_error);
}

TEST(ConnectionEstimate, InterferenceFreeMatchesExponentialTail) {
  auto c = defaults(20000);
  c.params.orthogonality = 0.0;
  c.tx_pattern = c.rx_pattern = AntennaPattern{0.5, 2};
  const LinkGeometry link{0.9, 0.2, 2.9};
  const auto e = dirnet::estimate_connection_probability(c, link);
  const double want = std::exp(-std::pow(0.9, 4) / dirnet::link_gain(c.tx_pattern, c.rx_pattern, link));
  EXPECT_NEAR(e.estimate, want, 3.0 * e.std_error);
  EXPECT_EQ(e.trials_used, 20000u);
}

TEST(ConnectionEstimate, DefaultsMatchAnalytic) {
  const auto c = defaults();
  const auto e = dirnet::estimate_connection_probability(c, aligned(0.4));
  EXPECT_NEAR(e.estimate, 0.63250674327666519, 3.0 * e.std_error);
  EXPECT_GE(e.estimate, 0.0);
  EXPECT_LE(e.estimate, 1.0);
  // Binomial standard error
  EXPECT_NEAR(e.std_error, std::sqrt(e.estimate * (1 - e.estimate) / (c.trials - 1)), 1e-12);
}

TEST(ConnectionEstimate, NearZeroDistance) {
  const auto c = defaults(2000);
  EXPECT_GT(dirnet::estimate_connection_probability(c, aligned(1e-6)).estimate, 0.999);
}

TEST(ConnectionEstimate, StdErrorScalesAsInverseSquareRoot) {
  const auto small = dirnet::estimate_connection_probability(defaults(10000), aligned(0.5));
  const auto large = dirnet::estimate_connection_probability(defaults(40000), aligned(0.5));
  EXPECT_NEAR(small.std_error / large.std_error, 2.0, 0.4);
}

TEST(ConnectionEstimate, DiskEdgeEffectIsSmall) {
  auto c8 = defaults();
  auto c16 = c8;
  c16.disk_radius = 16.0;
  std::vector<LinkGeometry> links;
  for (double t = 0.1; t <= 1.0 + 1e-12; t += 0.1) links.push_back(aligned(t));
  const auto e8 = dirnet::estimate_link_metrics(c8, links);
  const auto e16 = dirnet::estimate_link_metrics(c16, links);
  for (std::size_t i = 0; i < links.size(); ++i) {
    const double se = std::max(e8[i].connection.std_error, e16[i].connection.std_error);
    EXPECT_LT(std::abs(e8[i].connection.estimate - e16[i].connection.estimate), 2.0 * se) << links[i].distance;
  }
}

TEST(RateEstimate, UnitFadingInterferenceFreeIsExact) {
  auto c = defaults(100);
  c.params.orthogonality = 0.0;
  c.unit_fading = true;
  c.tx_pattern = c.rx_pattern = AntennaPattern{0.8, 1};
  const LinkGeometry link{0.7, 0.4, 2.5};
  const auto e = dirnet::estimate_data_rate(c, link);
  const double snr = dirnet::link_gain(c.tx_pattern, c.rx_pattern, link) / std::pow(0.7, 4);
  EXPECT_DOUBLE_EQ(e.estimate, std::log1p(snr));
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(RateEstimate, DefaultsMatchAnalytic) {
  const auto c = defaults();
  const auto e = dirnet::estimate_data_rate(c, aligned(0.4));
  EXPECT_NEAR(e.estimate, 1.3441062062000684653, 3.0 * e.std_error);
}

TEST(RateEstimate, FarLinkIsNearlySilent) {
  const auto c = defaults(5000);
  const auto e = dirnet::estimate_data_rate(c, aligned(6.0));
  EXPECT_LT(e.estimate, 0.05);
}

TEST(DegreeEstimate, ZeroDensity) {
  auto c = defaults(100);
  c.params.density = 0.0;
  const auto e = dirnet::estimate_mean_degree_detailed(c);
  EXPECT_EQ(e.count.estimate, 0.0);
  EXPECT_EQ(e.fraction.trials_used, 0u);
}

TEST(DegreeEstimate, MatchesClosedFormAndDirectivityLowersIt) {
  auto c = defaults();
  const auto iso = dirnet::estimate_mean_degree_detailed(c);
  EXPECT_NEAR(iso.count.estimate, 0.96801667362726207, 3.0 * iso.count.std_error);
  // The success fraction is the count divided by roughly 64 pi transmitters.
  EXPECT_NEAR(iso.fraction.estimate, iso.count.estimate / (64.0 * pi), 0.002);

  c.tx_pattern = c.rx_pattern = AntennaPattern{1.0, 1};
  const auto directional = dirnet::estimate_mean_degree(c);
  EXPECT_LT(directional.estimate, iso.count.estimate);
  EXPECT_NEAR(directional.estimate, 0.90912881671669959, 3.0 * directional.std_error);
}

TEST(Reproducibility, BitIdenticalAcrossRunsAndWorkerCounts) {
  auto c = defaults(3000);
  c.tx_pattern = c.rx_pattern = AntennaPattern{0.7, 2};
  const std::vector<LinkGeometry> links = {aligned(0.3), {0.6, 1.0, 2.0}};
  const auto first = dirnet::estimate_link_metrics(c, links);
  const auto again = dirnet::estimate_link_metrics(c, links);
  c.workers = 3;
  const auto threaded = dirnet::estimate_link_metrics(c, links);
  for (std::size_t i = 0; i < links.size(); ++i) {
    for (const auto* other : {&again, &threaded}) {
      EXPECT_TRUE(same_bits(first[i].connection.estimate, (*other)[i].connection.estimate));
      EXPECT_TRUE(same_bits(first[i].connection.std_error, (*other)[i].connection.std_error));
      EXPECT_TRUE(same_bits(first[i].rate.estimate, (*other)[i].rate.estimate));
      EXPECT_TRUE(same_bits(first[i].rate.std_error, (*other)[i].rate.std_error));
    }
  }
  auto d = defaults(1000);
  const auto degree1 = dirnet::estimate_mean_degree(d);
  d.workers = 4;
  EXPECT_TRUE(same_bits(degree1.estimate, dirnet::estimate_mean_degree(d).estimate));
}

TEST(Reproducibility, BatchEqualsSingleLink) {
  const auto c = defaults(2000);
  const std::vector<LinkGeometry> links = {aligned(0.2), aligned(0.5), {0.5, 0.0, 1.0}};
  const auto batch = dirnet::estimate_link_metrics(c, links);
  for (std::size_t i = 0; i < links.size(); ++i) {
    EXPECT_TRUE(same_bits(batch[i].connection.estimate, dirnet::estimate_connection_probability(c, links[i]).estimate));
    EXPECT_TRUE(same_bits(batch[i].rate.estimate, dirnet::estimate_data_rate(c, links[i]).estimate));
  }
}

TEST(Reproducibility, SeedChangesResult) {
  auto c = defaults(2000);
  const auto a = dirnet::estimate_data_rate(c, aligned(0.5));
  c.rng_seed += 1;
  EXPECT_NE(a.estimate, dirnet::estimate_data_rate(c, aligned(0.5)).estimate);
}

TEST(Validation, RejectsBadConfigs) {
  auto c = defaults(10);
  c.disk_radius = 0.0;
  EXPECT_THROW(dirnet::estimate_connection_probability(c, aligned(0.4)), dirnet::validation_error);
  c = defaults(0);
  EXPECT_THROW(dirnet::estimate_connection_probability(c, aligned(0.4)), dirnet::validation_error);
  c = defaults(10);
  EXPECT_THROW(dirnet::estimate_connection_probability(c, aligned(0.0)), dirnet::singular_input_error);
  EXPECT_THROW(dirnet::estimate_connection_probability(c, aligned(9.0)), dirnet::validation_error);
}
