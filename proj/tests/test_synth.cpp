#include <gtest/gtest.h>

#include <cmath>

#include "echo/synth.hpp"

using namespace echo;

TEST(Lfr, PowerLawMeanSolver) {
  const double lo = detail::solve_lower_cutoff(2.0, 15.0, 50.0);
  EXPECT_NEAR(detail::power_law_mean(2.0, lo, 50.0), 15.0, 1e-6);
  Rng rng(2);
  double s = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = detail::power_law_draw(2.0, lo, 50.0, rng);
    ASSERT_GE(x, lo);
    ASSERT_LE(x, 50.0);
    s += x;
  }
  EXPECT_NEAR(s / n, 15.0, 0.15);
}

TEST(Lfr, DefaultGraphMatchesTargets) {
  for (double mu : {0.1, 0.3, 0.5}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto g = generate_lfr(LfrConfig{.mu = mu, .seed = seed});
      EXPECT_EQ(g.graph.num_nodes(), 500u);
      EXPECT_GE(mean_degree(g.graph), 13.5);
      EXPECT_LE(mean_degree(g.graph), 16.5);
      EXPECT_NEAR(realized_mixing(g.graph, g.truth), mu, 0.05);
      for (NodeId v = 0; v < 500; ++v) ASSERT_LE(g.graph.degree(v), 50u);
      const auto sizes = [&] {
        std::vector<std::size_t> c(g.truth.num_communities(), 0);
        for (NodeId v = 0; v < 500; ++v) ++c[g.truth.canonical()[v]];
        return c;
      }();
      for (auto s : sizes) {
        EXPECT_GE(s, 20u);
        EXPECT_LE(s, 100u);
      }
    }
  }
}

TEST(Lfr, ZeroMixingHasNoCrossEdges) {
  auto g = generate_lfr(LfrConfig{.mu = 0.0, .seed = 3});
  for (const auto& e : g.graph.edges()) EXPECT_EQ(g.truth[e.u], g.truth[e.v]);
}

TEST(Lfr, DeterministicForSeed) {
  auto a = generate_lfr(LfrConfig{.seed = 9});
  auto b = generate_lfr(LfrConfig{.seed = 9});
  auto c = generate_lfr(LfrConfig{.seed = 10});
  EXPECT_EQ(a.graph.edges(), b.graph.edges());
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_NE(a.graph.edges(), c.graph.edges());
}

TEST(Lfr, RejectsBadConfig) {
  EXPECT_THROW(generate_lfr(LfrConfig{.mu = 1.5}), ConfigError);
  EXPECT_THROW(generate_lfr(LfrConfig{.n = 50}), ConfigError);
  EXPECT_THROW(generate_lfr(LfrConfig{.mean_degree = 60}), ConfigError);
}

TEST(Features, NoiselessRowsAreExact) {
  auto g = generate_lfr(LfrConfig{.seed = 2});
  Rng rng(1);
  auto x = synthesize_features(g.graph, g.truth, FeatureSynthConfig{.noise_sigma = 0.0}, rng);
  const auto canon = g.truth.canonical();
  ASSERT_EQ(x.cols(), 1 + canon.num_communities());
  std::size_t maxdeg = 0;
  for (NodeId v = 0; v < 500; ++v) maxdeg = std::max(maxdeg, g.graph.degree(v));
  for (NodeId v = 0; v < 500; ++v) {
    EXPECT_EQ(x(v, 0), static_cast<float>(double(g.graph.degree(v)) / maxdeg));
    for (std::size_t c = 0; c < canon.num_communities(); ++c) EXPECT_EQ(x(v, 1 + c), c == canon[v] ? 1.0f : 0.0f);
  }
}

TEST(Features, NoiseHasRequestedMoments) {
  auto g = generate_lfr(LfrConfig{.n = 2000, .max_community = 200, .seed = 4});
  Rng a(5), b(5);
  auto clean = synthesize_features(g.graph, g.truth, FeatureSynthConfig{.noise_sigma = 0.0}, a);
  auto noisy = synthesize_features(g.graph, g.truth, FeatureSynthConfig{.noise_sigma = 0.7}, b);
  double s = 0, s2 = 0;
  const std::size_t m = clean.rows() * clean.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const double r = double(noisy.data()[i]) - clean.data()[i];
    s += r;
    s2 += r * r;
  }
  EXPECT_NEAR(s / m, 0.0, 4 * 0.7 / std::sqrt(double(m)));
  EXPECT_NEAR(std::sqrt(s2 / m), 0.7, 0.01);
}

TEST(Features, WithoutDegreeColumn) {
  auto g = generate_lfr(LfrConfig{.seed = 2});
  Rng rng(1);
  auto x = synthesize_features(g.graph, g.truth, FeatureSynthConfig{.noise_sigma = 0.0, .include_degree = false}, rng);
  EXPECT_EQ(x.cols(), g.truth.num_communities());
}
