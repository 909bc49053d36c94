#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

#include "prism/gmm.hpp"
#include "support/fixtures.hpp"

using namespace prism;

namespace {

EmbeddingMatrix two_clusters(std::uint64_t seed, std::size_t per_cluster) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v;
  for (std::size_t i = 0; i < 2 * per_cluster; ++i) {
    float centre = i < per_cluster ? -10.0f : 10.0f;
    v.push_back(centre + g(rng));
    v.push_back(centre + g(rng));
  }
  return EmbeddingMatrix(2 * per_cluster, 2, std::move(v));
}

}  // namespace

TEST(Gmm, DefaultComponents) {
  EXPECT_EQ(default_components(5), 1u);
  EXPECT_EQ(default_components(35), 3u);
  EXPECT_EQ(default_components(100000), 8u);
}

TEST(Gmm, SingleComponentIsSampleMeanAndVariance) {
  std::mt19937_64 rng(1);
  auto m = prism::testing::random_embeddings(rng, 400, 5);
  GmmOptions o;
  o.components = 1;
  auto model = fit_gmm(m, o);
  for (std::size_t j = 0; j < 5; ++j) {
    long double mean = 0, var = 0;
    for (std::size_t i = 0; i < 400; ++i) mean += m.at(i, j);
    mean /= 400;
    for (std::size_t i = 0; i < 400; ++i) var += (m.at(i, j) - mean) * (m.at(i, j) - mean);
    var /= 400;
    EXPECT_NEAR(model.means[j], static_cast<double>(mean), 1e-9 * std::max(1.0, std::abs(static_cast<double>(mean))));
    EXPECT_NEAR(model.variances[j], static_cast<double>(var), 1e-9 * static_cast<double>(var));
  }
  EXPECT_DOUBLE_EQ(model.weights[0], 1.0);
}

TEST(Gmm, UnitSquareDensityAtMean) {
  EmbeddingMatrix m(4, 2, {1, 1, -1, 1, 1, -1, -1, -1});
  GmmOptions o;
  o.components = 1;
  auto model = fit_gmm(m, o);
  std::vector<float> origin = {0, 0};
  EXPECT_NEAR(log_density(model, origin), -std::log(2.0 * std::numbers::pi), 1e-12);
}

TEST(Gmm, RecoversTwoSeparatedClusters) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto m = two_clusters(seed, 300);
    GmmOptions o;
    o.components = 2;
    o.seed = seed;
    auto model = fit_gmm(m, o);
    std::vector<std::size_t> order = {0, 1};
    if (model.means[0] > model.means[2]) std::swap(order[0], order[1]);
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(model.means[order[0] * 2 + j], -10.0, 0.5) << seed;
      EXPECT_NEAR(model.means[order[1] * 2 + j], 10.0, 0.5) << seed;
    }
    EXPECT_NEAR(model.weights[0], 0.5, 0.1);
    EXPECT_NEAR(model.weights[1], 0.5, 0.1);
  }
}

TEST(GmmProperty, LogLikelihoodNeverDecreases) {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = prism::testing::random_embeddings(rng, 100 + rng() % 400, 2 + rng() % 6);
    GmmOptions o;
    o.components = 1 + rng() % 6;
    o.seed = seed;
    o.tol = 0;
    o.max_iter = 60;
    auto model = fit_gmm(m, o);
    for (std::size_t i = 1; i < model.log_likelihood_trace.size(); ++i) {
      ASSERT_GE(model.log_likelihood_trace[i] - model.log_likelihood_trace[i - 1], -1e-9) << seed << " step " << i;
    }
    ASSERT_EQ(model.log_likelihood_trace.back(), model.final_log_likelihood);
  }
}

TEST(GmmProperty, SeedReproducible) {
  std::mt19937_64 rng(3);
  auto m = prism::testing::random_embeddings(rng, 300, 4);
  GmmOptions o;
  o.components = 4;
  o.seed = 99;
  auto a = fit_gmm(m, o);
  auto b = fit_gmm(m, o);
  EXPECT_EQ(a.means, b.means);
  EXPECT_EQ(familiarity_scores(a, m), familiarity_scores(b, m));
}

TEST(Familiarity, OutlierScoresLowestAndCopiesTie) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto base = prism::testing::random_embeddings(rng, 1000, 8);
    auto v = base.values();
    // Row 0 sits 10 sigma beyond the farthest inlier, in a random direction.
    double reach = 0;
    for (std::size_t i = 1; i < 1000; ++i) {
      double q = 0;
      for (std::size_t j = 0; j < 8; ++j) q += v[i * 8 + j] * v[i * 8 + j];
      reach = std::max(reach, std::sqrt(q));
    }
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> dir(8);
    double norm = 0;
    for (auto& x : dir) {
      x = g(rng);
      norm += x * x;
    }
    for (std::size_t j = 0; j < 8; ++j) v[j] = static_cast<float>((reach + 10.0) * dir[j] / std::sqrt(norm));
    std::copy_n(v.begin() + 10 * 8, 8, v.begin() + 20 * 8);
    EmbeddingMatrix m(1000, 8, v);
    GmmOptions o;
    o.components = default_components(1000);
    o.seed = seed;
    auto scores = familiarity_scores(fit_gmm(m, o), m);
    for (std::size_t i = 1; i < scores.size(); ++i) ASSERT_LT(scores[0], scores[i]) << "seed " << seed;
    // Row 10 was copied onto row 20.
    EXPECT_EQ(scores[10], scores[20]);
  }
}

TEST(Familiarity, SingleComponentModeIsMostFamiliar) {
  std::mt19937_64 rng(5);
  auto m = prism::testing::random_embeddings(rng, 200, 3);
  GmmOptions o;
  o.components = 1;
  auto model = fit_gmm(m, o);
  std::vector<float> mode(model.means.begin(), model.means.end());
  double at_mode = log_density(model, mode);
  for (double s : familiarity_scores(model, m)) EXPECT_LE(s, at_mode);
}

TEST(Familiarity, RankingIgnoresConstantShift) {
  std::mt19937_64 rng(6);
  auto m = prism::testing::random_embeddings(rng, 300, 4);
  GmmOptions o;
  o.components = 3;
  auto scores = familiarity_scores(fit_gmm(m, o), m);
  auto shifted = scores;
  for (auto& s : shifted) s += 123.25;
  auto argsort = [](const std::vector<double>& xs) {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    return idx;
  };
  EXPECT_EQ(argsort(scores), argsort(shifted));
}

TEST(Gmm, Errors) {
  EmbeddingMatrix m(3, 2, {1, 2, 3, 4, 5, 6});
  GmmOptions o;
  o.components = 4;
  try {
    fit_gmm(m, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateInput);
  }
  o.components = 1;
  auto model = fit_gmm(m, o);
  std::vector<float> wrong = {1, 2, 3};
  try {
    log_density(model, wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  o.components = 0;
  EXPECT_THROW(fit_gmm(m, o), Error);
}

TEST(Gmm, ConstantDataUsesVarianceFloor) {
  EmbeddingMatrix m(10, 2, std::vector<float>(20, 3.0f));
  GmmOptions o;
  o.components = 2;
  auto model = fit_gmm(m, o);
  for (double v : model.variances) EXPECT_GE(v, kVarianceFloor);
  auto scores = familiarity_scores(model, m);
  for (double s : scores) EXPECT_TRUE(std::isfinite(s));
}

TEST(Gmm, IsolatedPointDoesNotKeepAComponent) {
  std::mt19937_64 rng(8);
  auto base = prism::testing::random_embeddings(rng, 60, 3);
  auto v = base.values();
  v[0] = 50.0f;
  v[1] = 50.0f;
  v[2] = 50.0f;
  EmbeddingMatrix m(60, 3, v);
  GmmOptions o;
  o.components = 2;
  auto model = fit_gmm(m, o);
  EXPECT_EQ(model.dropped, 1u);
  for (double w : model.weights) EXPECT_TRUE(w == 0.0 || w * 60 >= kMinComponentSupport) << w;
  auto scores = familiarity_scores(model, m);
  EXPECT_EQ(std::min_element(scores.begin(), scores.end()) - scores.begin(), 0);
  for (std::size_t i = 1; i < model.log_likelihood_trace.size(); ++i) {
    EXPECT_GE(model.log_likelihood_trace[i] - model.log_likelihood_trace[i - 1], -1e-9);
  }
}
