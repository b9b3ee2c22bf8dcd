#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "divrank/common.hpp"
#include "divrank/measures.hpp"
#include "oracles/measures_oracle.hpp"

namespace m = divrank::measures;
using Vec = std::vector<double>;

namespace {

Vec random_distribution(std::mt19937_64& rng, std::size_t n, bool with_zeros) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec p(n);
  for (auto& x : p) x = (with_zeros && u(rng) < 0.2) ? 0.0 : u(rng);
  p[0] += 0.05;
  double total = 0.0;
  for (double x : p) total += x;
  for (auto& x : p) x /= total;
  return p;
}

}  // namespace

TEST(Geometric, CosineExamples) {
  EXPECT_NEAR(m::cosine_distance(Vec{1, 0}, Vec{1, 0}), 0.0, 1e-15);
  EXPECT_NEAR(m::cosine_distance(Vec{1, 0}, Vec{0, 1}), 1.0, 1e-15);
  EXPECT_NEAR(m::cosine_distance(Vec{1, 1}, Vec{1, 0}), 0.29289321881345254, 1e-12);
  EXPECT_NEAR(m::cosine_distance(Vec{1, 0}, Vec{-1, 0}), 2.0, 1e-15);
}

TEST(Geometric, CosineRejectsZeroVector) {
  EXPECT_THROW(m::cosine_distance(Vec{0, 0}, Vec{1, 0}), divrank::ValidationError);
}

TEST(Geometric, LpExamples) {
  EXPECT_DOUBLE_EQ(m::l1_distance(Vec{1, 0}, Vec{0, 1}), 2.0);
  EXPECT_NEAR(m::l2_distance(Vec{1, 0}, Vec{0, 1}), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(m::l1_distance(Vec{0.5, 0.5}, Vec{0.9, 0.1}), 0.8, 1e-12);
  EXPECT_NEAR(m::l2_distance(Vec{0.5, 0.5}, Vec{0.9, 0.1}), 0.565685424949238, 1e-12);
  EXPECT_EQ(m::l1_distance(Vec{0.3, 0.7}, Vec{0.3, 0.7}), 0.0);
}

TEST(Geometric, LengthMismatch) {
  EXPECT_THROW(m::l1_distance(Vec{1, 0}, Vec{1}), divrank::ValidationError);
  EXPECT_THROW(m::l2_distance(Vec{1, 0}, Vec{1, 0, 0}), divrank::ValidationError);
  EXPECT_THROW(m::js_divergence(Vec{1, 0}, Vec{1}), divrank::ValidationError);
}

TEST(Renyi, Examples) {
  EXPECT_NEAR(m::renyi_divergence(Vec{0.5, 0.5}, Vec{0.9, 0.1}, 2.0), 1.0216512475319812, 1e-8);
  EXPECT_NEAR(m::renyi_divergence(Vec{0.2, 0.8}, Vec{0.2, 0.8}, 0.99), 0.0, 1e-12);
}

TEST(Renyi, RejectsDegenerateOrder) {
  EXPECT_THROW(m::renyi_divergence(Vec{0.5, 0.5}, Vec{0.9, 0.1}, 1.0), divrank::ValidationError);
  EXPECT_THROW(m::renyi_divergence(Vec{0.5, 0.5}, Vec{0.9, 0.1}, 0.0), divrank::ValidationError);
  EXPECT_THROW(m::renyi_entropy(Vec{0.5, 0.5}, 1.0), divrank::ValidationError);
}

TEST(Renyi, ApproachesKl) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_distribution(rng, 12, true);
    const auto q = random_distribution(rng, 12, false);
    const double kl = oracle::kl(p, q);
    EXPECT_NEAR(m::renyi_divergence(p, q, 1.0 - 1e-6), kl, 1e-4);
    EXPECT_NEAR(m::renyi_divergence(p, q, 1.0 + 1e-6), kl, 1e-4);
  }
}

TEST(JensenShannon, Examples) {
  EXPECT_NEAR(m::js_divergence(Vec{1, 0}, Vec{0, 1}), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(m::js_divergence(Vec{0.5, 0.5}, Vec{0.9, 0.1}), 0.10174922507919676, 1e-12);
  EXPECT_EQ(m::js_divergence(Vec{0.25, 0.75}, Vec{0.25, 0.75}), 0.0);
}

TEST(Bhattacharyya, Examples) {
  EXPECT_NEAR(m::bhattacharyya_coefficient(Vec{0.5, 0.5}, Vec{0.9, 0.1}), 0.8944271909999159, 1e-12);
  EXPECT_EQ(m::bhattacharyya_coefficient(Vec{1, 0}, Vec{0, 1}), 0.0);
  EXPECT_NEAR(m::bhattacharyya_coefficient(Vec{0.1, 0.9}, Vec{0.1, 0.9}), 1.0, 1e-12);
}

TEST(Wasserstein, Examples) {
  EXPECT_NEAR(m::wasserstein_1d(Vec{1, 0, 0, 0}, Vec{0, 0, 0, 1}), 3.0, 1e-15);
  EXPECT_NEAR(m::wasserstein_1d(Vec{0.5, 0.5, 0}, Vec{0, 0.5, 0.5}), 1.0, 1e-15);
  EXPECT_EQ(m::wasserstein_1d(Vec{0.2, 0.3, 0.5}, Vec{0.2, 0.3, 0.5}), 0.0);
}

TEST(WithinDomain, EntropyExamples) {
  EXPECT_EQ(m::entropy(Vec{0, 1, 0}), 0.0);
  EXPECT_NEAR(m::renyi_entropy(Vec{0, 1, 0}, 2.0), 0.0, 1e-15);
  EXPECT_NEAR(m::entropy(Vec{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-15);
  for (double alpha : {0.5, 0.99, 2.0, 5.0}) {
    EXPECT_NEAR(m::renyi_entropy(Vec{0.25, 0.25, 0.25, 0.25}, alpha), std::log(4.0), 1e-12);
  }
  EXPECT_NEAR(m::entropy(Vec{0.9, 0.1}), 0.3250829733914482, 1e-12);
  EXPECT_NEAR(m::renyi_entropy(Vec{0.9, 0.1}, 2.0), 0.19845093872383832, 1e-12);
}

TEST(WithinDomain, SimpsonExamples) {
  EXPECT_EQ(m::simpson_index(Vec{0, 1}), 1.0);
  EXPECT_NEAR(m::simpson_index(Vec(5, 0.2)), 0.2, 1e-15);
  EXPECT_NEAR(m::simpson_index(Vec{0.9, 0.1}), 0.82, 1e-15);
}

TEST(WithinDomain, RawMassIsRenormalized) {
  // A term distribution with 75% coverage measures like its normalized form.
  EXPECT_NEAR(m::entropy(Vec{0.5, 0.25}), m::entropy(Vec{2.0 / 3, 1.0 / 3}), 1e-15);
  EXPECT_NEAR(m::js_divergence(Vec{0.5, 0.25}, Vec{2.0 / 3, 1.0 / 3}), 0.0, 1e-15);
}

TEST(WithinDomain, AllZeroMassRejected) {
  EXPECT_THROW(m::entropy(Vec{0, 0}), divrank::ValidationError);
  EXPECT_THROW(m::renormalize(Vec{0.5, -0.1}), divrank::ValidationError);
}

TEST(Moments, Examples) {
  const auto c = m::moments(Vec(5, 0.2));
  EXPECT_NEAR(c.mean, 0.2, 1e-15);
  EXPECT_NEAR(c.variance, 0.0, 1e-30);
  EXPECT_EQ(c.skewness, 0.0);
  EXPECT_EQ(c.kurtosis, 0.0);

  const auto b = m::moments(Vec{0, 1});
  EXPECT_DOUBLE_EQ(b.mean, 0.5);
  EXPECT_DOUBLE_EQ(b.variance, 0.25);
  EXPECT_DOUBLE_EQ(b.skewness, 0.0);
  EXPECT_DOUBLE_EQ(b.kurtosis, -2.0);

  EXPECT_THROW(m::moments(Vec{1.0}), divrank::ValidationError);
}

TEST(Moments, ScaleBehaviour) {
  std::mt19937_64 rng(3);
  const auto x = random_distribution(rng, 30, true);
  Vec y = x;
  for (auto& v : y) v *= 7.5;
  const auto a = m::moments(x);
  const auto b = m::moments(y);
  EXPECT_NEAR(b.mean, 7.5 * a.mean, 1e-14);
  EXPECT_NEAR(b.variance, 7.5 * 7.5 * a.variance, 1e-13);
  EXPECT_NEAR(b.skewness, a.skewness, 1e-10);
  EXPECT_NEAR(b.kurtosis, a.kurtosis, 1e-10);
}

TEST(MeasureConfig, Validation) {
  m::MeasureConfig c;
  EXPECT_NO_THROW(c.validate());
  c.renyi_alpha = 1.0;
  EXPECT_THROW(c.validate(), divrank::ValidationError);
  c.renyi_alpha = 0.99;
  c.epsilon_smoothing = 1e-5;
  EXPECT_THROW(c.validate(), divrank::ValidationError);
}

TEST(Properties, SymmetryBoundsIdentity) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + i % 30;
    const auto p = random_distribution(rng, n, true);
    const auto q = random_distribution(rng, n, true);
    EXPECT_NEAR(m::js_divergence(p, q), m::js_divergence(q, p), 1e-14);
    EXPECT_NEAR(m::bhattacharyya_coefficient(p, q), m::bhattacharyya_coefficient(q, p), 1e-14);
    EXPECT_NEAR(m::wasserstein_1d(p, q), m::wasserstein_1d(q, p), 1e-13);
    EXPECT_NEAR(m::cosine_distance(p, q), m::cosine_distance(q, p), 1e-14);
    EXPECT_EQ(m::l1_distance(p, q), m::l1_distance(q, p));
    EXPECT_EQ(m::l2_distance(p, q), m::l2_distance(q, p));

    const double js = m::js_divergence(p, q);
    EXPECT_GE(js, 0.0);
    EXPECT_LE(js, std::numbers::ln2);
    const double bc = m::bhattacharyya_coefficient(p, q);
    EXPECT_GE(bc, 0.0);
    EXPECT_LE(bc, 1.0);
    const double cos = m::cosine_distance(p, q);
    EXPECT_GE(cos, 0.0);
    EXPECT_LE(cos, 1.0);
    const double s = m::simpson_index(p);
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_TRUE(std::isfinite(m::renyi_divergence(p, q, 0.99)));

    EXPECT_NEAR(m::js_divergence(p, p), 0.0, 1e-12);
    EXPECT_NEAR(m::bhattacharyya_coefficient(p, p), 1.0, 1e-12);
    EXPECT_NEAR(m::wasserstein_1d(p, p), 0.0, 1e-12);
    EXPECT_NEAR(m::cosine_distance(p, p), 0.0, 1e-12);
    EXPECT_NEAR(m::renyi_divergence(p, p, 0.99), 0.0, 1e-12);
    EXPECT_EQ(m::l1_distance(p, p), 0.0);
  }
}

TEST(Properties, RenyiIsAsymmetric) {
  const Vec p{0.7, 0.2, 0.1};
  const Vec q{0.1, 0.3, 0.6};
  EXPECT_GT(std::abs(m::renyi_divergence(p, q, 2.0) - m::renyi_divergence(q, p, 2.0)), 1e-3);
}

TEST(Properties, RenyiEntropyNonIncreasingInOrder) {
  std::mt19937_64 rng(9);
  const std::vector<double> grid{0.1, 0.5, 0.9, 0.99, 1.01, 1.5, 2.0, 4.0, 10.0};
  for (int i = 0; i < 100; ++i) {
    const auto p = random_distribution(rng, 2 + i % 40, true);
    double previous = m::renyi_entropy(p, grid[0]);
    for (std::size_t g = 1; g < grid.size(); ++g) {
      const double h = m::renyi_entropy(p, grid[g]);
      EXPECT_LE(h, previous + 1e-12);
      previous = h;
    }
  }
}

TEST(Oracle, MatchesBruteForce) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(i) % 49;
    const auto p = random_distribution(rng, n, i % 2 == 0);
    const auto q = random_distribution(rng, n, i % 3 == 0);
    EXPECT_NEAR(m::cosine_distance(p, q), oracle::cosine(p, q), 1e-9);
    EXPECT_NEAR(m::l1_distance(p, q), oracle::l1(p, q), 1e-9);
    EXPECT_NEAR(m::l2_distance(p, q), oracle::l2(p, q), 1e-9);
    EXPECT_NEAR(m::renyi_divergence(p, q, 0.99), oracle::renyi(p, q, 0.99), 1e-9);
    EXPECT_NEAR(m::js_divergence(p, q), oracle::js(p, q), 1e-9);
    EXPECT_NEAR(m::bhattacharyya_coefficient(p, q), oracle::bhattacharyya(p, q), 1e-9);
    EXPECT_NEAR(m::wasserstein_1d(p, q), oracle::wasserstein(p, q), 1e-9);
    EXPECT_NEAR(m::entropy(p), oracle::entropy(p), 1e-9);
    EXPECT_NEAR(m::renyi_entropy(p, 0.99), oracle::renyi_entropy(p, 0.99), 1e-9);
    EXPECT_NEAR(m::simpson_index(p), oracle::simpson(p), 1e-9);
    const auto a = m::moments(p);
    const auto b = oracle::moments(p);
    EXPECT_NEAR(a.mean, b.mean, 1e-9);
    EXPECT_NEAR(a.variance, b.variance, 1e-9);
    EXPECT_NEAR(a.skewness, b.skewness, 1e-9);
    EXPECT_NEAR(a.kurtosis, b.kurtosis, 1e-9);
  }
}
