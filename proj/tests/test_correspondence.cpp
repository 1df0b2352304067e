#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vimlop/correspondence.hpp"

using namespace vimlop;

namespace {

std::vector<ContourSample> random_samples(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> x(-10.0, 650.0);
  std::uniform_real_distribution<double> y(-10.0, 490.0);
  std::uniform_real_distribution<double> a(-kPi, kPi);
  std::vector<ContourSample> out(static_cast<std::size_t>(n));
  for (ContourSample& s : out) {
    s.pixel = Vec2(x(rng), y(rng));
    const double angle = a(rng);
    s.normal = Vec2(std::cos(angle), std::sin(angle));
  }
  return out;
}

}  // namespace

TEST(ContourGrid, MatchesBruteForce) {
  std::mt19937_64 rng(41);
  NoiseModel noise;
  std::uniform_real_distribution<double> x(-20.0, 660.0);
  std::uniform_real_distribution<double> y(-20.0, 500.0);
  std::uniform_real_distribution<double> a(-kPi, kPi);
  for (int round = 0; round < 5; ++round) {
    const auto samples = random_samples(rng, 40 * (round + 1));
    const ContourGrid grid(samples, 640, 480);
    const Mat2 precision = noise.sigma2d.inverse();
    for (int i = 0; i < 200; ++i) {
      OrientedContourPoint q;
      q.position = Vec2(x(rng), y(rng));
      const double angle = a(rng);
      q.normal = Vec2(std::cos(angle), std::sin(angle));
      double value = 0.0;
      const int id = grid.best_match(q, precision, noise, &value);
      const oracle::ContourPick o = oracle::brute_force_contour(samples, q, noise);
      EXPECT_EQ(id, o.id);
      if (o.id >= 0) EXPECT_NEAR(value, o.value, 1e-7);
    }
  }
}

TEST(ContourGrid, TiesResolveToLowestIndex) {
  std::vector<ContourSample> samples(3);
  samples[0].pixel = Vec2(100, 100);
  samples[1].pixel = Vec2(90, 100);
  samples[2].pixel = Vec2(110, 100);
  const ContourGrid grid(samples, 640, 480);
  OrientedContourPoint q;
  q.position = Vec2(100, 100);
  q.normal = Vec2::UnitX();
  NoiseModel noise;
  samples[0].normal = -Vec2::UnitX();  // gated out
  EXPECT_EQ(grid.best_match(q, noise.sigma2d.inverse(), noise), 1);
}

TEST(Correspond2d, GatedPointIsSaturatedNonInlier) {
  CameraFrame frame;
  OrientedContourPoint q;
  q.position = Vec2(50, 50);
  q.normal = Vec2::UnitY();
  frame.contours = {q};
  std::vector<ContourSample> s(1);
  s[0].pixel = Vec2(50, 50);
  s[0].normal = -Vec2::UnitY();
  const std::vector<CameraFrame> frames = {frame};
  const std::vector<std::vector<ContourSample>> cands = {s};
  NoiseModel noise;
  const auto m = correspond_2d(frames, cands, noise);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_FALSE(m[0].admissible);
  EXPECT_FALSE(m[0].inlier);
  EXPECT_EQ(m[0].candidate, -1);
  EXPECT_NEAR(m[0].error.value, noise.kappa * (1.0 - std::cos(noise.orientation_gate)), 1e-12);
}

TEST(Correspond2d, FillsMatchGeometry) {
  CameraFrame frame;
  OrientedContourPoint q;
  q.position = Vec2(50, 50);
  q.normal = Vec2::UnitX();
  frame.contours = {q};
  std::vector<ContourSample> s(1);
  s[0].pixel = Vec2(53, 54);
  s[0].normal = Vec2(std::cos(0.2), std::sin(0.2));
  const std::vector<CameraFrame> frames = {frame};
  const std::vector<std::vector<ContourSample>> cands = {s};
  const auto m = correspond_2d(frames, cands, NoiseModel{});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m[0].admissible);
  EXPECT_EQ(m[0].offset, Vec2(3, 4));
  EXPECT_NEAR(m[0].distance_px, 5.0, 1e-12);
  EXPECT_NEAR(m[0].angle, 0.2, 1e-12);
  EXPECT_NEAR(m[0].error.positional_term, 0.5 * 25.0 / 9.0, 1e-12);
}

TEST(Correspond3d, MatchesBruteForce) {
  const SpatialIndex index = build_index(make_icosphere(3, 4.0).flipped());
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<Feature3D> features(100);
  for (Feature3D& f : features) {
    f.position = Vec3(u(rng), u(rng), u(rng));
    f.covariance = oracle::random_spd(rng, 0.05, 1.0);
  }
  const SimilarityTransform t = oracle::random_similarity(rng, 0.3, 0.5);
  const auto matches = correspond_3d(features, index, t);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const oracle::MlpResult o = oracle::brute_force_mlp(index.mesh(), features[i], t);
    EXPECT_EQ(matches[i].feature, static_cast<int>(i));
    EXPECT_TRUE(matches[i].inlier);
    EXPECT_NEAR(matches[i].error.value, o.value, 1e-7 * std::max(1.0, o.value));
  }
}

TEST(Balance, EqualInfluenceFactor) {
  EXPECT_DOUBLE_EQ(equal_influence_factor(900, 900, 0.0), 1.0);
  // Doubling the contour count halves the 3D covariance scale.
  EXPECT_DOUBLE_EQ(equal_influence_factor(900, 1800, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(equal_influence_factor(900, 1800, 0.1), 0.45);
  EXPECT_DOUBLE_EQ(equal_influence_factor(900, 0, 0.1), 1.0);
}

TEST(Balance, TotalErrorCountsInliersOnly) {
  std::vector<Match3> m3(2);
  m3[0].error.value = 2.0;
  m3[1].error.value = 100.0;
  m3[1].inlier = false;
  std::vector<Match2> m2(2);
  m2[0].error.value = 3.0;
  m2[0].inlier = true;
  m2[1].error.value = 50.0;
  EXPECT_DOUBLE_EQ(total_error(m3, m2, 0.5), 2.0 / 0.5 + 3.0);
}
