#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vimlop/render.hpp"
#include "vimlop/synthetic.hpp"

using namespace vimlop;

namespace {

const Scene& default_scene() {
  static const Scene scene = generate_scene(SceneSpec{});
  return scene;
}

}  // namespace

TEST(Cavity, ClosedWithInwardNormals) {
  const TriangleMesh mesh = make_pseudo_sinus();
  EXPECT_TRUE(mesh.is_closed());
  EXPECT_EQ(mesh.face_count(), 20480u);
  const SpatialIndex index = build_index(mesh);
  EXPECT_TRUE(index.interior_signed_check(Vec3::Zero()).interior);
  EXPECT_FALSE(index.interior_signed_check(Vec3(0.0, 30.0, 0.0)).interior);
  for (const SimilarityTransform& pose : default_trajectory(6)) {
    CameraView v;
    v.camera_from_model = pose;
    EXPECT_TRUE(index.interior_signed_check(v.center()).interior);
  }
}

TEST(Cavity, TrajectoryLooksAlongAxis) {
  const auto poses = default_trajectory(6);
  ASSERT_EQ(poses.size(), 6u);
  for (const SimilarityTransform& p : poses) {
    CameraView v;
    v.camera_from_model = p;
    EXPECT_GT(v.axis().x(), std::cos(deg_to_rad(8.0)));
    EXPECT_NEAR(p.scale, 1.0, 0.0);
  }
}

TEST(Scene, DefaultProtocolCounts) {
  const Scene& s = default_scene();
  EXPECT_EQ(s.features.size(), 900u);
  EXPECT_EQ(s.frames.size(), 6u);
  EXPECT_EQ(s.truth.middle_frame, 2);
  EXPECT_FALSE(s.truth.targets.empty());
  for (const CameraFrame& f : s.frames) {
    for (const OrientedContourPoint& c : f.contours) EXPECT_EQ(c.frame_id, f.id);
  }
  const SimilarityTransform& m = s.truth.misalignment;
  const double deg = rad_to_deg(rotation_log(m.rotation).norm());
  EXPECT_GE(deg, 2.0);
  EXPECT_LE(deg, 3.0);
}

TEST(Scene, InjectedNoiseStatistics) {
  const Scene& s = default_scene();
  Vec3 sum_sq = Vec3::Zero();
  Vec3 sum = Vec3::Zero();
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    const Mat3& rc = s.truth.camera_poses[static_cast<std::size_t>(s.truth.feature_frames[i])].rotation;
    const Vec3 n = rc * s.truth.feature_noise[i];
    sum += n;
    sum_sq += n.cwiseProduct(n);
  }
  const double n = static_cast<double>(s.features.size());
  const Vec3 mean = sum / n;
  const Vec3 sd = (sum_sq / n - mean.cwiseProduct(mean)).cwiseSqrt();
  EXPECT_NEAR(sd.x(), 0.3, 0.1 * 0.3);
  EXPECT_NEAR(sd.y(), 0.3, 0.1 * 0.3);
  EXPECT_NEAR(sd.z(), 0.5, 0.1 * 0.5);
}

TEST(Scene, FeaturesVisibleFromGeneratingCamera) {
  const Scene& s = default_scene();
  const SimilarityTransform m_inv = s.truth.misalignment.inverse();
  for (std::size_t i = 0; i < s.features.size(); i += 7) {
    const int j = s.truth.feature_frames[i];
    CameraView v;
    v.intrinsics = s.frames[static_cast<std::size_t>(j)].intrinsics;
    v.camera_from_model = s.truth.camera_poses[static_cast<std::size_t>(j)];
    const Vec3 surface = m_inv(s.features[i].position) - s.truth.feature_noise[i];
    const Projection p = project_point(v, surface);
    const double hit = oracle::ray_cast_depth(*s.mesh, v, p.pixel);
    EXPECT_NEAR(hit, p.depth, 1e-6) << i;
  }
}

TEST(Scene, SameSeedIsBitIdentical) {
  SceneSpec spec;
  spec.point_count = 200;
  const Scene a = generate_scene(spec);
  const Scene b = generate_scene(spec);
  ASSERT_EQ(a.features.size(), b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    EXPECT_EQ(a.features[i].position, b.features[i].position);
    EXPECT_EQ(a.features[i].covariance, b.features[i].covariance);
  }
  for (std::size_t j = 0; j < a.frames.size(); ++j) {
    ASSERT_EQ(a.frames[j].contours.size(), b.frames[j].contours.size());
    for (std::size_t i = 0; i < a.frames[j].contours.size(); ++i) {
      EXPECT_EQ(a.frames[j].contours[i].position, b.frames[j].contours[i].position);
      EXPECT_EQ(a.frames[j].contours[i].normal, b.frames[j].contours[i].normal);
    }
  }
  spec.seed = 2;
  const Scene c = generate_scene(spec);
  EXPECT_NE(a.features[0].position, c.features[0].position);
}

TEST(Scene, ShortfallReportsCount) {
  SceneSpec spec;
  spec.point_count = 10000000;
  try {
    generate_scene(spec);
    ADD_FAILURE() << "no shortfall";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCountShortfall);
    EXPECT_NE(std::string(e.what()).find("available"), std::string::npos);
  }
}

TEST(Scene, InvalidSpecRejected) {
  SceneSpec spec;
  spec.noise_parallel = -1.0;
  EXPECT_EQ(error_code_of([&] { spec.validate(); }), ErrorCode::kDomain);
  spec = SceneSpec{};
  spec.misalign_min_mm = 3.0;
  spec.misalign_max_mm = 2.0;
  EXPECT_EQ(error_code_of([&] { spec.validate(); }), ErrorCode::kDomain);
}

TEST(Tre, Examples) {
  const Scene& s = default_scene();
  EXPECT_LT(evaluate_tre(s.truth.registration(), s.truth), 1e-12);
  SimilarityTransform shifted = s.truth.registration();
  shifted.translation += Vec3(0.0, 0.6, 0.8);
  EXPECT_NEAR(evaluate_tre(shifted, s.truth), 1.0, 1e-12);

  GroundTruth identity;
  identity.targets = {Vec3(1, 2, 3), Vec3(-4, 0, 2)};
  EXPECT_EQ(evaluate_tre(SimilarityTransform{}, identity), 0.0);
  identity.targets.clear();
  EXPECT_EQ(error_code_of([&] { evaluate_tre(SimilarityTransform{}, identity); }), ErrorCode::kEmptyInput);
}

TEST(PoseError, Examples) {
  const Scene s = generate_scene(SceneSpec{}.noiseless());
  const PoseError perfect = evaluate_pose_error(s.truth.registration(), s.frames, s.truth);
  EXPECT_LT(perfect.position_mm, 1e-12);
  EXPECT_LT(perfect.angle_deg, 1e-9);

  std::vector<CameraFrame> rotated = s.frames;
  for (CameraFrame& f : rotated) {
    f.camera_from_cloud = SimilarityTransform{1.0, rotation_exp(Vec3(0.0, deg_to_rad(2.0), 0.0)), Vec3::Zero()} *
                          f.camera_from_cloud;
  }
  const PoseError e = evaluate_pose_error(s.truth.registration(), rotated, s.truth);
  EXPECT_NEAR(e.angle_deg, 2.0, 1e-9);
  // Rotating about the optical center leaves the center in place.
  EXPECT_LT(e.position_mm, 1e-9);
}

TEST(Reprojection, ZeroAtTruth) {
  const Scene& s = default_scene();
  EXPECT_LT(reprojection_error(s.truth.registration(), s.truth, s.frames[0].intrinsics), 1e-9);
  SimilarityTransform shifted = s.truth.registration();
  shifted.translation += Vec3(0.0, 1.0, 0.0);
  EXPECT_GT(reprojection_error(shifted, s.truth, s.frames[0].intrinsics), 1.0);
}

TEST(Outliers, InjectionDisplacesBehindWall) {
  SceneSpec spec;
  spec.point_count = 300;
  Scene s = generate_scene(spec);
  const std::vector<Feature3D> before = s.features;
  const std::vector<int> idx = inject_outliers(s, 0.1, 10.0, 4);
  ASSERT_EQ(idx.size(), 30u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  const SpatialIndex index(s.mesh);
  const SimilarityTransform m_inv = s.truth.misalignment.inverse();
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    const bool injected = std::binary_search(idx.begin(), idx.end(), static_cast<int>(i));
    const double moved = (s.features[i].position - before[i].position).norm();
    if (!injected) {
      EXPECT_EQ(moved, 0.0);
      continue;
    }
    EXPECT_NEAR(moved, 10.0 * s.truth.misalignment.scale, 1e-9);
    EXPECT_GE(index.closest_point(m_inv(s.features[i].position)).distance, 5.0 - 1e-9);
  }
  Scene t = generate_scene(spec);
  EXPECT_EQ(inject_outliers(t, 0.1, 10.0, 4), idx);
}

TEST(Sweep, RowPerOffsetAndZeroOffsetIsBest) {
  SceneSpec spec;
  spec.point_count = 300;
  const Scene s = generate_scene(spec);
  const SpatialIndex index(s.mesh);
  const std::vector<SweepOffset> offsets = {{0.0, 0.0}, {1.0, 2.0}, {30.0, 60.0}};
  const auto rows = perturbation_sweep(s, index, offsets, NoiseModel{}, SolverConfig{});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].converged);
  EXPECT_LT(rows[0].tre_mm, 0.5);
  EXPECT_LE(rows[0].contour_error_px, rows[2].contour_error_px);
  // 30 mm pushes every camera out of the cavity: recorded, not thrown.
  EXPECT_FALSE(rows[2].converged);
  EXPECT_TRUE(std::isinf(rows[2].contour_error_px));
  EXPECT_EQ(rows[2].termination, "infeasible-initialization");
}

TEST(Sweep, PerturbedStartAtZeroIsMisalignmentInverse) {
  const Scene& s = default_scene();
  const SimilarityTransform t = perturbed_start(s, {0.0, 0.0}, Vec3::UnitZ());
  EXPECT_LT(transform_delta(t, s.truth.registration()).translation, 1e-12);
  const SimilarityTransform u = perturbed_start(s, {2.0, 0.0}, Vec3::UnitZ());
  EXPECT_NEAR(evaluate_tre(u, s.truth), 2.0, 1e-9);
}

TEST(Stats, Spearman) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {2, 4, 8, 16, 32};
  const std::vector<double> c = {5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman(a, b), 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, c), -1.0, 1e-15);
  // Ties get average ranks: Pearson of (1,2,3,4) with (1.5,1.5,3,4).
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {7, 7, 8, 9};
  const Eigen::Vector4d rx(1, 2, 3, 4);
  const Eigen::Vector4d ry(1.5, 1.5, 3, 4);
  const Eigen::Vector4d dx = rx.array() - rx.mean();
  const Eigen::Vector4d dy = ry.array() - ry.mean();
  EXPECT_NEAR(spearman(x, y), dx.dot(dy) / (dx.norm() * dy.norm()), 1e-15);
  EXPECT_EQ(error_code_of([&] { spearman(std::vector<double>{1.0}, std::vector<double>{2.0}); }), ErrorCode::kDomain);
}

TEST(Stats, VonMisesSampler) {
  std::mt19937_64 rng(61);
  const int n = 20000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_von_mises(rng, 200.0);
    ASSERT_LE(std::abs(x), kPi);
    sum += x;
    sum_sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.003);
  EXPECT_NEAR(std::sqrt(sum_sq / n), 1.0 / std::sqrt(200.0), 0.05 / std::sqrt(200.0));
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(random_unit_vector(rng).norm(), 1.0, 1e-12);
}
