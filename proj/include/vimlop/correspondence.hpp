#pragma once

#include <span>
#include <vector>

#include "vimlop/camera.hpp"
#include "vimlop/geometry.hpp"
#include "vimlop/render.hpp"
#include "vimlop/spatial_index.hpp"

namespace vimlop {

struct Match3 {
  int feature = -1;
  Vec3 point = Vec3::Zero();
  int face = -1;
  MatchError3 error;
  bool inlier = true;
};

struct Match2 {
  int contour = -1;    // index into the owning frame's contour list
  int frame = -1;      // index into the frame list
  int candidate = -1;  // index into that frame's contour samples; -1 if gated out
  Vec2 pixel = Vec2::Zero();
  Vec2 normal = Vec2::UnitX();
  Vec3 point = Vec3::Zero();
  Vec3 normal3 = Vec3::UnitX();
  MatchError2 error;
  Vec2 offset = Vec2::Zero();  // matched minus observed pixel
  double distance_px = 0.0;
  double angle = 0.0;  // radians between matched and observed normals
  bool admissible = false;
  bool inlier = false;
};

/// Uniform grid over the image plane holding contour-sample ids per cell.
class ContourGrid {
 public:
  ContourGrid(const std::vector<ContourSample>& samples, int width, int height, double cell = 16.0);

  /// Minimizer of the contour match error among samples whose orientation
  /// deviates from `x.normal` by at most `noise.orientation_gate`; -1 if none.
  /// Ties resolve to the lowest sample index.
  int best_match(const OrientedContourPoint& x, const Mat2& precision, const NoiseModel& noise,
                 double* value_out = nullptr) const;

 private:
  const std::vector<ContourSample>* samples_;
  double cell_;
  int nx_;
  int ny_;
  std::vector<std::vector<int>> cells_;
};

/// Most-likely surface point for every feature under `t`; inlier flags start true.
std::vector<Match3> correspond_3d(std::span<const Feature3D> features, std::span<const CovarianceFactor> covariances,
                                  const SpatialIndex& index, const SimilarityTransform& t);
std::vector<Match3> correspond_3d(std::span<const Feature3D> features, const SpatialIndex& index,
                                  const SimilarityTransform& t);

/// Visible contour samples of every frame under the cloud placement `t`.
std::vector<std::vector<ContourSample>> compute_contour_candidates(const TriangleMesh& mesh,
                                                                   std::span<const CameraFrame> frames,
                                                                   const SimilarityTransform& t,
                                                                   double visibility_tolerance);

/// Gated most-likely contour match for every video contour point. Points
/// without an admissible candidate are non-inliers with a gate-saturated error.
std::vector<Match2> correspond_2d(std::span<const CameraFrame> frames,
                                  std::span<const std::vector<ContourSample>> candidates, const NoiseModel& noise);

/// Covariance scale n3d (1 - trim) / n2d that gives the 3D and 2D feature sets
/// equal influence; 1 when there are no contour features.
double equal_influence_factor(std::size_t n3d, std::size_t n2d, double trim_ratio);

/// Sum of inlier 3D errors (with covariances scaled by `factor`) plus inlier contour errors.
double total_error(std::span<const Match3> matches3, std::span<const Match2> matches2, double factor);

}  // namespace vimlop
