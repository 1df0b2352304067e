#pragma once

#include <vector>

#include "vimlop/camera.hpp"
#include "vimlop/geometry.hpp"

namespace vimlop {

/// Local update coordinates around a transform: (log-scale, rotation vector, translation).
constexpr int kParamCount = 7;
using Params = Eigen::Matrix<double, kParamCount, 1>;
using Jacobian3 = Eigen::Matrix<double, 3, kParamCount>;
using Hessian = Eigen::Matrix<double, kParamCount, kParamCount>;

/// (s e^{d0}, exp([d1..d3]) R, t + d4..d6).
SimilarityTransform retract(const SimilarityTransform& t, const Params& delta);

/// A frozen 3D match. `whitening` is L^{-1} for the (balance-scaled) covariance
/// of the data point, so the cost is 1/2 |W (R^T (y - t) - s x)|^2.
struct PointTerm {
  Vec3 x = Vec3::Zero();
  Vec3 y = Vec3::Zero();
  Mat3 whitening = Mat3::Identity();
};

/// A frozen contour match: model point/normal y, n against video point/normal.
struct ContourTerm {
  Vec3 y = Vec3::Zero();
  Vec3 n = Vec3::UnitX();
  Vec2 x_pos = Vec2::Zero();
  Vec2 x_normal = Vec2::UnitX();
  CameraIntrinsics intrinsics;
  SimilarityTransform camera_from_cloud;
  Mat2 sqrt_precision = Mat2::Identity();  // W2 with W2^T W2 = Sigma2d^{-1}
  double kappa = 1.0;
};

Vec3 point_residual(const PointTerm& term, const SimilarityTransform& t);
Jacobian3 point_jacobian(const PointTerm& term, const SimilarityTransform& t);
double point_cost(const PointTerm& term, const SimilarityTransform& t);
Params point_cost_gradient(const PointTerm& term, const SimilarityTransform& t);

/// Signed angle (radians) from the observed to the projected model normal.
double contour_angle(const ContourTerm& term, const SimilarityTransform& t);

/// (W2 (y_px - x_px), sqrt(kappa) * angle): the Gauss-Newton residual, whose
/// orientation part is the small-angle form of kappa (1 - cos angle).
Vec3 contour_residual(const ContourTerm& term, const SimilarityTransform& t);
Jacobian3 contour_jacobian(const ContourTerm& term, const SimilarityTransform& t);

/// Exact contour match error; +infinity if the model point falls behind the camera.
double contour_cost(const ContourTerm& term, const SimilarityTransform& t);
Params contour_cost_gradient(const ContourTerm& term, const SimilarityTransform& t);

/// Fixed-correspondence total match error.
struct Objective {
  std::vector<PointTerm> points;
  std::vector<ContourTerm> contours;

  double value(const SimilarityTransform& t) const;
  Params gradient(const SimilarityTransform& t) const;
  /// Gauss-Newton normal matrix J^T J of the residual form, and the exact
  /// gradient of value() (equal to J^T r for the 3D terms).
  void normal_equations(const SimilarityTransform& t, Hessian& jtj, Params& gradient) const;
  bool empty() const { return points.empty() && contours.empty(); }
};

}  // namespace vimlop
