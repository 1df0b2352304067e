#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace vimlop {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

Mat3 skew(const Vec3& v);

/// Rodrigues formula; exact at w = 0.
Mat3 rotation_exp(const Vec3& w);

/// Inverse of rotation_exp, returning an axis-angle vector with angle in [0, pi].
Vec3 rotation_log(const Mat3& r);

/// Geodesic angle between two rotations (radians).
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Nearest rotation matrix in the Frobenius sense.
Mat3 orthonormalize(const Mat3& m);

/// T(p) = s * R * p + t.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static SimilarityTransform identity() { return {}; }

  /// The quaternion is normalized on ingest.
  static SimilarityTransform from_quaternion(double scale, const Eigen::Quaterniond& q,
                                             const Vec3& translation);

  Vec3 operator()(const Vec3& p) const { return scale * (rotation * p) + translation; }

  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }

  SimilarityTransform inverse() const;

  /// Composition: (*this * rhs)(p) == (*this)(rhs(p)).
  SimilarityTransform operator*(const SimilarityTransform& rhs) const;

  Eigen::Quaterniond quaternion() const;

  bool is_valid(double tol = 1e-9) const;
};

Vec3 apply_transform(const SimilarityTransform& t, const Vec3& p);

/// Differences between two transforms, used for convergence tests.
struct TransformDelta {
  double translation = 0.0;  // mm
  double rotation = 0.0;     // radians
  double relative_scale = 0.0;
};

TransformDelta transform_delta(const SimilarityTransform& a, const SimilarityTransform& b);

/// Interpolates from `from` (alpha = 0) to `to` (alpha = 1): translation linearly,
/// rotation along the geodesic, and scale linearly in log space.
SimilarityTransform interpolate(const SimilarityTransform& from, const SimilarityTransform& to,
                                double alpha);

struct Feature3D {
  Vec3 position = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
};

struct OrientedContourPoint {
  Vec2 position = Vec2::Zero();
  Vec2 normal = Vec2::UnitX();
  int frame_id = 0;
};

struct NoiseModel {
  Mat2 sigma2d = 9.0 * Mat2::Identity();
  double kappa = 200.0;
  Mat3 sigma3d_default = 0.25 * Mat3::Identity();
  double trim_ratio_3d = 0.1;
  double chi2_p = 0.95;
  double orientation_gate = deg_to_rad(45.0);
  double contour_outlier_cap = 0.5;

  /// Throws Error(kDomain / kInvalidCovariance) when a field is out of range.
  void validate() const;
};

struct MatchError3 {
  double value = 0.0;
  Vec3 residual = Vec3::Zero();
};

struct MatchError2 {
  double value = 0.0;
  double positional_term = 0.0;
  double orientation_term = 0.0;
};

/// Cholesky factorization of a 3x3 covariance, Sigma = L L^T.
class CovarianceFactor {
 public:
  /// Throws Error(kInvalidCovariance) unless `sigma` is symmetric positive definite.
  explicit CovarianceFactor(const Mat3& sigma);

  const Mat3& sigma() const { return sigma_; }
  /// L^{-1}, so that |L^{-1} v|^2 = v^T Sigma^{-1} v.
  const Mat3& whitening() const { return whitening_; }
  /// Smallest eigenvalue of Sigma^{-1}.
  double min_precision() const { return min_precision_; }
  bool isotropic() const { return isotropic_; }

  double mahalanobis_sq(const Vec3& v) const { return (whitening_ * v).squaredNorm(); }

 private:
  Mat3 sigma_;
  Mat3 whitening_;
  double min_precision_ = 0.0;
  bool isotropic_ = false;
};

/// C3d = 1/2 r^T (R Sigma R^T)^{-1} r with r = y - T(x).
MatchError3 match_error_3d(const Feature3D& x, const Vec3& y, const SimilarityTransform& t);
MatchError3 match_error_3d(const Feature3D& x, const CovarianceFactor& cov, const Vec3& y,
                           const SimilarityTransform& t);

/// C2d = 1/2 dp^T Sigma2d^{-1} dp + kappa (1 - y_n . x_n).
MatchError2 match_error_2d(const OrientedContourPoint& x, const Vec2& y_pos,
                           const Vec2& y_normal, const NoiseModel& noise);

bool is_spd(const Mat2& m);
bool is_spd(const Mat3& m);

}  // namespace vimlop
