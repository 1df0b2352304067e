#include "vimlop/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>

#include <algorithm>

#include "vimlop/error.hpp"

namespace vimlop {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 rotation_exp(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 k = skew(w);
  if (theta < 1e-8) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 rotation_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(orthonormalize(r));
  return aa.angle() * aa.axis();
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  const double c = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
  // acos loses precision near 0; use the skew part there.
  const Vec3 s(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * s.norm(), c);
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

SimilarityTransform SimilarityTransform::from_quaternion(double scale, const Eigen::Quaterniond& q,
                                                         const Vec3& translation) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kDomain, fmt::format("similarity scale must be positive, got {}", scale));
  }
  const double n = q.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw Error(ErrorCode::kDomain, "quaternion has zero norm");
  }
  SimilarityTransform t;
  t.scale = scale;
  t.rotation = q.normalized().toRotationMatrix();
  t.translation = translation;
  return t;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.transpose();
  inv.translation = -inv.scale * (inv.rotation * translation);
  return inv;
}

SimilarityTransform SimilarityTransform::operator*(const SimilarityTransform& rhs) const {
  SimilarityTransform c;
  c.scale = scale * rhs.scale;
  c.rotation = rotation * rhs.rotation;
  c.translation = scale * (rotation * rhs.translation) + translation;
  return c;
}

Eigen::Quaterniond SimilarityTransform::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

bool SimilarityTransform::is_valid(double tol) const {
  if (!(scale > 0.0) || !std::isfinite(scale)) return false;
  if (!translation.allFinite()) return false;
  const Mat3 e = rotation.transpose() * rotation - Mat3::Identity();
  if (e.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Vec3 apply_transform(const SimilarityTransform& t, const Vec3& p) { return t(p); }

TransformDelta transform_delta(const SimilarityTransform& a, const SimilarityTransform& b) {
  TransformDelta d;
  d.translation = (a.translation - b.translation).norm();
  d.rotation = rotation_angle_between(a.rotation, b.rotation);
  d.relative_scale = std::abs(b.scale - a.scale) / a.scale;
  return d;
}

SimilarityTransform interpolate(const SimilarityTransform& from, const SimilarityTransform& to,
                                double alpha) {
  SimilarityTransform t;
  t.translation = (1.0 - alpha) * from.translation + alpha * to.translation;
  t.rotation = from.rotation * rotation_exp(alpha * rotation_log(from.rotation.transpose() * to.rotation));
  t.scale = std::exp((1.0 - alpha) * std::log(from.scale) + alpha * std::log(to.scale));
  return t;
}

bool is_spd(const Mat2& m) {
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * m.cwiseAbs().maxCoeff()) {
    return false;
  }
  Eigen::LLT<Mat2> llt(m);
  return llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
}

bool is_spd(const Mat3& m) {
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * m.cwiseAbs().maxCoeff()) {
    return false;
  }
  Eigen::LLT<Mat3> llt(m);
  return llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
}

void NoiseModel::validate() const {
  if (!is_spd(sigma2d)) throw Error(ErrorCode::kInvalidCovariance, "sigma2d is not SPD");
  if (!is_spd(sigma3d_default)) throw Error(ErrorCode::kInvalidCovariance, "sigma3d_default is not SPD");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::kDomain, fmt::format("kappa must be positive, got {}", kappa));
  }
  if (!(trim_ratio_3d >= 0.0 && trim_ratio_3d < 1.0)) {
    throw Error(ErrorCode::kDomain, fmt::format("trim_ratio_3d must lie in [0,1), got {}", trim_ratio_3d));
  }
  if (!(chi2_p > 0.0 && chi2_p < 1.0)) {
    throw Error(ErrorCode::kDomain, fmt::format("chi2_p must lie in (0,1), got {}", chi2_p));
  }
  if (!(orientation_gate > 0.0 && orientation_gate <= kPi)) {
    throw Error(ErrorCode::kDomain, fmt::format("orientation_gate must lie in (0,pi], got {}", orientation_gate));
  }
  if (!(contour_outlier_cap > 0.0 && contour_outlier_cap <= 1.0)) {
    throw Error(ErrorCode::kDomain,
                fmt::format("contour_outlier_cap must lie in (0,1], got {}", contour_outlier_cap));
  }
}

CovarianceFactor::CovarianceFactor(const Mat3& sigma) : sigma_(sigma) {
  if (!is_spd(sigma)) {
    throw Error(ErrorCode::kInvalidCovariance, "covariance is not symmetric positive definite");
  }
  const Mat3 sym = 0.5 * (sigma + sigma.transpose());
  Eigen::LLT<Mat3> llt(sym);
  const Mat3 l = llt.matrixL();
  whitening_ = l.triangularView<Eigen::Lower>().solve(Mat3::Identity());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sym, Eigen::EigenvaluesOnly);
  min_precision_ = 1.0 / eig.eigenvalues().maxCoeff();
  const double d = sym(0, 0);
  isotropic_ = sym(1, 1) == d && sym(2, 2) == d && sym(0, 1) == 0.0 && sym(0, 2) == 0.0 &&
               sym(1, 2) == 0.0;
}

MatchError3 match_error_3d(const Feature3D& x, const CovarianceFactor& cov, const Vec3& y,
                           const SimilarityTransform& t) {
  MatchError3 e;
  e.residual = y - t(x.position);
  // (R Sigma R^T)^{-1} = R Sigma^{-1} R^T, so whiten in the data frame.
  e.value = 0.5 * cov.mahalanobis_sq(t.rotation.transpose() * e.residual);
  return e;
}

MatchError3 match_error_3d(const Feature3D& x, const Vec3& y, const SimilarityTransform& t) {
  return match_error_3d(x, CovarianceFactor(x.covariance), y, t);
}

MatchError2 match_error_2d(const OrientedContourPoint& x, const Vec2& y_pos, const Vec2& y_normal,
                           const NoiseModel& noise) {
  MatchError2 e;
  const Vec2 d = y_pos - x.position;
  e.positional_term = 0.5 * d.dot(noise.sigma2d.ldlt().solve(d));
  const double c = std::clamp(y_normal.dot(x.normal), -1.0, 1.0);
  e.orientation_term = noise.kappa * (1.0 - c);
  e.value = e.positional_term + e.orientation_term;
  return e;
}

}  // namespace vimlop
