#include "vimlop/objective.hpp"

#include <cmath>
#include <limits>

namespace vimlop {
namespace {

struct CameraPoint {
  Vec3 pc;
  Mat3 a;  // Rc R^T
};

CameraPoint camera_point(const ContourTerm& term, const SimilarityTransform& t) {
  CameraPoint c;
  c.a = term.camera_from_cloud.rotation * t.rotation.transpose();
  c.pc = c.a * (term.y - t.translation) + t.scale * term.camera_from_cloud.translation;
  return c;
}

}  // namespace

SimilarityTransform retract(const SimilarityTransform& t, const Params& delta) {
  SimilarityTransform r;
  r.scale = t.scale * std::exp(delta[0]);
  r.rotation = rotation_exp(delta.segment<3>(1)) * t.rotation;
  r.translation = t.translation + delta.segment<3>(4);
  return r;
}

Vec3 point_residual(const PointTerm& term, const SimilarityTransform& t) {
  return term.whitening * (t.rotation.transpose() * (term.y - t.translation) - t.scale * term.x);
}

Jacobian3 point_jacobian(const PointTerm& term, const SimilarityTransform& t) {
  const Mat3 wrt = term.whitening * t.rotation.transpose();
  Jacobian3 j;
  j.col(0) = -t.scale * (term.whitening * term.x);
  j.block<3, 3>(0, 1) = wrt * skew(term.y - t.translation);
  j.block<3, 3>(0, 4) = -wrt;
  return j;
}

double point_cost(const PointTerm& term, const SimilarityTransform& t) {
  return 0.5 * point_residual(term, t).squaredNorm();
}

Params point_cost_gradient(const PointTerm& term, const SimilarityTransform& t) {
  return point_jacobian(term, t).transpose() * point_residual(term, t);
}

double contour_angle(const ContourTerm& term, const SimilarityTransform& t) {
  const Mat3 a = term.camera_from_cloud.rotation * t.rotation.transpose();
  const Vec3 nc = a * term.n;
  const Vec2 m(term.intrinsics.fx * nc.x(), term.intrinsics.fy * nc.y());
  const Vec2& x = term.x_normal;
  return std::atan2(x.x() * m.y() - x.y() * m.x(), x.dot(m));
}

Vec3 contour_residual(const ContourTerm& term, const SimilarityTransform& t) {
  const CameraPoint c = camera_point(term, t);
  const CameraIntrinsics& k = term.intrinsics;
  const Vec2 px(k.fx * c.pc.x() / c.pc.z() + k.cx, k.fy * c.pc.y() / c.pc.z() + k.cy);
  Vec3 r;
  r.head<2>() = term.sqrt_precision * (px - term.x_pos);
  r[2] = std::sqrt(term.kappa) * contour_angle(term, t);
  return r;
}

Jacobian3 contour_jacobian(const ContourTerm& term, const SimilarityTransform& t) {
  const CameraPoint c = camera_point(term, t);
  const CameraIntrinsics& k = term.intrinsics;
  const double z = c.pc.z();
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << k.fx / z, 0.0, -k.fx * c.pc.x() / (z * z),
           0.0, k.fy / z, -k.fy * c.pc.y() / (z * z);

  Eigen::Matrix<double, 3, kParamCount> dpc;
  dpc.col(0) = t.scale * term.camera_from_cloud.translation;
  dpc.block<3, 3>(0, 1) = c.a * skew(term.y - t.translation);
  dpc.block<3, 3>(0, 4) = -c.a;

  Jacobian3 j = Jacobian3::Zero();
  j.topRows<2>() = term.sqrt_precision * dproj * dpc;

  const Vec3 nc = c.a * term.n;
  const Vec2 m(k.fx * nc.x(), k.fy * nc.y());
  const double len = m.norm();
  const Vec2 yhat = m / len;
  const Vec2 perp(-yhat.y(), yhat.x());
  const Eigen::Matrix<double, 2, 3> dm_dnc = (Eigen::Matrix<double, 2, 3>() << k.fx, 0.0, 0.0, 0.0, k.fy, 0.0).finished();
  const Eigen::Matrix<double, 1, 3> dtheta_domega = perp.transpose() * dm_dnc * (c.a * skew(term.n)) / len;
  j.block<1, 3>(2, 1) = std::sqrt(term.kappa) * dtheta_domega;
  return j;
}

double contour_cost(const ContourTerm& term, const SimilarityTransform& t) {
  const CameraPoint c = camera_point(term, t);
  if (!(c.pc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
  const CameraIntrinsics& k = term.intrinsics;
  const Vec2 px(k.fx * c.pc.x() / c.pc.z() + k.cx, k.fy * c.pc.y() / c.pc.z() + k.cy);
  const Vec2 w = term.sqrt_precision * (px - term.x_pos);
  return 0.5 * w.squaredNorm() + term.kappa * (1.0 - std::cos(contour_angle(term, t)));
}

Params contour_cost_gradient(const ContourTerm& term, const SimilarityTransform& t) {
  const Vec3 r = contour_residual(term, t);
  const Jacobian3 j = contour_jacobian(term, t);
  const double theta = contour_angle(term, t);
  Params g = j.topRows<2>().transpose() * r.head<2>();
  // d/dp kappa (1 - cos theta) = kappa sin(theta) dtheta/dp
  g += term.kappa * std::sin(theta) * j.row(2).transpose() / std::sqrt(term.kappa);
  return g;
}

double Objective::value(const SimilarityTransform& t) const {
  double sum = 0.0;
  for (const PointTerm& p : points) sum += point_cost(p, t);
  for (const ContourTerm& c : contours) sum += contour_cost(c, t);
  return sum;
}

Params Objective::gradient(const SimilarityTransform& t) const {
  Params g = Params::Zero();
  for (const PointTerm& p : points) g += point_cost_gradient(p, t);
  for (const ContourTerm& c : contours) g += contour_cost_gradient(c, t);
  return g;
}

void Objective::normal_equations(const SimilarityTransform& t, Hessian& jtj, Params& jtr) const {
  jtj.setZero();
  jtr.setZero();
  for (const PointTerm& p : points) {
    const Jacobian3 j = point_jacobian(p, t);
    jtj.noalias() += j.transpose() * j;
    jtr.noalias() += j.transpose() * point_residual(p, t);
  }
  for (const ContourTerm& c : contours) {
    const Jacobian3 j = contour_jacobian(c, t);
    const Vec3 r = contour_residual(c, t);
    jtj.noalias() += j.transpose() * j;
    jtr.noalias() += j.topRows<2>().transpose() * r.head<2>();
    // Exact gradient of kappa (1 - cos theta), so fixed points match the true objective.
    jtr.noalias() += std::sin(contour_angle(c, t)) * std::sqrt(c.kappa) * j.row(2).transpose();
  }
}

}  // namespace vimlop
