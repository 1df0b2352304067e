#include "vimlop/camera.hpp"

#include <fmt/format.h>

#include "vimlop/error.hpp"

namespace vimlop {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kDomain, fmt::format("focal lengths must be positive, got ({}, {})", fx, fy));
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kDomain, fmt::format("image size must be positive, got {}x{}", width, height));
  }
}

Vec3 CameraView::center() const { return camera_from_model.inverse().translation; }

Vec3 CameraView::axis() const { return camera_from_model.rotation.transpose().col(2); }

Vec3 CameraFrame::center_in_cloud() const { return -(camera_from_cloud.rotation.transpose() * camera_from_cloud.translation); }

CameraView CameraFrame::view(const SimilarityTransform& model_from_cloud) const {
  // p_cam = Rc R^T (p - t) + s tc : the camera rides rigidly with the cloud,
  // and the metric depth is expressed in model units.
  const SimilarityTransform& m = model_from_cloud;
  CameraView v;
  v.intrinsics = intrinsics;
  v.camera_from_model.rotation = camera_from_cloud.rotation * m.rotation.transpose();
  v.camera_from_model.translation =
      m.scale * camera_from_cloud.translation - v.camera_from_model.rotation * m.translation;
  return v;
}

Projection project_camera_point(const CameraIntrinsics& k, const Vec3& pc) {
  if (!(pc.z() > kMinDepth)) {
    throw Error(ErrorCode::kBehindCamera, fmt::format("point depth {} is not in front of the camera", pc.z()));
  }
  Projection p;
  p.depth = pc.z();
  p.pixel = {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
  return p;
}

Projection project_point(const CameraView& view, const Vec3& p_model) {
  return project_camera_point(view.intrinsics, view.camera_from_model(p_model));
}

Vec2 project_camera_orientation(const CameraIntrinsics& k, const Vec3& nc) {
  if (!(Vec2(nc.x(), nc.y()).norm() >= 1e-9)) {
    throw Error(ErrorCode::kDegenerateOrientation, "orientation is parallel to the optical axis");
  }
  const Vec2 m(k.fx * nc.x(), k.fy * nc.y());
  return m.normalized();
}

Vec2 project_orientation(const CameraView& view, const Vec3& n_model) {
  return project_camera_orientation(view.intrinsics, view.camera_from_model.rotation * n_model);
}

Vec3 back_project(const CameraView& view, const Vec2& pixel, double depth) {
  const CameraIntrinsics& k = view.intrinsics;
  const Vec3 pc((pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth);
  return view.camera_from_model.inverse()(pc);
}

SimilarityTransform look_at(const Vec3& center, const Vec3& forward, const Vec3& down) {
  const Vec3 z = forward.normalized();
  Vec3 y = down - down.dot(z) * z;
  if (y.norm() < 1e-9) y = z.unitOrthogonal();
  y.normalize();
  const Vec3 x = y.cross(z);
  Mat3 model_from_camera;
  model_from_camera.col(0) = x;
  model_from_camera.col(1) = y;
  model_from_camera.col(2) = z;
  SimilarityTransform t;
  t.rotation = model_from_camera.transpose();
  t.translation = -(t.rotation * center);
  return t;
}

}  // namespace vimlop
