#pragma once

#include <vector>

#include "vimlop/geometry.hpp"

namespace vimlop {

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  void validate() const;
};

/// Intrinsics plus a rigid camera-from-model pose.
struct CameraView {
  CameraIntrinsics intrinsics;
  SimilarityTransform camera_from_model;

  /// Optical center in model coordinates.
  Vec3 center() const;
  /// Optical axis (camera +z) in model coordinates.
  Vec3 axis() const;
};

/// One video frame: its fixed pose relative to the 3D feature cloud and its
/// detected contour points. The cloud and the cameras move together under the
/// registration transform.
struct CameraFrame {
  int id = 0;
  CameraIntrinsics intrinsics;
  /// Rigid (scale 1) map from cloud coordinates to camera coordinates.
  SimilarityTransform camera_from_cloud;
  std::vector<OrientedContourPoint> contours;

  /// Camera center in cloud coordinates.
  Vec3 center_in_cloud() const;
  /// View of this frame once the cloud is placed in model space by `model_from_cloud`.
  CameraView view(const SimilarityTransform& model_from_cloud) const;
};

struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
};

constexpr double kMinDepth = 1e-6;

/// Pinhole projection of a model point. Throws Error(kBehindCamera) when depth <= 1e-6.
Projection project_point(const CameraView& view, const Vec3& p_model);

/// Pinhole projection of a camera-frame point.
Projection project_camera_point(const CameraIntrinsics& k, const Vec3& p_camera);

/// Orthographic projection of a model direction, scaled to pixel units and
/// normalized. Throws Error(kDegenerateOrientation) when the image-plane
/// component is below 1e-9.
Vec2 project_orientation(const CameraView& view, const Vec3& n_model);
Vec2 project_camera_orientation(const CameraIntrinsics& k, const Vec3& n_camera);

/// Model-space point at `depth` along the ray through `pixel`.
Vec3 back_project(const CameraView& view, const Vec2& pixel, double depth);

/// Camera-from-model pose for an optical center looking along `forward`, with
/// image +y aligned as closely as possible to `down`.
SimilarityTransform look_at(const Vec3& center, const Vec3& forward, const Vec3& down);

}  // namespace vimlop
