#pragma once

#include <filesystem>
#include <limits>
#include <vector>

#include "vimlop/camera.hpp"
#include "vimlop/mesh.hpp"
#include "vimlop/silhouette.hpp"

namespace vimlop {

/// Per-pixel camera-space depth (mm). Pixel (x, y) has its center at image
/// coordinates (x, y); uncovered pixels hold +infinity.
struct DepthBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> depth;

  DepthBuffer() = default;
  DepthBuffer(int w, int h)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * static_cast<std::size_t>(h),
                                   std::numeric_limits<double>::infinity()) {}

  double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  double& at(int x, int y) { return depth[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t covered_count() const;
};

/// Near clipping plane of the rasterizer (mm).
constexpr double kNearPlane = 1e-3;

/// Rasterizes every triangle with perspective-correct depth and a min z-test.
DepthBuffer render_depth(const TriangleMesh& mesh, const CameraView& view);

/// A visible occluding-contour sample: a candidate model match for video contours.
struct ContourSample {
  Vec2 pixel = Vec2::Zero();
  Vec2 normal = Vec2::UnitX();
  Vec3 point = Vec3::Zero();    // model coordinates
  Vec3 normal3 = Vec3::UnitX();  // model coordinates
  double depth = 0.0;
  int edge = -1;
};

/// Samples each occluding edge at <= 1 pixel projected spacing and keeps the
/// samples whose depth is within `tolerance` of the depth buffer.
std::vector<ContourSample> visible_contours(const TriangleMesh& mesh, const CameraView& view,
                                            const std::vector<OccludingEdge>& edges,
                                            const DepthBuffer& depth, double tolerance);

/// occluding_edges + render_depth + visible_contours for one view. The depth
/// buffer is returned through `depth_out` when non-null.
std::vector<ContourSample> compute_visible_contours(const TriangleMesh& mesh, const CameraView& view,
                                                    double tolerance, DepthBuffer* depth_out = nullptr);

/// 8-bit binary PGM, near = bright, uncovered = black.
void write_pgm(const DepthBuffer& depth, const std::filesystem::path& path);

}  // namespace vimlop
