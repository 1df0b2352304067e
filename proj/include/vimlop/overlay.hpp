#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vimlop/camera.hpp"
#include "vimlop/render.hpp"

namespace vimlop {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  RgbImage(int w, int h);
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  std::array<std::uint8_t, 3> get(int x, int y) const;
};

/// Bresenham segment, clipped to the image.
void draw_line(RgbImage& image, const Vec2& a, const Vec2& b, std::uint8_t r, std::uint8_t g, std::uint8_t bl);

/// Each contour point as a short segment along its tangent: video points in
/// white, model samples in green.
RgbImage draw_overlay(const CameraFrame& frame, const std::vector<ContourSample>& model);

/// Mean distance (px) from each video contour point to the nearest model
/// sample; NaN when either set is empty.
double mean_contour_distance(const std::vector<OrientedContourPoint>& video, const std::vector<ContourSample>& model);

void write_png(const RgbImage& image, const std::filesystem::path& path);

struct OverlayStats {
  int frame_id = 0;
  std::size_t video_points = 0;
  std::size_t model_points = 0;
  double mean_distance_px = 0.0;
};

/// One PNG per frame (frame_<id>.png) with the model contours visible under
/// `model_from_cloud`.
std::vector<OverlayStats> write_overlays(const TriangleMesh& mesh, const std::vector<CameraFrame>& frames,
                                         const SimilarityTransform& model_from_cloud, double visibility_tolerance,
                                         const std::filesystem::path& dir);

}  // namespace vimlop
