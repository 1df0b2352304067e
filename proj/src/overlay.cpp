#include "vimlop/overlay.hpp"

#include <fmt/format.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <limits>

#include "vimlop/error.hpp"

namespace vimlop {

RgbImage::RgbImage(int w, int h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  pixels[i] = r;
  pixels[i + 1] = g;
  pixels[i + 2] = b;
}

std::array<std::uint8_t, 3> RgbImage::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void draw_line(RgbImage& image, const Vec2& a, const Vec2& b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
  if (!a.allFinite() || !b.allFinite()) return;
  const double limit = 4.0 * (image.width + image.height);
  if (a.cwiseAbs().maxCoeff() > limit || b.cwiseAbs().maxCoeff() > limit) return;
  int x0 = static_cast<int>(std::lround(a.x()));
  int y0 = static_cast<int>(std::lround(a.y()));
  const int x1 = static_cast<int>(std::lround(b.x()));
  const int y1 = static_cast<int>(std::lround(b.y()));
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    image.set(x0, y0, r, g, bl);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

RgbImage draw_overlay(const CameraFrame& frame, const std::vector<ContourSample>& model) {
  RgbImage image(frame.intrinsics.width, frame.intrinsics.height);
  constexpr double kHalf = 1.5;
  for (const ContourSample& s : model) {
    const Vec2 t(-s.normal.y(), s.normal.x());
    draw_line(image, s.pixel - kHalf * t, s.pixel + kHalf * t, 0, 255, 0);
  }
  for (const OrientedContourPoint& x : frame.contours) {
    const Vec2 t(-x.normal.y(), x.normal.x());
    draw_line(image, x.position - kHalf * t, x.position + kHalf * t, 255, 255, 255);
  }
  return image;
}

double mean_contour_distance(const std::vector<OrientedContourPoint>& video, const std::vector<ContourSample>& model) {
  if (video.empty() || model.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const OrientedContourPoint& x : video) {
    double best = std::numeric_limits<double>::infinity();
    for (const ContourSample& s : model) best = std::min(best, (s.pixel - x.position).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(video.size());
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (fp == nullptr) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::kIo, fmt::format("PNG encoding failed for {}", path.string()));
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width) * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::vector<OverlayStats> write_overlays(const TriangleMesh& mesh, const std::vector<CameraFrame>& frames,
                                         const SimilarityTransform& model_from_cloud, double visibility_tolerance,
                                         const std::filesystem::path& dir) {
  std::vector<OverlayStats> stats;
  for (const CameraFrame& frame : frames) {
    const std::vector<ContourSample> model =
        compute_visible_contours(mesh, frame.view(model_from_cloud), visibility_tolerance);
    write_png(draw_overlay(frame, model), dir / fmt::format("frame_{}.png", frame.id));
    OverlayStats s;
    s.frame_id = frame.id;
    s.video_points = frame.contours.size();
    s.model_points = model.size();
    s.mean_distance_px = mean_contour_distance(frame.contours, model);
    stats.push_back(s);
  }
  return stats;
}

}  // namespace vimlop
