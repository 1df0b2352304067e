#include "vimlop/render.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "vimlop/error.hpp"

namespace vimlop {
namespace {

struct ScreenVertex {
  double u;
  double v;
  double inv_z;
};

double edge_fn(const ScreenVertex& a, const ScreenVertex& b, double x, double y) {
  return (b.u - a.u) * (y - a.v) - (b.v - a.v) * (x - a.u);
}

void raster_triangle(const ScreenVertex& p0, const ScreenVertex& p1, const ScreenVertex& p2, DepthBuffer& buf) {
  const double area = edge_fn(p0, p1, p2.u, p2.v);
  if (std::abs(area) < 1e-14) return;
  const double inv_area = 1.0 / area;
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({p0.u, p1.u, p2.u}))));
  const int x1 = std::min(buf.width - 1, static_cast<int>(std::floor(std::max({p0.u, p1.u, p2.u}))));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({p0.v, p1.v, p2.v}))));
  const int y1 = std::min(buf.height - 1, static_cast<int>(std::floor(std::max({p0.v, p1.v, p2.v}))));
  constexpr double kInside = -1e-12;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double b0 = edge_fn(p1, p2, x, y) * inv_area;
      const double b1 = edge_fn(p2, p0, x, y) * inv_area;
      const double b2 = 1.0 - b0 - b1;
      if (b0 < kInside || b1 < kInside || b2 < kInside) continue;
      const double inv_z = b0 * p0.inv_z + b1 * p1.inv_z + b2 * p2.inv_z;
      if (!(inv_z > 0.0)) continue;
      const double z = 1.0 / inv_z;
      double& d = buf.at(x, y);
      if (z < d) d = z;
    }
  }
}

}  // namespace

std::size_t DepthBuffer::covered_count() const {
  return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](double d) { return std::isfinite(d); }));
}

DepthBuffer render_depth(const TriangleMesh& mesh, const CameraView& view) {
  const CameraIntrinsics& k = view.intrinsics;
  DepthBuffer buf(k.width, k.height);
  std::vector<Vec3> cam(mesh.vertex_count());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = view.camera_from_model(mesh.vertices()[i]);

  std::array<Vec3, 4> poly;
  std::array<ScreenVertex, 4> screen;
  for (const Triangle& t : mesh.triangles()) {
    const Vec3* in[3] = {&cam[static_cast<std::size_t>(t[0])], &cam[static_cast<std::size_t>(t[1])],
                         &cam[static_cast<std::size_t>(t[2])]};
    if (in[0]->z() < kNearPlane && in[1]->z() < kNearPlane && in[2]->z() < kNearPlane) continue;
    // Clip against the near plane; a triangle yields at most a quad.
    int n = 0;
    for (int i = 0; i < 3; ++i) {
      const Vec3& a = *in[i];
      const Vec3& b = *in[(i + 1) % 3];
      const bool ain = a.z() >= kNearPlane;
      const bool bin = b.z() >= kNearPlane;
      if (ain) poly[static_cast<std::size_t>(n++)] = a;
      if (ain != bin) {
        const double s = (kNearPlane - a.z()) / (b.z() - a.z());
        Vec3 p = a + s * (b - a);
        p.z() = kNearPlane;
        poly[static_cast<std::size_t>(n++)] = p;
      }
    }
    if (n < 3) continue;
    for (int i = 0; i < n; ++i) {
      const Vec3& p = poly[static_cast<std::size_t>(i)];
      screen[static_cast<std::size_t>(i)] = {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy, 1.0 / p.z()};
    }
    for (int i = 1; i + 1 < n; ++i) {
      raster_triangle(screen[0], screen[static_cast<std::size_t>(i)], screen[static_cast<std::size_t>(i + 1)], buf);
    }
  }
  return buf;
}

std::vector<ContourSample> visible_contours(const TriangleMesh& mesh, const CameraView& view,
                                            const std::vector<OccludingEdge>& edges, const DepthBuffer& depth,
                                            double tolerance) {
  std::vector<ContourSample> out;
  const Vec3 center = view.center();
  const CameraIntrinsics& k = view.intrinsics;
  for (const OccludingEdge& e : edges) {
    Vec3 ma = e.a;
    Vec3 mb = e.b;
    Vec3 ca = view.camera_from_model(ma);
    Vec3 cb = view.camera_from_model(mb);
    if (ca.z() < kNearPlane && cb.z() < kNearPlane) continue;
    if (ca.z() < kNearPlane || cb.z() < kNearPlane) {
      const double s = (kNearPlane - ca.z()) / (cb.z() - ca.z());
      const Vec3 mc = ma + s * (mb - ma);
      const Vec3 cc = view.camera_from_model(mc);
      if (ca.z() < kNearPlane) {
        ma = mc;
        ca = cc;
      } else {
        mb = mc;
        cb = cc;
      }
    }
    const Vec3 n3 = contour_normal(mesh, e, center);
    Vec2 n2;
    try {
      n2 = project_orientation(view, n3);
    } catch (const Error&) {
      continue;
    }
    const double za = std::max(ca.z(), kNearPlane);
    const double zb = std::max(cb.z(), kNearPlane);
    const Vec2 ua(k.fx * ca.x() / za + k.cx, k.fy * ca.y() / za + k.cy);
    const Vec2 ub(k.fx * cb.x() / zb + k.cx, k.fy * cb.y() / zb + k.cy);
    const double length = (ub - ua).norm();
    // Skip edges whose screen bounding box misses the image entirely.
    if (std::max(ua.x(), ub.x()) < -0.5 || std::min(ua.x(), ub.x()) > k.width - 0.5 ||
        std::max(ua.y(), ub.y()) < -0.5 || std::min(ua.y(), ub.y()) > k.height - 0.5) {
      continue;
    }
    const int segments = std::max(1, static_cast<int>(std::ceil(length)));
    for (int s = 0; s < segments; ++s) {
      const double a = (s + 0.5) / segments;
      // Screen-space parameter -> 3D parameter (1/z is affine in screen space).
      const double inv_z = (1.0 - a) / za + a / zb;
      const double t3 = (a / zb) / inv_z;
      const Vec3 pm = ma + t3 * (mb - ma);
      const Vec3 pc = view.camera_from_model(pm);
      if (!(pc.z() > kMinDepth)) continue;
      const Vec2 px(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
      const int ix = static_cast<int>(std::lround(px.x()));
      const int iy = static_cast<int>(std::lround(px.y()));
      if (!depth.contains(ix, iy)) continue;
      if (!(pc.z() <= depth.at(ix, iy) + tolerance)) continue;
      ContourSample c;
      c.pixel = px;
      c.normal = n2;
      c.point = pm;
      c.normal3 = n3;
      c.depth = pc.z();
      c.edge = e.edge;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<ContourSample> compute_visible_contours(const TriangleMesh& mesh, const CameraView& view,
                                                    double tolerance, DepthBuffer* depth_out) {
  const std::vector<OccludingEdge> edges = occluding_edges(mesh, view.center());
  DepthBuffer depth = render_depth(mesh, view);
  std::vector<ContourSample> samples = visible_contours(mesh, view, edges, depth, tolerance);
  if (depth_out) *depth_out = std::move(depth);
  return samples;
}

void write_pgm(const DepthBuffer& depth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  double max_depth = 0.0;
  for (double d : depth.depth) {
    if (std::isfinite(d)) max_depth = std::max(max_depth, d);
  }
  out << "P5\n" << depth.width << " " << depth.height << "\n255\n";
  for (double d : depth.depth) {
    unsigned char v = 0;
    if (std::isfinite(d) && max_depth > 0.0) v = static_cast<unsigned char>(std::lround(255.0 * (1.0 - 0.9 * d / max_depth)));
    out.put(static_cast<char>(v));
  }
}

}  // namespace vimlop
