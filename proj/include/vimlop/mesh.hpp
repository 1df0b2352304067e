#pragma once

#include <array>
#include <vector>

#include "vimlop/geometry.hpp"

namespace vimlop {

using Triangle = std::array<int, 3>;

/// Undirected edge with its incident faces. `face_count` may exceed 2 for
/// non-manifold edges; only the first two face ids are stored.
struct MeshEdge {
  int v0 = -1;
  int v1 = -1;
  std::array<int, 2> faces{-1, -1};
  int face_count = 0;
};

struct AlignedBox {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const AlignedBox& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  double squared_distance(const Vec3& p) const {
    const Vec3 d = (min - p).cwiseMax(Vec3::Zero()).cwiseMax(p - max);
    return d.squaredNorm();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return (max - min).norm(); }
};

/// Triangle mesh with derived per-face normals, edge adjacency and the
/// angle-weighted pseudo-normals used for signed inside/outside tests.
///
/// Face normals follow the right-hand rule over (v0, v1, v2). For cavity
/// models they point into the open space the camera looks through.
class TriangleMesh {
 public:
  TriangleMesh() = default;

  /// Validates indices, rejects zero-area triangles (Error kParse) and
  /// inconsistently oriented shared edges (Error kTopology).
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<MeshEdge>& edges() const { return edges_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return triangles_.size(); }
  bool empty() const { return triangles_.empty(); }

  const Vec3& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  const Triangle& triangle(int f) const { return triangles_[static_cast<std::size_t>(f)]; }
  const Vec3& face_normal(int f) const { return face_normals_[static_cast<std::size_t>(f)]; }
  Vec3 face_centroid(int f) const;
  double face_area(int f) const;

  /// Edge ids of face f, ordered (v0v1, v1v2, v2v0).
  const std::array<int, 3>& face_edges(int f) const { return face_edges_[static_cast<std::size_t>(f)]; }

  const Vec3& vertex_pseudo_normal(int v) const { return vertex_normals_[static_cast<std::size_t>(v)]; }
  const Vec3& edge_pseudo_normal(int e) const { return edge_normals_[static_cast<std::size_t>(e)]; }

  /// True when every edge has exactly two incident faces.
  bool is_closed() const;
  std::vector<int> boundary_edges() const;
  std::vector<int> non_manifold_edges() const;

  const AlignedBox& bounds() const { return bounds_; }
  double mean_edge_length() const;

  /// Reverses the winding of every triangle, flipping all normals.
  TriangleMesh flipped() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Vec3> face_normals_;
  std::vector<MeshEdge> edges_;
  std::vector<std::array<int, 3>> face_edges_;
  std::vector<Vec3> vertex_normals_;
  std::vector<Vec3> edge_normals_;
  AlignedBox bounds_;
};

/// Unit icosphere subdivided `level` times, scaled to `radius`, with outward normals.
TriangleMesh make_icosphere(int level, double radius, const Vec3& center = Vec3::Zero());

/// Axis-aligned box [lo, hi] with outward normals (12 triangles).
TriangleMesh make_box(const Vec3& lo, const Vec3& hi);

}  // namespace vimlop
