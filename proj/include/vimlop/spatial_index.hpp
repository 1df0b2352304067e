#pragma once

#include <memory>
#include <vector>

#include "vimlop/geometry.hpp"
#include "vimlop/mesh.hpp"

namespace vimlop {

/// Which sub-simplex of a triangle a closest point lies on.
enum class TriangleRegion { kFace, kEdge01, kEdge12, kEdge20, kVertex0, kVertex1, kVertex2 };

struct TrianglePoint {
  Vec3 point = Vec3::Zero();
  Vec3 barycentric = Vec3::Zero();
  TriangleRegion region = TriangleRegion::kFace;
};

/// Euclidean closest point on triangle (a, b, c) to p.
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct ClosestPointResult {
  Vec3 point = Vec3::Zero();
  int face = -1;
  double distance = 0.0;
  TriangleRegion region = TriangleRegion::kFace;
};

struct MostLikelyPointResult {
  Vec3 point = Vec3::Zero();
  int face = -1;
  MatchError3 error;
};

struct InteriorResult {
  bool interior = false;
  Vec3 nearest = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  /// normal . (q - nearest); positive on the viewing side.
  double signed_distance = 0.0;
};

/// Bounding volume hierarchy over the triangles of a mesh. Immutable after
/// construction; queries are const and may run concurrently.
class SpatialIndex {
 public:
  struct Node {
    AlignedBox box;
    int left = -1;
    int right = -1;
    int first = 0;  // into the permuted triangle list, leaves only
    int count = 0;
    bool leaf() const { return left < 0; }
  };

  /// Throws Error(kEmptyInput) for a mesh without triangles.
  SpatialIndex(std::shared_ptr<const TriangleMesh> mesh, int leaf_size = 8);

  const TriangleMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const TriangleMesh> mesh_ptr() const { return mesh_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  /// Triangle ids stored by leaf ranges.
  const std::vector<int>& leaf_triangles() const { return order_; }
  std::size_t leaf_count() const;

  /// Ties on distance resolve to the lowest face id.
  ClosestPointResult closest_point(const Vec3& q) const;

  /// Surface point minimizing 1/2 r^T (R Sigma R^T)^{-1} r with r = y - T(x).
  /// Ties on error resolve to the lowest face id.
  MostLikelyPointResult most_likely_point(const Feature3D& x, const SimilarityTransform& t) const;
  MostLikelyPointResult most_likely_point(const Feature3D& x, const CovarianceFactor& cov,
                                          const SimilarityTransform& t) const;

  /// Classifies q by the pseudo-normal at its nearest surface point. Points
  /// within 1e-12 of the surface plane are reported exterior.
  InteriorResult interior_signed_check(const Vec3& q) const;

 private:
  int build(int first, int count, std::vector<Vec3>& centroids, int leaf_size);

  std::shared_ptr<const TriangleMesh> mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

SpatialIndex build_index(TriangleMesh mesh, int leaf_size = 8);

/// Surface normal used by the interior test at a closest-point result.
Vec3 pseudo_normal(const TriangleMesh& mesh, const ClosestPointResult& c);

}  // namespace vimlop
