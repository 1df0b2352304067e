#pragma once

#include <vector>

#include "vimlop/mesh.hpp"

namespace vimlop {

/// A mesh edge separating a face oriented toward the camera from one oriented
/// away from it (or a front-facing boundary edge, where back_face is -1).
struct OccludingEdge {
  int edge = -1;
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  int front_face = -1;
  int back_face = -1;
};

/// Occluding edges of `mesh` seen from `camera_center`. Throws Error(kTopology)
/// naming the first non-manifold edge encountered.
std::vector<OccludingEdge> occluding_edges(const TriangleMesh& mesh, const Vec3& camera_center);

/// Contour normal of an occluding edge: orthogonal to both the edge and the
/// view ray through its midpoint, signed to agree with the mean surface normal
/// of the two incident faces (it points from the occluding surface toward the
/// open space behind the silhouette).
Vec3 contour_normal(const TriangleMesh& mesh, const OccludingEdge& edge, const Vec3& camera_center);

}  // namespace vimlop
