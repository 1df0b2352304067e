#include "vimlop/silhouette.hpp"

#include <fmt/format.h>

#include "vimlop/error.hpp"

namespace vimlop {

std::vector<OccludingEdge> occluding_edges(const TriangleMesh& mesh, const Vec3& camera_center) {
  std::vector<OccludingEdge> out;
  const auto& edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const MeshEdge& edge = edges[e];
    if (edge.face_count > 2) {
      throw Error(ErrorCode::kTopology,
                  fmt::format("non-manifold edge ({},{}) has {} incident faces", edge.v0, edge.v1, edge.face_count));
    }
    // Both faces contain v0, so it serves as the common view-vector origin.
    const Vec3 view = camera_center - mesh.vertex(edge.v0);
    const bool front0 = mesh.face_normal(edge.faces[0]).dot(view) > 0.0;
    OccludingEdge oe;
    oe.edge = static_cast<int>(e);
    oe.a = mesh.vertex(edge.v0);
    oe.b = mesh.vertex(edge.v1);
    if (edge.face_count == 1) {
      if (!front0) continue;
      oe.front_face = edge.faces[0];
      out.push_back(oe);
      continue;
    }
    const bool front1 = mesh.face_normal(edge.faces[1]).dot(view) > 0.0;
    if (front0 == front1) continue;
    oe.front_face = front0 ? edge.faces[0] : edge.faces[1];
    oe.back_face = front0 ? edge.faces[1] : edge.faces[0];
    out.push_back(oe);
  }
  return out;
}

Vec3 contour_normal(const TriangleMesh& mesh, const OccludingEdge& edge, const Vec3& camera_center) {
  const Vec3 mid = 0.5 * (edge.a + edge.b);
  Vec3 n = (edge.b - edge.a).cross(mid - camera_center);
  const double len = n.norm();
  if (len == 0.0) return Vec3::Zero();
  n /= len;
  Vec3 surface = mesh.face_normal(edge.front_face);
  if (edge.back_face >= 0) surface += mesh.face_normal(edge.back_face);
  return n.dot(surface) < 0.0 ? Vec3(-n) : n;
}

}  // namespace vimlop
