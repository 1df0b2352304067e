#include "vimlop/mesh.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <unordered_map>

#include "vimlop/error.hpp"

namespace vimlop {
namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (hi << 32) | lo;
}

double corner_angle(const Vec3& at, const Vec3& p, const Vec3& q) {
  const Vec3 u = p - at;
  const Vec3 v = q - at;
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

}  // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  for (const Vec3& v : vertices_) {
    if (!v.allFinite()) throw Error(ErrorCode::kParse, "mesh vertex has non-finite coordinates");
    bounds_.extend(v);
  }
  const double scale = std::max(bounds_.diagonal(), 1e-300);
  const int nv = static_cast<int>(vertices_.size());

  face_normals_.resize(triangles_.size());
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const Triangle& t = triangles_[f];
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= nv) {
        throw Error(ErrorCode::kParse,
                    fmt::format("triangle {} references vertex {} outside [0,{})", f, t[k], nv));
      }
    }
    const Vec3 n = (vertex(t[1]) - vertex(t[0])).cross(vertex(t[2]) - vertex(t[0]));
    if (n.norm() <= 1e-14 * scale * scale) {
      throw Error(ErrorCode::kParse, fmt::format("triangle {} is degenerate (zero area)", f));
    }
    face_normals_[f] = n.normalized();
  }

  // Edge adjacency; record each face's directed traversal to check orientation.
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(triangles_.size() * 2);
  std::vector<std::array<int, 2>> first_direction;
  face_edges_.resize(triangles_.size());
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const Triangle& t = triangles_[f];
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      const auto [it, inserted] = index.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
      if (inserted) {
        MeshEdge e;
        e.v0 = std::min(a, b);
        e.v1 = std::max(a, b);
        edges_.push_back(e);
        first_direction.push_back({a, b});
      }
      MeshEdge& e = edges_[static_cast<std::size_t>(it->second)];
      if (e.face_count < 2) e.faces[static_cast<std::size_t>(e.face_count)] = static_cast<int>(f);
      if (e.face_count == 1) {
        const auto& dir = first_direction[static_cast<std::size_t>(it->second)];
        if (dir[0] == a && dir[1] == b) {
          throw Error(ErrorCode::kTopology,
                      fmt::format("faces {} and {} have inconsistent orientation across edge ({},{})",
                                  e.faces[0], f, e.v0, e.v1));
        }
      }
      ++e.face_count;
      face_edges_[f][static_cast<std::size_t>(k)] = it->second;
    }
  }

  edge_normals_.resize(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const MeshEdge& edge = edges_[e];
    Vec3 n = face_normals_[static_cast<std::size_t>(edge.faces[0])];
    if (edge.face_count >= 2) n += face_normals_[static_cast<std::size_t>(edge.faces[1])];
    edge_normals_[e] = n.norm() > 0.0 ? n.normalized() : face_normals_[static_cast<std::size_t>(edge.faces[0])];
  }

  vertex_normals_.assign(vertices_.size(), Vec3::Zero());
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const Triangle& t = triangles_[f];
    for (int k = 0; k < 3; ++k) {
      const double w = corner_angle(vertex(t[k]), vertex(t[(k + 1) % 3]), vertex(t[(k + 2) % 3]));
      vertex_normals_[static_cast<std::size_t>(t[k])] += w * face_normals_[f];
    }
  }
  for (Vec3& n : vertex_normals_) {
    if (n.norm() > 0.0) n.normalize();
  }
}

Vec3 TriangleMesh::face_centroid(int f) const {
  const Triangle& t = triangle(f);
  return (vertex(t[0]) + vertex(t[1]) + vertex(t[2])) / 3.0;
}

double TriangleMesh::face_area(int f) const {
  const Triangle& t = triangle(f);
  return 0.5 * (vertex(t[1]) - vertex(t[0])).cross(vertex(t[2]) - vertex(t[0])).norm();
}

bool TriangleMesh::is_closed() const {
  return std::all_of(edges_.begin(), edges_.end(), [](const MeshEdge& e) { return e.face_count == 2; });
}

std::vector<int> TriangleMesh::boundary_edges() const {
  std::vector<int> out;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e].face_count == 1) out.push_back(static_cast<int>(e));
  }
  return out;
}

std::vector<int> TriangleMesh::non_manifold_edges() const {
  std::vector<int> out;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e].face_count > 2) out.push_back(static_cast<int>(e));
  }
  return out;
}

double TriangleMesh::mean_edge_length() const {
  if (edges_.empty()) return 0.0;
  double sum = 0.0;
  for (const MeshEdge& e : edges_) sum += (vertex(e.v1) - vertex(e.v0)).norm();
  return sum / static_cast<double>(edges_.size());
}

TriangleMesh TriangleMesh::flipped() const {
  std::vector<Triangle> tris = triangles_;
  for (Triangle& t : tris) std::swap(t[1], t[2]);
  return TriangleMesh(vertices_, std::move(tris));
}

TriangleMesh make_icosphere(int level, double radius, const Vec3& center) {
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
      {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<Triangle> f = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const Triangle& t : f) {
      const int a = mid(t[0], t[1]);
      const int b = mid(t[1], t[2]);
      const int c = mid(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (Vec3& p : v) p = center + radius * p;
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  std::vector<Triangle> f = {
      {0, 2, 1}, {1, 2, 3},  // z = lo
      {4, 5, 6}, {5, 7, 6},  // z = hi
      {0, 1, 4}, {1, 5, 4},  // y = lo
      {2, 6, 3}, {3, 6, 7},  // y = hi
      {0, 4, 2}, {2, 4, 6},  // x = lo
      {1, 3, 5}, {3, 7, 5},  // x = hi
  };
  return TriangleMesh(std::move(v), std::move(f));
}

}  // namespace vimlop
