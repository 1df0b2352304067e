#include "vimlop/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "vimlop/error.hpp"

namespace vimlop {

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  TrianglePoint r;
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    r.point = a;
    r.barycentric = {1, 0, 0};
    r.region = TriangleRegion::kVertex0;
    return r;
  }
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    r.point = b;
    r.barycentric = {0, 1, 0};
    r.region = TriangleRegion::kVertex1;
    return r;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    r.point = a + v * ab;
    r.barycentric = {1.0 - v, v, 0};
    r.region = TriangleRegion::kEdge01;
    return r;
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    r.point = c;
    r.barycentric = {0, 0, 1};
    r.region = TriangleRegion::kVertex2;
    return r;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    r.point = a + w * ac;
    r.barycentric = {1.0 - w, 0, w};
    r.region = TriangleRegion::kEdge20;
    return r;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    r.point = b + w * (c - b);
    r.barycentric = {0, 1.0 - w, w};
    r.region = TriangleRegion::kEdge12;
    return r;
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  r.point = a + ab * v + ac * w;
  r.barycentric = {1.0 - v - w, v, w};
  r.region = TriangleRegion::kFace;
  return r;
}

SpatialIndex::SpatialIndex(std::shared_ptr<const TriangleMesh> mesh, int leaf_size)
    : mesh_(std::move(mesh)) {
  if (!mesh_ || mesh_->empty()) throw Error(ErrorCode::kEmptyInput, "cannot index an empty mesh");
  if (leaf_size < 1) throw Error(ErrorCode::kDomain, "leaf size must be positive");
  const int n = static_cast<int>(mesh_->face_count());
  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Vec3> centroids(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) centroids[static_cast<std::size_t>(f)] = mesh_->face_centroid(f);
  nodes_.reserve(static_cast<std::size_t>(2 * n / leaf_size + 2));
  build(0, n, centroids, leaf_size);
}

int SpatialIndex::build(int first, int count, std::vector<Vec3>& centroids, int leaf_size) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  AlignedBox box;
  AlignedBox centroid_box;
  for (int i = first; i < first + count; ++i) {
    const int f = order_[static_cast<std::size_t>(i)];
    for (int k : mesh_->triangle(f)) box.extend(mesh_->vertex(k));
    centroid_box.extend(centroids[static_cast<std::size_t>(f)]);
  }
  nodes_[static_cast<std::size_t>(id)].box = box;
  if (count <= leaf_size) {
    nodes_[static_cast<std::size_t>(id)].first = first;
    nodes_[static_cast<std::size_t>(id)].count = count;
    return id;
  }
  int axis = 0;
  (centroid_box.max - centroid_box.min).maxCoeff(&axis);
  const int half = count / 2;
  auto begin = order_.begin() + first;
  std::nth_element(begin, begin + half, begin + count, [&](int a, int b) {
    const double ca = centroids[static_cast<std::size_t>(a)][axis];
    const double cb = centroids[static_cast<std::size_t>(b)][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(first, half, centroids, leaf_size);
  const int right = build(first + half, count - half, centroids, leaf_size);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::size_t SpatialIndex::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf(); }));
}

ClosestPointResult SpatialIndex::closest_point(const Vec3& q) const {
  ClosestPointResult best;
  double best_d2 = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (node.box.squared_distance(q) > best_d2) continue;
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int f = order_[static_cast<std::size_t>(i)];
        const Triangle& t = mesh_->triangle(f);
        const TrianglePoint tp = closest_point_on_triangle(q, mesh_->vertex(t[0]), mesh_->vertex(t[1]), mesh_->vertex(t[2]));
        const double d2 = (tp.point - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && f < best.face)) {
          best_d2 = d2;
          best.point = tp.point;
          best.face = f;
          best.region = tp.region;
        }
      }
      continue;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& r = nodes_[static_cast<std::size_t>(node.right)];
    // Push the farther child first so the nearer one is searched first.
    if (l.box.squared_distance(q) <= r.box.squared_distance(q)) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

MostLikelyPointResult SpatialIndex::most_likely_point(const Feature3D& x, const SimilarityTransform& t) const {
  return most_likely_point(x, CovarianceFactor(x.covariance), t);
}

MostLikelyPointResult SpatialIndex::most_likely_point(const Feature3D& x, const CovarianceFactor& cov,
                                                      const SimilarityTransform& t) const {
  const Vec3 q = t(x.position);
  MostLikelyPointResult best;
  if (cov.isotropic()) {
    // Mahalanobis and Euclidean minimizers coincide.
    const ClosestPointResult c = closest_point(q);
    best.point = c.point;
    best.face = c.face;
    best.error = match_error_3d(x, cov, c.point, t);
    return best;
  }

  // Whitened space: |W (y - q)|^2 is the Mahalanobis distance, and W maps
  // each triangle to a triangle, so the Euclidean closest point there is exact.
  const Mat3 w = cov.whitening() * t.rotation.transpose();
  const Vec3 wq = w * q;
  const double lower_bound_scale = 0.5 * cov.min_precision();
  double best_value = std::numeric_limits<double>::infinity();
  Vec3 best_bary = Vec3::Zero();

  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (lower_bound_scale * node.box.squared_distance(q) > best_value) continue;
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int f = order_[static_cast<std::size_t>(i)];
        const Triangle& tri = mesh_->triangle(f);
        const TrianglePoint tp = closest_point_on_triangle(wq, w * mesh_->vertex(tri[0]), w * mesh_->vertex(tri[1]),
                                                           w * mesh_->vertex(tri[2]));
        const double value = 0.5 * (tp.point - wq).squaredNorm();
        if (value < best_value || (value == best_value && f < best.face)) {
          best_value = value;
          best.face = f;
          best_bary = tp.barycentric;
        }
      }
      continue;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& r = nodes_[static_cast<std::size_t>(node.right)];
    if (l.box.squared_distance(q) <= r.box.squared_distance(q)) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  const Triangle& tri = mesh_->triangle(best.face);
  best.point = best_bary[0] * mesh_->vertex(tri[0]) + best_bary[1] * mesh_->vertex(tri[1]) +
               best_bary[2] * mesh_->vertex(tri[2]);
  best.error.residual = best.point - q;
  best.error.value = best_value;
  return best;
}

Vec3 pseudo_normal(const TriangleMesh& mesh, const ClosestPointResult& c) {
  const Triangle& t = mesh.triangle(c.face);
  const auto& e = mesh.face_edges(c.face);
  switch (c.region) {
    case TriangleRegion::kFace: return mesh.face_normal(c.face);
    case TriangleRegion::kEdge01: return mesh.edge_pseudo_normal(e[0]);
    case TriangleRegion::kEdge12: return mesh.edge_pseudo_normal(e[1]);
    case TriangleRegion::kEdge20: return mesh.edge_pseudo_normal(e[2]);
    case TriangleRegion::kVertex0: return mesh.vertex_pseudo_normal(t[0]);
    case TriangleRegion::kVertex1: return mesh.vertex_pseudo_normal(t[1]);
    case TriangleRegion::kVertex2: return mesh.vertex_pseudo_normal(t[2]);
  }
  return mesh.face_normal(c.face);
}

InteriorResult SpatialIndex::interior_signed_check(const Vec3& q) const {
  const ClosestPointResult c = closest_point(q);
  InteriorResult r;
  r.nearest = c.point;
  r.normal = pseudo_normal(*mesh_, c);
  r.signed_distance = r.normal.dot(q - c.point);
  r.interior = r.signed_distance > 1e-12;
  return r;
}

SpatialIndex build_index(TriangleMesh mesh, int leaf_size) {
  return SpatialIndex(std::make_shared<const TriangleMesh>(std::move(mesh)), leaf_size);
}

}  // namespace vimlop
