#include "vimlop/correspondence.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vimlop {

ContourGrid::ContourGrid(const std::vector<ContourSample>& samples, int width, int height, double cell)
    : samples_(&samples), cell_(cell) {
  nx_ = std::max(1, static_cast<int>(std::ceil((width + 1.0) / cell)));
  ny_ = std::max(1, static_cast<int>(std::ceil((height + 1.0) / cell)));
  cells_.resize(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vec2& p = samples[i].pixel;
    const int cx = std::clamp(static_cast<int>(std::floor((p.x() + 0.5) / cell)), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>(std::floor((p.y() + 0.5) / cell)), 0, ny_ - 1);
    cells_[static_cast<std::size_t>(cy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(cx)].push_back(static_cast<int>(i));
  }
}

int ContourGrid::best_match(const OrientedContourPoint& x, const Mat2& precision, const NoiseModel& noise,
                            double* value_out) const {
  const std::vector<ContourSample>& samples = *samples_;
  const double cos_gate = std::cos(noise.orientation_gate);
  const double min_precision = Eigen::SelfAdjointEigenSolver<Mat2>(precision, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  // Samples were bucketed after clamping into the grid, so an out-of-grid
  // query can only use the clamped cell for its ring distances.
  const int qx = std::clamp(static_cast<int>(std::floor((x.position.x() + 0.5) / cell_)), 0, nx_ - 1);
  const int qy = std::clamp(static_cast<int>(std::floor((x.position.y() + 0.5) / cell_)), 0, ny_ - 1);
  const int max_ring = std::max({qx, nx_ - 1 - qx, qy, ny_ - 1 - qy});

  double best = std::numeric_limits<double>::infinity();
  int best_id = -1;
  auto visit = [&](int cx, int cy) {
    for (int id : cells_[static_cast<std::size_t>(cy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(cx)]) {
      const ContourSample& s = samples[static_cast<std::size_t>(id)];
      const double c = std::clamp(s.normal.dot(x.normal), -1.0, 1.0);
      if (c < cos_gate) continue;
      const Vec2 d = s.pixel - x.position;
      const double value = 0.5 * d.dot(precision * d) + noise.kappa * (1.0 - c);
      if (value < best || (value == best && id < best_id)) {
        best = value;
        best_id = id;
      }
    }
  };
  for (int r = 0; r <= max_ring; ++r) {
    if (r >= 2) {
      // Every sample in ring r lies at least (r - 1) cells away from a query
      // inside the clamped cell; queries outside the grid are farther still.
      const double gap = (r - 1) * cell_;
      if (0.5 * min_precision * gap * gap > best) break;
    }
    for (int cy = qy - r; cy <= qy + r; ++cy) {
      if (cy < 0 || cy >= ny_) continue;
      if (cy == qy - r || cy == qy + r) {
        for (int cx = std::max(0, qx - r); cx <= std::min(nx_ - 1, qx + r); ++cx) visit(cx, cy);
      } else {
        if (qx - r >= 0) visit(qx - r, cy);
        if (r > 0 && qx + r < nx_) visit(qx + r, cy);
      }
    }
  }
  if (value_out) *value_out = best;
  return best_id;
}

std::vector<Match3> correspond_3d(std::span<const Feature3D> features, std::span<const CovarianceFactor> covariances,
                                  const SpatialIndex& index, const SimilarityTransform& t) {
  std::vector<Match3> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const MostLikelyPointResult r = index.most_likely_point(features[i], covariances[i], t);
    Match3& m = out[i];
    m.feature = static_cast<int>(i);
    m.point = r.point;
    m.face = r.face;
    m.error = r.error;
    m.inlier = true;
  }
  return out;
}

std::vector<Match3> correspond_3d(std::span<const Feature3D> features, const SpatialIndex& index,
                                  const SimilarityTransform& t) {
  std::vector<CovarianceFactor> covs;
  covs.reserve(features.size());
  for (const Feature3D& f : features) covs.emplace_back(f.covariance);
  return correspond_3d(features, covs, index, t);
}

std::vector<std::vector<ContourSample>> compute_contour_candidates(const TriangleMesh& mesh,
                                                                   std::span<const CameraFrame> frames,
                                                                   const SimilarityTransform& t,
                                                                   double visibility_tolerance) {
  std::vector<std::vector<ContourSample>> out(frames.size());
  for (std::size_t j = 0; j < frames.size(); ++j) {
    out[j] = compute_visible_contours(mesh, frames[j].view(t), visibility_tolerance);
  }
  return out;
}

std::vector<Match2> correspond_2d(std::span<const CameraFrame> frames,
                                  std::span<const std::vector<ContourSample>> candidates, const NoiseModel& noise) {
  const Mat2 precision = noise.sigma2d.inverse();
  const double saturated = noise.kappa * (1.0 - std::cos(noise.orientation_gate));
  std::vector<Match2> out;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const CameraFrame& frame = frames[j];
    const std::vector<ContourSample>& samples = candidates[j];
    const ContourGrid grid(samples, frame.intrinsics.width, frame.intrinsics.height);
    for (std::size_t i = 0; i < frame.contours.size(); ++i) {
      const OrientedContourPoint& x = frame.contours[i];
      Match2 m;
      m.contour = static_cast<int>(i);
      m.frame = static_cast<int>(j);
      const int id = grid.best_match(x, precision, noise);
      if (id < 0) {
        m.error.orientation_term = saturated;
        m.error.value = saturated;
        m.angle = noise.orientation_gate;
        out.push_back(m);
        continue;
      }
      const ContourSample& s = samples[static_cast<std::size_t>(id)];
      m.candidate = id;
      m.pixel = s.pixel;
      m.normal = s.normal;
      m.point = s.point;
      m.normal3 = s.normal3;
      const Vec2 d = s.pixel - x.position;
      const double c = std::clamp(s.normal.dot(x.normal), -1.0, 1.0);
      m.error.positional_term = 0.5 * d.dot(precision * d);
      m.error.orientation_term = noise.kappa * (1.0 - c);
      m.error.value = m.error.positional_term + m.error.orientation_term;
      m.offset = d;
      m.distance_px = d.norm();
      m.angle = std::acos(c);
      m.admissible = true;
      m.inlier = true;
      out.push_back(m);
    }
  }
  return out;
}

double equal_influence_factor(std::size_t n3d, std::size_t n2d, double trim_ratio) {
  if (n2d == 0 || n3d == 0) return 1.0;
  return static_cast<double>(n3d) * (1.0 - trim_ratio) / static_cast<double>(n2d);
}

double total_error(std::span<const Match3> matches3, std::span<const Match2> matches2, double factor) {
  double sum3 = 0.0;
  for (const Match3& m : matches3) {
    if (m.inlier) sum3 += m.error.value;
  }
  double sum2 = 0.0;
  for (const Match2& m : matches2) {
    if (m.inlier) sum2 += m.error.value;
  }
  return sum3 / factor + sum2;
}

}  // namespace vimlop
