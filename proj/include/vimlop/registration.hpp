#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vimlop/camera.hpp"
#include "vimlop/correspondence.hpp"
#include "vimlop/objective.hpp"
#include "vimlop/spatial_index.hpp"

namespace vimlop {

struct ConvergenceCriteria {
  double translation = 1e-3;  // mm
  double rotation = 1e-4;     // radians
  double scale = 1e-4;        // relative
};

struct SolverConfig {
  double scale_min = 0.5;
  double scale_max = 2.0;
  int max_outer_iterations = 100;
  ConvergenceCriteria convergence;
  int inner_max_steps = 50;
  double inner_gradient_tolerance = 1e-10;
  double constraint_backup_fraction = 0.5;
  int max_backups = 30;
  /// The 3D trim ratio decays linearly from NoiseModel::trim_ratio_3d to 0
  /// over this many outer iterations.
  int trim_anneal_iterations = 10;
  /// Chi-square passes per rejection step; each pass re-estimates the match
  /// variance from the inliers of the previous pass. 1 = single test.
  int chi2_refinement_passes = 10;
  /// Depth slack for contour visibility (mm).
  double visibility_tolerance = 1.0;
  std::uint64_t seed = 0;

  /// Throws Error(kDomain) for inconsistent values.
  void validate() const;
};

enum class SolveStatus { kOk, kDegenerate };

struct SolveResult {
  SimilarityTransform transform;
  SolveStatus status = SolveStatus::kOk;
  double initial_value = 0.0;
  double final_value = 0.0;
  int steps = 0;
  std::string diagnostic;
};

/// Damped Gauss-Newton over (log s, rotation vector, t) with the scale
/// projected onto [scale_min, scale_max]. Never returns a transform whose
/// objective exceeds that of `init`; rank-deficient normal equations return
/// `init` with status kDegenerate.
SolveResult solve_transform(const Objective& objective, const SimilarityTransform& init, const SolverConfig& config);

/// Frozen-correspondence objective over the inlier matches. 3D covariances
/// are scaled by `balance_factor`.
Objective build_objective(std::span<const Match3> matches3, std::span<const Feature3D> features,
                          std::span<const Match2> matches2, std::span<const CameraFrame> frames,
                          const NoiseModel& noise, double balance_factor);

SolveResult solve_transform(std::span<const Match3> matches3, std::span<const Feature3D> features,
                            std::span<const Match2> matches2, std::span<const CameraFrame> frames,
                            const NoiseModel& noise, double balance_factor, const SimilarityTransform& init,
                            const SolverConfig& config);

struct OutlierStats3 {
  double sigma2_match = 0.0;  // mean squared residual (mm^2) of the final inliers
  int trimmed = 0;
  int chi2_rejected = 0;
  int inliers = 0;
};

/// Trims the ceil(trim_ratio * n) largest errors, then flags matches failing
/// r^T R (Sigma + sigma2_match I)^{-1} R^T r <= chi2_inv(p, 3).
/// Throws Error(kEmptyInliers) when nothing survives.
OutlierStats3 reject_outliers_3d(std::vector<Match3>& matches, std::span<const Feature3D> features,
                                 const SimilarityTransform& t, const NoiseModel& noise, double trim_ratio,
                                 int refinement_passes = 1);

struct OutlierStats2 {
  double sigma2_match = 0.0;  // px^2
  int position_rejected = 0;
  int orientation_rejected = 0;
  int capped_frames = 0;
  int inliers = 0;
};

/// Independent position (chi-square, 2 dof) and orientation (normal
/// approximation to von Mises) tests, with at most floor(cap * n_frame)
/// rejections per frame (the worst by match error).
OutlierStats2 reject_outliers_2d(std::vector<Match2>& matches, const NoiseModel& noise, int refinement_passes = 1);

bool cameras_interior(std::span<const CameraFrame> frames, const SpatialIndex& index, const SimilarityTransform& t);

struct InteriorOutcome {
  SimilarityTransform transform;
  int backups = 0;
};

/// Returns `next` when every camera center is interior; otherwise the first
/// feasible blend prev -> next at fractions f, f^2, ... (f = backup fraction),
/// falling back to `prev`. Throws Error(kInvalidInitialization) if `prev` is infeasible.
InteriorOutcome enforce_interior(std::span<const CameraFrame> frames, const SpatialIndex& index,
                                 const SimilarityTransform& prev, const SimilarityTransform& next,
                                 const SolverConfig& config);

enum class Termination { kConverged, kMaxIterations, kDegenerateGeometry, kEmptyInliers, kInfeasibleInitialization };

const char* to_string(Termination t);

struct IterationRecord {
  int iteration = 0;
  double total_error = 0.0;
  int inliers_3d = 0;
  int inliers_2d = 0;
  double sigma2_match = 0.0;
  double mean_contour_error_px = 0.0;
  double trim_ratio = 0.0;
  int backups = 0;
  bool cameras_interior = true;
  TransformDelta delta;
  SimilarityTransform transform;
};

struct RegistrationMetrics {
  double mean_residual_3d = 0.0;          // mm, over 3D inliers
  double mean_contour_error_all = 0.0;    // px, over matched contour points
  double mean_contour_error_inliers = 0.0;
  int inliers_3d = 0;
  int inliers_2d = 0;
  int contour_matches = 0;
  double total_error = 0.0;
  std::vector<int> rejected_3d;  // feature indices flagged as outliers, ascending
};

struct RegistrationResult {
  SimilarityTransform transform;
  RegistrationMetrics metrics;
  bool converged = false;
  Termination termination = Termination::kMaxIterations;
  std::string diagnostic;
  std::vector<IterationRecord> history;
};

struct RegistrationProblem {
  std::span<const Feature3D> features;
  std::span<const CameraFrame> frames;
  const SpatialIndex* index = nullptr;
};

/// Alternates correspondence, outlier rejection, the transform solve and the
/// interior constraint until the update falls below the convergence criteria.
RegistrationResult register_features(const RegistrationProblem& problem, const SimilarityTransform& init,
                                     const NoiseModel& noise, const SolverConfig& config);

/// Correspondences, rejection and summary metrics at a fixed transform.
RegistrationMetrics evaluate_registration(const RegistrationProblem& problem, const SimilarityTransform& t,
                                          const NoiseModel& noise, const SolverConfig& config, double trim_ratio);

struct RankEntry {
  int candidate = -1;
  double contour_error = 0.0;  // inlier mean (px); mean 3D residual without contours
  bool failed = false;
  std::string reason;
};

struct MultistartResult {
  int best = -1;
  std::vector<RankEntry> ranking;
  std::vector<RegistrationResult> results;
  bool all_failed = false;
};

/// Registers from every candidate start and ranks the outcomes by inlier
/// contour error; failed runs rank last, ties keep candidate order.
MultistartResult multistart_register(std::span<const SimilarityTransform> candidates,
                                     const RegistrationProblem& problem, const NoiseModel& noise,
                                     const SolverConfig& config);

/// Every pose combined with every scale.
std::vector<SimilarityTransform> expand_scale_variants(std::span<const SimilarityTransform> poses,
                                                       std::span<const double> scales);

}  // namespace vimlop
