#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vimlop/camera.hpp"
#include "vimlop/mesh.hpp"
#include "vimlop/registration.hpp"
#include "vimlop/spatial_index.hpp"

namespace vimlop {

/// Inward Gaussian protrusion on the cavity wall. Positions are given on the
/// unit sphere by xi = u.x in [-1, 1] and azimuth phi = atan2(u.z, u.y).
struct CavityBump {
  double xi = 0.0;
  double phi = 0.0;  // radians
  double width_xi = 0.1;
  double width_phi = 0.5;  // radians
  double height = 0.3;     // fraction of the local radius
};

struct CavitySpec {
  Vec3 semi_axes{25.0, 11.0, 9.0};  // mm
  int subdivision = 5;
  double bumpiness = 1.0;  // multiplies every bump height
  std::vector<CavityBump> bumps = default_bumps();

  static std::vector<CavityBump> default_bumps();
};

/// Closed ellipsoidal cavity with ridge-like protrusions. Face normals point
/// into the cavity.
TriangleMesh make_pseudo_sinus(const CavitySpec& spec = {});

/// Cameras spaced along the cavity's long axis looking down it, with small
/// alternating tilts. Returns camera-from-model poses.
std::vector<SimilarityTransform> default_trajectory(int frames, double x_begin = -12.0, double x_end = -4.0,
                                                    double tilt_deg = 4.0);

struct SceneSpec {
  std::string mesh_path;  // empty: built-in cavity
  CavitySpec cavity;
  /// Camera-from-model poses; empty: default_trajectory(frame_count).
  std::vector<SimilarityTransform> trajectory;
  CameraIntrinsics intrinsics{450.0, 450.0, 319.5, 239.5, 640, 480};
  int frame_count = 6;
  int point_count = 900;
  /// 3D noise std along (parallel) and across (orthogonal) the generating
  /// camera's optical axis (mm).
  double noise_parallel = 0.5;
  double noise_orthogonal = 0.3;
  /// Declared per-axis std used in place of a zero injected std, so that
  /// feature covariances stay positive definite.
  double covariance_floor = 0.1;
  double camera_noise_mm = 0.25;
  double camera_noise_deg = 0.25;
  double misalign_min_mm = 2.0;
  double misalign_max_mm = 3.0;
  double misalign_min_deg = 2.0;
  double misalign_max_deg = 3.0;
  double misalign_scale_min = 1.0;
  double misalign_scale_max = 1.0;
  Mat2 contour_covariance = 9.0 * Mat2::Identity();  // px^2
  /// Von Mises concentration of contour normal noise; <= 0 disables it.
  double contour_kappa = 200.0;
  /// Every contour_stride-th visible contour sample becomes a video contour point.
  int contour_stride = 3;
  double visibility_tolerance = 1.0;
  /// Minimum distance from each trajectory camera to the wall (mm).
  double min_camera_clearance = 2.5;
  std::uint64_t seed = 1;

  /// Throws Error(kDomain) for out-of-range values.
  void validate() const;

  /// Same spec with every noise source and the misalignment set to zero.
  SceneSpec noiseless() const;
};

struct GroundTruth {
  /// data = misalignment(true data); the registration target is its inverse.
  SimilarityTransform misalignment;
  std::vector<SimilarityTransform> camera_poses;  // true camera-from-model
  std::vector<Vec3> targets;                      // model coordinates
  int middle_frame = 0;
  std::vector<int> feature_frames;  // generating frame per feature
  std::vector<int> feature_faces;   // surface face per feature
  std::vector<Vec3> feature_noise;  // injected noise, model coordinates, before misalignment

  SimilarityTransform registration() const { return misalignment.inverse(); }
};

struct Scene {
  std::shared_ptr<const TriangleMesh> mesh;
  std::vector<Feature3D> features;
  std::vector<CameraFrame> frames;
  GroundTruth truth;
};

/// Samples visible surface points and contours per the spec and applies the
/// misalignment to the whole data assembly. Throws Error(kCountShortfall) when
/// fewer distinct visible pixels exist than requested points.
Scene generate_scene(const SceneSpec& spec);

/// Same, on a caller-provided mesh (the spec's mesh source is ignored).
Scene generate_scene(const SceneSpec& spec, std::shared_ptr<const TriangleMesh> mesh);

/// Mean over targets of |T(M(target)) - target| (mm).
double evaluate_tre(const SimilarityTransform& t, const GroundTruth& truth);

struct PoseError {
  double position_mm = 0.0;
  double angle_deg = 0.0;
};

/// Per-frame camera-center distance and rotation angle between the poses implied
/// by `t` and the true poses, averaged over frames.
PoseError evaluate_pose_error(const SimilarityTransform& t, std::span<const CameraFrame> frames,
                              const GroundTruth& truth);

/// Mean pixel distance between T(M(target)) and target, both projected by the
/// true middle camera; +infinity if a point falls behind it.
double reprojection_error(const SimilarityTransform& t, const GroundTruth& truth, const CameraIntrinsics& k);

/// Moves round(fraction * n) features `distance` mm behind the wall along their
/// surface normal, taking features in seeded shuffle order and skipping those
/// whose displaced position lies within distance / 2 of the surface. Returns
/// the affected indices in ascending order; Error(kCountShortfall) if too few qualify.
std::vector<int> inject_outliers(Scene& scene, double fraction, double distance, std::uint64_t seed);

struct SweepOffset {
  double mm = 0.0;
  double deg = 0.0;
};

struct SweepRow {
  SweepOffset offset;
  double reprojection_px = 0.0;
  double contour_error_px = 0.0;  // inlier mean; +infinity on failure
  double tre_mm = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string termination;
  std::vector<IterationRecord> history;  // empty when the start was infeasible
};

/// Initial transform offset from the truth by `offset`: a rotation of offset.deg
/// about the camera centroid around `axis`, then offset.mm along the mean
/// optical axis.
SimilarityTransform perturbed_start(const Scene& scene, const SweepOffset& offset, const Vec3& axis);

/// One registration per offset from perturbed_start; failures are recorded in
/// their row. The rotation axis is drawn from config.seed.
std::vector<SweepRow> perturbation_sweep(const Scene& scene, const SpatialIndex& index,
                                         std::span<const SweepOffset> offsets, const NoiseModel& noise,
                                         const SolverConfig& config);

/// Spearman rank correlation with average ranks for ties. Throws
/// Error(kDomain) on size mismatch or fewer than two samples.
double spearman(std::span<const double> a, std::span<const double> b);

/// Best-Fisher rejection sampler for the von Mises distribution centred at 0.
double sample_von_mises(std::mt19937_64& rng, double kappa);

Vec3 random_unit_vector(std::mt19937_64& rng);

}  // namespace vimlop
