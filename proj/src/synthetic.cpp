#include "vimlop/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vimlop/error.hpp"
#include "vimlop/mesh_io.hpp"
#include "vimlop/render.hpp"

namespace vimlop {

std::vector<CavityBump> CavitySpec::default_bumps() {
  return {
      {0.00, deg_to_rad(0.0), 0.05, 0.8, 0.45},
      {0.18, deg_to_rad(140.0), 0.05, 0.7, 0.45},
      {0.35, deg_to_rad(-100.0), 0.06, 0.8, 0.50},
      {0.52, deg_to_rad(40.0), 0.05, 0.9, 0.45},
      {0.70, deg_to_rad(-160.0), 0.06, 0.8, 0.45},
      {0.10, deg_to_rad(-60.0), 0.04, 0.5, 0.35},
  };
}

TriangleMesh make_pseudo_sinus(const CavitySpec& spec) {
  if (!(spec.semi_axes.minCoeff() > 0.0)) throw Error(ErrorCode::kDomain, "cavity semi-axes must be positive");
  if (spec.subdivision < 0 || spec.subdivision > 7) {
    throw Error(ErrorCode::kDomain, fmt::format("cavity subdivision must lie in [0,7], got {}", spec.subdivision));
  }
  const TriangleMesh sphere = make_icosphere(spec.subdivision, 1.0);
  std::vector<Vec3> vertices;
  vertices.reserve(sphere.vertex_count());
  for (const Vec3& u : sphere.vertices()) {
    const double phi = std::atan2(u.z(), u.y());
    double shrink = 0.0;
    for (const CavityBump& b : spec.bumps) {
      const double dxi = (u.x() - b.xi) / b.width_xi;
      const double dphi = std::remainder(phi - b.phi, 2.0 * kPi) / b.width_phi;
      // Fade the azimuthal term near the poles, where phi is ill-defined.
      const double ring = std::sqrt(std::max(0.0, 1.0 - u.x() * u.x()));
      shrink += spec.bumpiness * b.height * ring * std::exp(-0.5 * (dxi * dxi + dphi * dphi));
    }
    if (shrink >= 0.9) throw Error(ErrorCode::kDomain, "cavity bumps close the cavity");
    vertices.push_back(spec.semi_axes.cwiseProduct(u) * (1.0 - shrink));
  }
  std::vector<Triangle> triangles = sphere.triangles();
  for (Triangle& t : triangles) std::swap(t[1], t[2]);
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

std::vector<SimilarityTransform> default_trajectory(int frames, double x_begin, double x_end, double tilt_deg) {
  if (frames < 1) throw Error(ErrorCode::kDomain, "trajectory needs at least one frame");
  std::vector<SimilarityTransform> poses;
  for (int i = 0; i < frames; ++i) {
    const double f = frames == 1 ? 0.5 : static_cast<double>(i) / (frames - 1);
    const Vec3 center(x_begin + f * (x_end - x_begin), 0.0, 0.0);
    const double yaw = deg_to_rad(tilt_deg) * ((i % 2 == 0) ? 1.0 : -1.0);
    const double pitch = deg_to_rad(tilt_deg) * ((i % 3) - 1.0);
    const Vec3 forward = rotation_exp(Vec3(0.0, 0.0, yaw)) * rotation_exp(Vec3(0.0, pitch, 0.0)) * Vec3::UnitX();
    poses.push_back(look_at(center, forward, -Vec3::UnitZ()));
  }
  return poses;
}

void SceneSpec::validate() const {
  intrinsics.validate();
  if (frame_count < 1 && trajectory.empty()) throw Error(ErrorCode::kDomain, "scene needs at least one frame");
  if (point_count < 0) throw Error(ErrorCode::kDomain, "point_count must be >= 0");
  if (!(noise_parallel >= 0.0 && noise_orthogonal >= 0.0)) {
    throw Error(ErrorCode::kDomain, "3D noise standard deviations must be >= 0");
  }
  if (!(covariance_floor > 0.0)) throw Error(ErrorCode::kDomain, "covariance_floor must be positive");
  if (!(camera_noise_mm >= 0.0 && camera_noise_deg >= 0.0)) {
    throw Error(ErrorCode::kDomain, "camera noise ranges must be >= 0");
  }
  if (!(misalign_min_mm >= 0.0 && misalign_max_mm >= misalign_min_mm && misalign_min_deg >= 0.0 &&
        misalign_max_deg >= misalign_min_deg)) {
    throw Error(ErrorCode::kDomain, "misalignment ranges must satisfy 0 <= min <= max");
  }
  if (!(misalign_scale_min > 0.0 && misalign_scale_max >= misalign_scale_min)) {
    throw Error(ErrorCode::kDomain, "misalignment scale range must satisfy 0 < min <= max");
  }
  if (!contour_covariance.allFinite() || contour_covariance != contour_covariance.transpose() ||
      contour_covariance.ldlt().vectorD().minCoeff() < 0.0) {
    throw Error(ErrorCode::kInvalidCovariance, "contour covariance must be symmetric positive semidefinite");
  }
  if (contour_stride < 1) throw Error(ErrorCode::kDomain, "contour_stride must be >= 1");
  if (!(visibility_tolerance >= 0.0)) throw Error(ErrorCode::kDomain, "visibility_tolerance must be >= 0");
  if (!(min_camera_clearance >= 0.0)) throw Error(ErrorCode::kDomain, "min_camera_clearance must be >= 0");
}

SceneSpec SceneSpec::noiseless() const {
  SceneSpec s = *this;
  s.noise_parallel = 0.0;
  s.noise_orthogonal = 0.0;
  s.camera_noise_mm = 0.0;
  s.camera_noise_deg = 0.0;
  s.misalign_min_mm = s.misalign_max_mm = 0.0;
  s.misalign_min_deg = s.misalign_max_deg = 0.0;
  s.misalign_scale_min = s.misalign_scale_max = 1.0;
  s.contour_covariance = Mat2::Zero();
  s.contour_kappa = 0.0;
  return s;
}

Vec3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  for (;;) {
    const Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

double sample_von_mises(std::mt19937_64& rng, double kappa) {
  if (!(kappa > 0.0)) throw Error(ErrorCode::kDomain, "von Mises concentration must be positive");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double u1 = u(rng);
    const double u2 = u(rng);
    const double u3 = u(rng);
    const double z = std::cos(kPi * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double theta = std::acos(std::clamp(f, -1.0, 1.0));
      return u3 > 0.5 ? theta : -theta;
    }
  }
}

namespace {

// Rotation by a uniform angle in [0, max_deg] about a uniform axis.
Mat3 random_rotation(std::mt19937_64& rng, double min_deg, double max_deg) {
  const Vec3 axis = random_unit_vector(rng);
  std::uniform_real_distribution<double> a(min_deg, max_deg);
  return rotation_exp(deg_to_rad(a(rng)) * axis);
}

Vec3 random_offset(std::mt19937_64& rng, double min_mm, double max_mm) {
  const Vec3 dir = random_unit_vector(rng);
  std::uniform_real_distribution<double> a(min_mm, max_mm);
  return a(rng) * dir;
}

CameraView view_of(const CameraIntrinsics& k, const SimilarityTransform& pose) {
  CameraView v;
  v.intrinsics = k;
  v.camera_from_model = pose;
  return v;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  std::shared_ptr<const TriangleMesh> mesh;
  if (spec.mesh_path.empty()) {
    mesh = std::make_shared<const TriangleMesh>(make_pseudo_sinus(spec.cavity));
  } else {
    mesh = std::make_shared<const TriangleMesh>(read_mesh(spec.mesh_path));
  }
  return generate_scene(spec, std::move(mesh));
}

Scene generate_scene(const SceneSpec& spec, std::shared_ptr<const TriangleMesh> mesh) {
  spec.validate();
  if (!mesh || mesh->empty()) throw Error(ErrorCode::kEmptyInput, "scene mesh is empty");
  const SpatialIndex index(mesh);
  std::mt19937_64 rng(spec.seed);

  Scene scene;
  scene.mesh = mesh;
  GroundTruth& truth = scene.truth;
  truth.camera_poses = spec.trajectory.empty() ? default_trajectory(spec.frame_count) : spec.trajectory;
  const int n_frames = static_cast<int>(truth.camera_poses.size());
  truth.middle_frame = (n_frames - 1) / 2;

  std::vector<CameraView> views;
  for (int j = 0; j < n_frames; ++j) {
    const CameraView v = view_of(spec.intrinsics, truth.camera_poses[static_cast<std::size_t>(j)]);
    const InteriorResult in = index.interior_signed_check(v.center());
    if (!in.interior || in.signed_distance < spec.min_camera_clearance) {
      throw Error(ErrorCode::kDomain, fmt::format("trajectory camera {} is {:.3f} mm from the wall (need interior >= {})",
                                                  j, in.signed_distance, spec.min_camera_clearance));
    }
    views.push_back(v);
  }

  // Visible surface and contours at the true poses.
  std::vector<DepthBuffer> depth(static_cast<std::size_t>(n_frames));
  std::vector<std::vector<ContourSample>> contours(static_cast<std::size_t>(n_frames));
  for (int j = 0; j < n_frames; ++j) {
    contours[static_cast<std::size_t>(j)] = compute_visible_contours(
        *mesh, views[static_cast<std::size_t>(j)], spec.visibility_tolerance, &depth[static_cast<std::size_t>(j)]);
  }

  // Distinct covered (frame, pixel) pairs, sampled without replacement.
  std::vector<std::uint64_t> pool;
  for (int j = 0; j < n_frames; ++j) {
    const DepthBuffer& d = depth[static_cast<std::size_t>(j)];
    for (std::size_t p = 0; p < d.depth.size(); ++p) {
      if (std::isfinite(d.depth[p])) pool.push_back((static_cast<std::uint64_t>(j) << 32) | p);
    }
  }
  const auto wanted = static_cast<std::size_t>(spec.point_count);
  if (pool.size() < wanted) {
    throw Error(ErrorCode::kCountShortfall,
                fmt::format("requested {} visible points but only {} are available", wanted, pool.size()));
  }
  for (std::size_t i = 0; i < wanted; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }

  std::normal_distribution<double> gauss;
  std::vector<Vec3> true_points;
  for (std::size_t i = 0; i < wanted; ++i) {
    const int j = static_cast<int>(pool[i] >> 32);
    const auto p = static_cast<std::size_t>(pool[i] & 0xffffffffu);
    const DepthBuffer& d = depth[static_cast<std::size_t>(j)];
    const Vec2 pixel(static_cast<double>(p % static_cast<std::size_t>(d.width)),
                     static_cast<double>(p / static_cast<std::size_t>(d.width)));
    const Vec3 surface = back_project(views[static_cast<std::size_t>(j)], pixel, d.depth[p]);
    const Mat3 rc = truth.camera_poses[static_cast<std::size_t>(j)].rotation;
    const Vec3 noise_cam(spec.noise_orthogonal * gauss(rng), spec.noise_orthogonal * gauss(rng),
                         spec.noise_parallel * gauss(rng));
    const Vec3 noise = rc.transpose() * noise_cam;
    const double sd_orth = spec.noise_orthogonal > 0.0 ? spec.noise_orthogonal : spec.covariance_floor;
    const double sd_par = spec.noise_parallel > 0.0 ? spec.noise_parallel : spec.covariance_floor;
    const Vec3 var(sd_orth * sd_orth, sd_orth * sd_orth, sd_par * sd_par);
    Feature3D f;
    f.position = surface + noise;
    f.covariance = rc.transpose() * var.asDiagonal() * rc;
    f.covariance = 0.5 * (f.covariance + f.covariance.transpose());
    scene.features.push_back(f);
    true_points.push_back(surface);
    truth.feature_frames.push_back(j);
    truth.feature_faces.push_back(index.closest_point(surface).face);
    truth.feature_noise.push_back(noise);
  }

  // Video contours: true-pose samples with pixel and orientation noise.
  const Eigen::LDLT<Mat2> contour_ldlt(spec.contour_covariance);
  const Mat2 contour_sqrt = contour_ldlt.transpositionsP().transpose() * Mat2(contour_ldlt.matrixL()) *
                            contour_ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  for (int j = 0; j < n_frames; ++j) {
    CameraFrame frame;
    frame.id = j;
    frame.intrinsics = spec.intrinsics;
    const std::vector<ContourSample>& samples = contours[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(spec.contour_stride)) {
      OrientedContourPoint x;
      x.frame_id = j;
      x.position = samples[i].pixel + contour_sqrt * Vec2(gauss(rng), gauss(rng));
      const double angle = spec.contour_kappa > 0.0 ? sample_von_mises(rng, spec.contour_kappa) : 0.0;
      x.normal = Eigen::Rotation2Dd(angle) * samples[i].normal;
      frame.contours.push_back(x);
    }
    scene.frames.push_back(std::move(frame));
  }

  // SfM-like camera pose noise, then the misalignment of the whole assembly.
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : true_points) centroid += p;
  if (!true_points.empty()) centroid /= static_cast<double>(true_points.size());
  std::vector<SimilarityTransform> noisy(static_cast<std::size_t>(n_frames));
  for (int j = 0; j < n_frames; ++j) {
    const SimilarityTransform& pose = truth.camera_poses[static_cast<std::size_t>(j)];
    const Mat3 dr = random_rotation(rng, 0.0, spec.camera_noise_deg);
    const Vec3 dc = random_offset(rng, 0.0, spec.camera_noise_mm);
    const Vec3 center = views[static_cast<std::size_t>(j)].center() + dc;
    SimilarityTransform p;
    p.rotation = dr * pose.rotation;
    p.translation = -(p.rotation * center);
    noisy[static_cast<std::size_t>(j)] = p;
  }

  std::uniform_real_distribution<double> scale_draw(spec.misalign_scale_min, spec.misalign_scale_max);
  const Mat3 rm = random_rotation(rng, spec.misalign_min_deg, spec.misalign_max_deg);
  const Vec3 tm = random_offset(rng, spec.misalign_min_mm, spec.misalign_max_mm);
  const double sm = spec.misalign_scale_min == spec.misalign_scale_max ? spec.misalign_scale_min : scale_draw(rng);
  SimilarityTransform m;
  m.scale = sm;
  m.rotation = rm;
  m.translation = centroid + tm - sm * (rm * centroid);
  truth.misalignment = m;

  for (Feature3D& f : scene.features) {
    f.position = m(f.position);
    f.covariance = rm * f.covariance * rm.transpose();
    f.covariance = 0.5 * (f.covariance + f.covariance.transpose());
  }
  for (int j = 0; j < n_frames; ++j) {
    const SimilarityTransform& c = noisy[static_cast<std::size_t>(j)];
    SimilarityTransform cc;
    cc.rotation = c.rotation * rm.transpose();
    cc.translation = sm * c.translation - cc.rotation * m.translation;
    scene.frames[static_cast<std::size_t>(j)].camera_from_cloud = cc;
  }

  // TRE targets: triangle centroids visible to the middle frame.
  const CameraView& mid = views[static_cast<std::size_t>(truth.middle_frame)];
  const DepthBuffer& mid_depth = depth[static_cast<std::size_t>(truth.middle_frame)];
  for (int f = 0; f < static_cast<int>(mesh->face_count()); ++f) {
    const Vec3 c = mesh->face_centroid(f);
    const Vec3 pc = mid.camera_from_model(c);
    if (pc.z() <= kNearPlane) continue;
    const Projection pr = project_camera_point(mid.intrinsics, pc);
    const int px = static_cast<int>(std::lround(pr.pixel.x()));
    const int py = static_cast<int>(std::lround(pr.pixel.y()));
    if (!mid_depth.contains(px, py)) continue;
    if (pr.depth <= mid_depth.at(px, py) + spec.visibility_tolerance) truth.targets.push_back(c);
  }
  if (truth.targets.empty()) throw Error(ErrorCode::kEmptyInput, "no triangle centroid is visible to the middle frame");
  return scene;
}

double evaluate_tre(const SimilarityTransform& t, const GroundTruth& truth) {
  if (truth.targets.empty()) throw Error(ErrorCode::kEmptyInput, "no TRE targets");
  double sum = 0.0;
  for (const Vec3& p : truth.targets) sum += (t(truth.misalignment(p)) - p).norm();
  return sum / static_cast<double>(truth.targets.size());
}

PoseError evaluate_pose_error(const SimilarityTransform& t, std::span<const CameraFrame> frames,
                              const GroundTruth& truth) {
  if (frames.empty() || frames.size() != truth.camera_poses.size()) {
    throw Error(ErrorCode::kDomain, "pose error needs one true pose per frame");
  }
  PoseError e;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const CameraView est = frames[j].view(t);
    CameraView tru;
    tru.camera_from_model = truth.camera_poses[j];
    e.position_mm += (est.center() - tru.center()).norm();
    e.angle_deg += rad_to_deg(rotation_angle_between(est.camera_from_model.rotation, tru.camera_from_model.rotation));
  }
  e.position_mm /= static_cast<double>(frames.size());
  e.angle_deg /= static_cast<double>(frames.size());
  return e;
}

double reprojection_error(const SimilarityTransform& t, const GroundTruth& truth, const CameraIntrinsics& k) {
  if (truth.targets.empty()) throw Error(ErrorCode::kEmptyInput, "no TRE targets");
  const SimilarityTransform& pose = truth.camera_poses[static_cast<std::size_t>(truth.middle_frame)];
  double sum = 0.0;
  for (const Vec3& p : truth.targets) {
    const Vec3 a = pose(t(truth.misalignment(p)));
    const Vec3 b = pose(p);
    if (a.z() <= kMinDepth || b.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    sum += (project_camera_point(k, a).pixel - project_camera_point(k, b).pixel).norm();
  }
  return sum / static_cast<double>(truth.targets.size());
}

std::vector<int> inject_outliers(Scene& scene, double fraction, double distance, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorCode::kDomain, "outlier fraction must lie in [0,1]");
  if (!(distance > 0.0)) throw Error(ErrorCode::kDomain, "outlier distance must be positive");
  const std::size_t n = scene.features.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const SpatialIndex index(scene.mesh);
  const SimilarityTransform& m = scene.truth.misalignment;
  const SimilarityTransform to_model = m.inverse();
  std::vector<int> chosen;
  for (int i : order) {
    if (chosen.size() == count) break;
    const int face = scene.truth.feature_faces[static_cast<std::size_t>(i)];
    // Face normals point into the cavity; -n is behind the wall.
    const Vec3 shifted = scene.features[static_cast<std::size_t>(i)].position +
                         m.scale * distance * (m.rotation * (-scene.mesh->face_normal(face)));
    // A displacement that passes through a thin wall and lands near the
    // surface again is not a gross error; skip it.
    if (index.closest_point(to_model(shifted)).distance < 0.5 * distance) continue;
    scene.features[static_cast<std::size_t>(i)].position = shifted;
    chosen.push_back(i);
  }
  if (chosen.size() < count) {
    throw Error(ErrorCode::kCountShortfall,
                fmt::format("requested {} outliers but only {} features admit a gross displacement", count, chosen.size()));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

SimilarityTransform perturbed_start(const Scene& scene, const SweepOffset& offset, const Vec3& axis) {
  Vec3 centroid = Vec3::Zero();
  Vec3 optical = Vec3::Zero();
  for (const SimilarityTransform& pose : scene.truth.camera_poses) {
    CameraView v;
    v.camera_from_model = pose;
    centroid += v.center();
    optical += v.axis();
  }
  const double n = static_cast<double>(scene.truth.camera_poses.size());
  centroid /= n;
  optical = optical.norm() > 0.0 ? optical.normalized() : Vec3::UnitX();
  SimilarityTransform p;
  p.rotation = rotation_exp(deg_to_rad(offset.deg) * axis.normalized());
  p.translation = centroid - p.rotation * centroid + offset.mm * optical;
  return p * scene.truth.registration();
}

std::vector<SweepRow> perturbation_sweep(const Scene& scene, const SpatialIndex& index,
                                         std::span<const SweepOffset> offsets, const NoiseModel& noise,
                                         const SolverConfig& config) {
  std::mt19937_64 rng(config.seed);
  const Vec3 axis = random_unit_vector(rng);
  const RegistrationProblem problem{scene.features, scene.frames, &index};
  const CameraIntrinsics& k = scene.frames[static_cast<std::size_t>(scene.truth.middle_frame)].intrinsics;
  std::vector<SweepRow> rows;
  for (const SweepOffset& off : offsets) {
    SweepRow row;
    row.offset = off;
    const SimilarityTransform init = perturbed_start(scene, off, axis);
    try {
      const RegistrationResult r = register_features(problem, init, noise, config);
      row.converged = r.converged;
      row.iterations = static_cast<int>(r.history.size());
      row.termination = to_string(r.termination);
      row.history = r.history;
      row.tre_mm = evaluate_tre(r.transform, scene.truth);
      row.reprojection_px = reprojection_error(r.transform, scene.truth, k);
      row.contour_error_px = r.metrics.inliers_2d > 0 && r.termination != Termination::kDegenerateGeometry &&
                                     r.termination != Termination::kEmptyInliers
                                 ? r.metrics.mean_contour_error_inliers
                                 : std::numeric_limits<double>::infinity();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidInitialization) throw;
      row.converged = false;
      row.termination = to_string(Termination::kInfeasibleInitialization);
      row.tre_mm = evaluate_tre(init, scene.truth);
      row.reprojection_px = reprojection_error(init, scene.truth, k);
      row.contour_error_px = std::numeric_limits<double>::infinity();
    }
    rows.push_back(row);
  }
  return rows;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::kDomain, "spearman needs two equal samples of size >= 2");
  auto ranks = [](std::span<const double> v) {
    std::vector<int> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return v[static_cast<std::size_t>(x)] < v[static_cast<std::size_t>(y)]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[static_cast<std::size_t>(order[j + 1])] == v[static_cast<std::size_t>(order[i])]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[static_cast<std::size_t>(order[k])] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace vimlop
