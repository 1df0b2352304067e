#include "vimlop/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vimlop/distributions.hpp"
#include "vimlop/error.hpp"

namespace vimlop {

void SolverConfig::validate() const {
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw Error(ErrorCode::kDomain, fmt::format("invalid scale bounds [{}, {}]", scale_min, scale_max));
  }
  if (max_outer_iterations < 1) throw Error(ErrorCode::kDomain, "max_outer_iterations must be >= 1");
  if (!(convergence.translation > 0.0 && convergence.rotation > 0.0 && convergence.scale > 0.0)) {
    throw Error(ErrorCode::kDomain, "convergence epsilons must be positive");
  }
  if (inner_max_steps < 1) throw Error(ErrorCode::kDomain, "inner_max_steps must be >= 1");
  if (!(constraint_backup_fraction > 0.0 && constraint_backup_fraction < 1.0)) {
    throw Error(ErrorCode::kDomain,
                fmt::format("constraint_backup_fraction must lie in (0,1), got {}", constraint_backup_fraction));
  }
  if (max_backups < 1) throw Error(ErrorCode::kDomain, "max_backups must be >= 1");
  if (trim_anneal_iterations < 0) throw Error(ErrorCode::kDomain, "trim_anneal_iterations must be >= 0");
  if (chi2_refinement_passes < 1) throw Error(ErrorCode::kDomain, "chi2_refinement_passes must be >= 1");
  if (!(visibility_tolerance >= 0.0)) throw Error(ErrorCode::kDomain, "visibility_tolerance must be >= 0");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kMaxIterations: return "max-iterations";
    case Termination::kDegenerateGeometry: return "degenerate-geometry";
    case Termination::kEmptyInliers: return "empty-inliers";
    case Termination::kInfeasibleInitialization: return "infeasible-initialization";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Transform solve

namespace {

SimilarityTransform clamp_scale(SimilarityTransform t, const SolverConfig& config) {
  t.scale = std::clamp(t.scale, config.scale_min, config.scale_max);
  return t;
}

// Solves the damped system restricted to `active` parameters. When the scale
// is active and the step would leave the bounds, the scale step is pinned to
// the bound and the remaining parameters are re-solved.
Params damped_step(const Hessian& h, const Params& g, const std::array<bool, kParamCount>& active, double lambda,
                   double log_s, double log_min, double log_max) {
  auto solve = [&](const std::array<bool, kParamCount>& act, const Params& rhs) {
    std::vector<int> idx;
    for (int i = 0; i < kParamCount; ++i) {
      if (act[static_cast<std::size_t>(i)]) idx.push_back(i);
    }
    const int n = static_cast<int>(idx.size());
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b(n);
    for (int r = 0; r < n; ++r) {
      b[r] = rhs[idx[static_cast<std::size_t>(r)]];
      for (int c = 0; c < n; ++c) a(r, c) = h(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
      a(r, r) += lambda * std::max(h(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(r)]), 1e-12);
    }
    const Eigen::VectorXd x = a.ldlt().solve(b);
    Params out = Params::Zero();
    for (int r = 0; r < n; ++r) out[idx[static_cast<std::size_t>(r)]] = x[r];
    return out;
  };

  Params delta = solve(active, -g);
  if (active[0]) {
    const double target = log_s + delta[0];
    if (target < log_min || target > log_max) {
      const double pinned = std::clamp(target, log_min, log_max) - log_s;
      std::array<bool, kParamCount> rest = active;
      rest[0] = false;
      Params rhs = -g - h.col(0) * pinned;
      delta = solve(rest, rhs);
      delta[0] = pinned;
    }
  }
  return delta;
}

bool rank_deficient(const Hessian& h, const std::array<bool, kParamCount>& active) {
  std::vector<int> idx;
  for (int i = 0; i < kParamCount; ++i) {
    if (active[static_cast<std::size_t>(i)]) idx.push_back(i);
  }
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXd c(n, n);
  for (int r = 0; r < n; ++r) {
    const double dr = h(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(r)]);
    if (!(dr > 0.0) || !std::isfinite(dr)) return true;
  }
  // Scale-free conditioning test on the correlation form D^-1/2 H D^-1/2.
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      const int i = idx[static_cast<std::size_t>(r)];
      const int j = idx[static_cast<std::size_t>(col)];
      c(r, col) = h(i, j) / std::sqrt(h(i, i) * h(j, j));
    }
  }
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c, Eigen::EigenvaluesOnly).eigenvalues();
  return ev.minCoeff() <= 1e-10 * ev.maxCoeff();
}

}  // namespace

SolveResult solve_transform(const Objective& objective, const SimilarityTransform& init, const SolverConfig& config) {
  SolveResult result;
  result.transform = init;
  result.initial_value = objective.value(init);
  result.final_value = result.initial_value;
  if (objective.empty()) {
    result.status = SolveStatus::kDegenerate;
    result.diagnostic = "no inlier constraints";
    return result;
  }

  const double log_min = std::log(config.scale_min);
  const double log_max = std::log(config.scale_max);
  const bool scale_fixed = config.scale_min == config.scale_max;

  SimilarityTransform t = init;
  double f = result.initial_value;
  double lambda = 1e-6;
  Hessian h;
  Params g;
  for (int step = 0; step < config.inner_max_steps; ++step) {
    objective.normal_equations(t, h, g);
    std::array<bool, kParamCount> active;
    active.fill(true);
    const double log_s = std::log(t.scale);
    if (scale_fixed || (log_s <= log_min + 1e-14 && g[0] > 0.0) || (log_s >= log_max - 1e-14 && g[0] < 0.0)) {
      active[0] = false;
    }
    if (rank_deficient(h, active)) {
      result.transform = init;
      result.final_value = result.initial_value;
      result.status = SolveStatus::kDegenerate;
      result.diagnostic = "rank-deficient normal equations";
      return result;
    }
    double gmax = 0.0;
    for (int i = 0; i < kParamCount; ++i) {
      if (active[static_cast<std::size_t>(i)]) gmax = std::max(gmax, std::abs(g[i]));
    }
    if (gmax <= config.inner_gradient_tolerance * std::max(1.0, f)) break;

    bool accepted = false;
    Params delta = Params::Zero();
    double f_new = f;
    SimilarityTransform t_new = t;
    while (lambda < 1e12) {
      delta = damped_step(h, g, active, lambda, log_s, log_min, log_max);
      t_new = clamp_scale(retract(t, delta), config);
      if (scale_fixed) t_new.scale = config.scale_min;
      f_new = objective.value(t_new);
      if (f_new < f) {
        accepted = true;
        lambda = std::max(lambda * 0.1, 1e-12);
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
    const double decrease = f - f_new;
    t = t_new;
    f = f_new;
    ++result.steps;
    if (delta.norm() < 1e-14 || decrease <= 1e-16 * std::max(f, 1e-300)) break;
  }
  t.rotation = orthonormalize(t.rotation);
  const double f_final = objective.value(t);
  if (f_final <= result.initial_value) {
    result.transform = t;
    result.final_value = f_final;
  }
  return result;
}

Objective build_objective(std::span<const Match3> matches3, std::span<const Feature3D> features,
                          std::span<const Match2> matches2, std::span<const CameraFrame> frames,
                          const NoiseModel& noise, double balance_factor) {
  Objective obj;
  for (const Match3& m : matches3) {
    if (!m.inlier) continue;
    const Feature3D& x = features[static_cast<std::size_t>(m.feature)];
    PointTerm p;
    p.x = x.position;
    p.y = m.point;
    p.whitening = CovarianceFactor(balance_factor * x.covariance).whitening();
    obj.points.push_back(p);
  }
  const Eigen::LLT<Mat2> llt(noise.sigma2d);
  const Mat2 sqrt_precision = llt.matrixL().solve(Mat2::Identity());
  for (const Match2& m : matches2) {
    if (!m.inlier) continue;
    const CameraFrame& frame = frames[static_cast<std::size_t>(m.frame)];
    const OrientedContourPoint& x = frame.contours[static_cast<std::size_t>(m.contour)];
    ContourTerm c;
    c.y = m.point;
    c.n = m.normal3;
    c.x_pos = x.position;
    c.x_normal = x.normal;
    c.intrinsics = frame.intrinsics;
    c.camera_from_cloud = frame.camera_from_cloud;
    c.sqrt_precision = sqrt_precision;
    c.kappa = noise.kappa;
    obj.contours.push_back(c);
  }
  return obj;
}

SolveResult solve_transform(std::span<const Match3> matches3, std::span<const Feature3D> features,
                            std::span<const Match2> matches2, std::span<const CameraFrame> frames,
                            const NoiseModel& noise, double balance_factor, const SimilarityTransform& init,
                            const SolverConfig& config) {
  return solve_transform(build_objective(matches3, features, matches2, frames, noise, balance_factor), init, config);
}

// ---------------------------------------------------------------------------
// Outlier rejection

OutlierStats3 reject_outliers_3d(std::vector<Match3>& matches, std::span<const Feature3D> features,
                                 const SimilarityTransform& t, const NoiseModel& noise, double trim_ratio,
                                 int refinement_passes) {
  OutlierStats3 stats;
  const std::size_t n = matches.size();
  if (n == 0) throw Error(ErrorCode::kEmptyInliers, "no 3D matches to test");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return matches[static_cast<std::size_t>(a)].error.value > matches[static_cast<std::size_t>(b)].error.value;
  });
  const auto trim = static_cast<std::size_t>(std::ceil(trim_ratio * static_cast<double>(n) - 1e-9));
  std::vector<char> candidate(n, 1);
  for (std::size_t i = 0; i < std::min(trim, n); ++i) candidate[static_cast<std::size_t>(order[i])] = 0;
  stats.trimmed = static_cast<int>(std::min(trim, n));

  const double threshold = chi2_inv(noise.chi2_p, 3);
  std::vector<char> inlier = candidate;
  std::vector<Vec3> local(n);
  for (std::size_t i = 0; i < n; ++i) local[i] = t.rotation.transpose() * matches[i].error.residual;

  double sigma2 = 0.0;
  for (int pass = 0; pass < std::max(1, refinement_passes); ++pass) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (inlier[i]) {
        sum += matches[i].error.residual.squaredNorm();
        ++count;
      }
    }
    if (count == 0) throw Error(ErrorCode::kEmptyInliers, "all 3D matches were rejected");
    sigma2 = sum / static_cast<double>(count);
    std::vector<char> next(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!candidate[i]) continue;
      const Mat3 s = features[static_cast<std::size_t>(matches[i].feature)].covariance + sigma2 * Mat3::Identity();
      next[i] = local[i].dot(s.llt().solve(local[i])) <= threshold;
    }
    const bool stable = next == inlier;
    inlier = std::move(next);
    if (stable) break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    matches[i].inlier = inlier[i] != 0;
    if (matches[i].inlier) {
      ++stats.inliers;
    } else if (candidate[i]) {
      ++stats.chi2_rejected;
    }
  }
  if (stats.inliers == 0) throw Error(ErrorCode::kEmptyInliers, "all 3D matches were rejected");
  stats.sigma2_match = sigma2;
  return stats;
}


OutlierStats2 reject_outliers_2d(std::vector<Match2>& matches, const NoiseModel& noise, int refinement_passes) {
  OutlierStats2 stats;
  const std::size_t n = matches.size();
  if (n == 0) return stats;
  const double pos_threshold = chi2_inv(noise.chi2_p, 2);
  const double angle_threshold = normal_quantile(0.5 * (1.0 + noise.chi2_p)) * von_mises_sigma(noise.kappa);

  std::vector<char> candidate(n, 0);
  std::vector<char> angle_ok(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    candidate[i] = matches[i].admissible;
    angle_ok[i] = matches[i].angle <= angle_threshold;
  }
  std::vector<char> inlier = candidate;
  std::vector<char> pos_ok(n, 0);
  double sigma2 = 0.0;
  for (int pass = 0; pass < std::max(1, refinement_passes); ++pass) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (inlier[i]) {
        sum += matches[i].offset.squaredNorm();
        ++count;
      }
    }
    if (count == 0) break;
    sigma2 = sum / static_cast<double>(count);
    const Eigen::LDLT<Mat2> s(noise.sigma2d + sigma2 * Mat2::Identity());
    std::vector<char> next(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!candidate[i]) continue;
      const Vec2& d = matches[i].offset;
      pos_ok[i] = d.dot(s.solve(d)) <= pos_threshold;
      next[i] = pos_ok[i] && angle_ok[i];
    }
    const bool stable = next == inlier;
    inlier = std::move(next);
    if (stable) break;
  }

  // Per-frame cap: only the worst test failures (by match error) stay rejected.
  int max_frame = -1;
  for (const Match2& m : matches) max_frame = std::max(max_frame, m.frame);
  for (int f = 0; f <= max_frame; ++f) {
    std::vector<int> rejected;
    int frame_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (matches[i].frame != f) continue;
      ++frame_count;
      if (candidate[i] && !inlier[i]) rejected.push_back(static_cast<int>(i));
    }
    const auto cap = static_cast<std::size_t>(std::floor(noise.contour_outlier_cap * frame_count + 1e-9));
    if (rejected.size() <= cap) continue;
    ++stats.capped_frames;
    std::stable_sort(rejected.begin(), rejected.end(), [&](int a, int b) {
      return matches[static_cast<std::size_t>(a)].error.value > matches[static_cast<std::size_t>(b)].error.value;
    });
    for (std::size_t k = cap; k < rejected.size(); ++k) inlier[static_cast<std::size_t>(rejected[k])] = 1;
  }

  for (std::size_t i = 0; i < n; ++i) {
    matches[i].inlier = inlier[i] != 0;
    if (matches[i].inlier) {
      ++stats.inliers;
    } else if (candidate[i]) {
      if (!pos_ok[i]) ++stats.position_rejected;
      if (!angle_ok[i]) ++stats.orientation_rejected;
    }
  }
  stats.sigma2_match = sigma2;
  return stats;
}

// ---------------------------------------------------------------------------
// Interior constraint

bool cameras_interior(std::span<const CameraFrame> frames, const SpatialIndex& index, const SimilarityTransform& t) {
  for (const CameraFrame& frame : frames) {
    if (!index.interior_signed_check(t(frame.center_in_cloud())).interior) return false;
  }
  return true;
}

InteriorOutcome enforce_interior(std::span<const CameraFrame> frames, const SpatialIndex& index,
                                 const SimilarityTransform& prev, const SimilarityTransform& next,
                                 const SolverConfig& config) {
  if (!cameras_interior(frames, index, prev)) {
    throw Error(ErrorCode::kInvalidInitialization, "camera centers are not interior at the previous transform");
  }
  InteriorOutcome out;
  if (cameras_interior(frames, index, next)) {
    out.transform = next;
    return out;
  }
  double alpha = 1.0;
  for (int k = 1; k <= config.max_backups; ++k) {
    alpha *= config.constraint_backup_fraction;
    out.backups = k;
    const SimilarityTransform blend = interpolate(prev, next, alpha);
    if (cameras_interior(frames, index, blend)) {
      out.transform = blend;
      return out;
    }
  }
  out.transform = prev;
  return out;
}

// ---------------------------------------------------------------------------
// Outer loop

namespace {

double trim_at(const NoiseModel& noise, const SolverConfig& config, int iteration) {
  if (config.trim_anneal_iterations == 0) return noise.trim_ratio_3d;
  const double frac = 1.0 - static_cast<double>(iteration) / config.trim_anneal_iterations;
  return noise.trim_ratio_3d * std::max(0.0, frac);
}

std::size_t contour_count(std::span<const CameraFrame> frames) {
  std::size_t n = 0;
  for (const CameraFrame& f : frames) n += f.contours.size();
  return n;
}

struct MatchSet {
  std::vector<Match3> m3;
  std::vector<Match2> m2;
  OutlierStats3 stats3;
  OutlierStats2 stats2;
};

// Throws Error(kEmptyInliers) when no inlier of either kind survives.
MatchSet match_and_reject(const RegistrationProblem& problem, std::span<const CovarianceFactor> covs,
                          const SimilarityTransform& t, const NoiseModel& noise, const SolverConfig& config,
                          double trim) {
  MatchSet s;
  if (!problem.features.empty()) {
    s.m3 = correspond_3d(problem.features, covs, *problem.index, t);
    s.stats3 = reject_outliers_3d(s.m3, problem.features, t, noise, trim, config.chi2_refinement_passes);
  }
  if (!problem.frames.empty()) {
    const auto candidates =
        compute_contour_candidates(problem.index->mesh(), problem.frames, t, config.visibility_tolerance);
    s.m2 = correspond_2d(problem.frames, candidates, noise);
    s.stats2 = reject_outliers_2d(s.m2, noise, config.chi2_refinement_passes);
  }
  if (s.stats3.inliers + s.stats2.inliers == 0) {
    throw Error(ErrorCode::kEmptyInliers, "no inlier correspondences");
  }
  return s;
}

double mean_inlier_contour_px(std::span<const Match2> m2) {
  double sum = 0.0;
  int n = 0;
  for (const Match2& m : m2) {
    if (m.inlier) {
      sum += m.distance_px;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

RegistrationMetrics summarize(const MatchSet& s, double factor) {
  RegistrationMetrics m;
  double sum3 = 0.0;
  for (const Match3& x : s.m3) {
    if (x.inlier) {
      sum3 += x.error.residual.norm();
    } else {
      m.rejected_3d.push_back(x.feature);
    }
  }
  m.inliers_3d = s.stats3.inliers;
  m.mean_residual_3d = m.inliers_3d > 0 ? sum3 / m.inliers_3d : 0.0;
  double sum_all = 0.0;
  for (const Match2& x : s.m2) {
    if (!x.admissible) continue;
    sum_all += x.distance_px;
    ++m.contour_matches;
  }
  m.mean_contour_error_all = m.contour_matches > 0 ? sum_all / m.contour_matches : 0.0;
  m.mean_contour_error_inliers = mean_inlier_contour_px(s.m2);
  m.inliers_2d = s.stats2.inliers;
  m.total_error = total_error(s.m3, s.m2, factor);
  return m;
}

std::vector<CovarianceFactor> factor_covariances(std::span<const Feature3D> features) {
  std::vector<CovarianceFactor> covs;
  covs.reserve(features.size());
  for (const Feature3D& f : features) covs.emplace_back(f.covariance);
  return covs;
}

void check_problem(const RegistrationProblem& problem) {
  if (problem.index == nullptr) throw Error(ErrorCode::kEmptyInput, "registration needs a model index");
  if (problem.features.empty() && contour_count(problem.frames) == 0) {
    throw Error(ErrorCode::kEmptyInput, "registration needs 3D features or contour points");
  }
}

}  // namespace

RegistrationMetrics evaluate_registration(const RegistrationProblem& problem, const SimilarityTransform& t,
                                          const NoiseModel& noise, const SolverConfig& config, double trim_ratio) {
  check_problem(problem);
  const auto covs = factor_covariances(problem.features);
  const MatchSet s = match_and_reject(problem, covs, t, noise, config, trim_ratio);
  const double factor = equal_influence_factor(problem.features.size(), contour_count(problem.frames), trim_ratio);
  return summarize(s, factor);
}

RegistrationResult register_features(const RegistrationProblem& problem, const SimilarityTransform& init,
                                     const NoiseModel& noise, const SolverConfig& config) {
  noise.validate();
  config.validate();
  check_problem(problem);
  if (!init.is_valid()) throw Error(ErrorCode::kInvalidInitialization, "initial transform is not a valid similarity");

  RegistrationResult result;
  SimilarityTransform t = clamp_scale(init, config);
  if (!cameras_interior(problem.frames, *problem.index, t)) {
    throw Error(ErrorCode::kInvalidInitialization, "a camera center lies outside the model at the initial transform");
  }
  result.transform = t;

  const auto covs = factor_covariances(problem.features);
  const std::size_t n3d = problem.features.size();
  const std::size_t n2d = contour_count(problem.frames);
  double trim = trim_at(noise, config, 0);

  for (int k = 0; k < config.max_outer_iterations; ++k) {
    trim = trim_at(noise, config, k);
    MatchSet s;
    try {
      s = match_and_reject(problem, covs, t, noise, config, trim);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyInliers) throw;
      result.termination = Termination::kEmptyInliers;
      result.diagnostic = e.what();
      result.transform = t;
      return result;
    }
    const double factor = equal_influence_factor(n3d, n2d, trim);
    const Objective objective = build_objective(s.m3, problem.features, s.m2, problem.frames, noise, factor);
    const SolveResult solve = solve_transform(objective, t, config);
    if (solve.status == SolveStatus::kDegenerate) {
      result.termination = Termination::kDegenerateGeometry;
      result.diagnostic = solve.diagnostic;
      result.transform = t;
      return result;
    }
    const InteriorOutcome interior = enforce_interior(problem.frames, *problem.index, t, solve.transform, config);

    IterationRecord rec;
    rec.iteration = k + 1;
    rec.transform = interior.transform;
    rec.delta = transform_delta(t, interior.transform);
    rec.total_error = objective.value(interior.transform);
    rec.inliers_3d = s.stats3.inliers;
    rec.inliers_2d = s.stats2.inliers;
    rec.sigma2_match = s.stats3.sigma2_match;
    rec.mean_contour_error_px = mean_inlier_contour_px(s.m2);
    rec.trim_ratio = trim;
    rec.backups = interior.backups;
    rec.cameras_interior = cameras_interior(problem.frames, *problem.index, interior.transform);
    result.history.push_back(rec);

    t = interior.transform;
    const ConvergenceCriteria& c = config.convergence;
    if (rec.delta.translation < c.translation && rec.delta.rotation < c.rotation &&
        rec.delta.relative_scale < c.scale) {
      result.converged = true;
      result.termination = Termination::kConverged;
      break;
    }
  }
  result.transform = t;
  if (!result.converged) {
    result.termination = Termination::kMaxIterations;
    result.diagnostic = fmt::format("no convergence after {} iterations", config.max_outer_iterations);
  }
  try {
    result.metrics = evaluate_registration(problem, t, noise, config, trim);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyInliers) throw;
    result.converged = false;
    result.termination = Termination::kEmptyInliers;
    result.diagnostic = e.what();
  }
  return result;
}

MultistartResult multistart_register(std::span<const SimilarityTransform> candidates,
                                     const RegistrationProblem& problem, const NoiseModel& noise,
                                     const SolverConfig& config) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyInput, "no initial candidates");
  MultistartResult out;
  out.results.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    RankEntry entry;
    entry.candidate = static_cast<int>(i);
    try {
      RegistrationResult r = register_features(problem, candidates[i], noise, config);
      if (r.termination == Termination::kDegenerateGeometry || r.termination == Termination::kEmptyInliers) {
        entry.failed = true;
        entry.reason = fmt::format("{}: {}", to_string(r.termination), r.diagnostic);
      } else {
        entry.contour_error = r.metrics.inliers_2d > 0 ? r.metrics.mean_contour_error_inliers
                                                       : r.metrics.mean_residual_3d;
      }
      out.results[i] = std::move(r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidInitialization && e.code() != ErrorCode::kEmptyInliers) throw;
      entry.failed = true;
      entry.reason = e.what();
      out.results[i].transform = candidates[i];
      out.results[i].termination = e.code() == ErrorCode::kInvalidInitialization
                                       ? Termination::kInfeasibleInitialization
                                       : Termination::kEmptyInliers;
      out.results[i].diagnostic = e.what();
    }
    if (entry.failed) entry.contour_error = std::numeric_limits<double>::infinity();
    out.ranking.push_back(entry);
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.failed != b.failed) return !a.failed;
    return a.contour_error < b.contour_error;
  });
  out.all_failed = out.ranking.front().failed;
  out.best = out.all_failed ? -1 : out.ranking.front().candidate;
  return out;
}

std::vector<SimilarityTransform> expand_scale_variants(std::span<const SimilarityTransform> poses,
                                                       std::span<const double> scales) {
  std::vector<SimilarityTransform> out;
  out.reserve(poses.size() * scales.size());
  for (const SimilarityTransform& p : poses) {
    for (double s : scales) {
      if (!(s > 0.0)) throw Error(ErrorCode::kDomain, fmt::format("scale variant must be positive, got {}", s));
      SimilarityTransform v = p;
      v.scale = s;
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace vimlop
