#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vimlop/camera.hpp"
#include "vimlop/registration.hpp"
#include "vimlop/synthetic.hpp"

namespace vimlop {

/// `x,y,z[,c00,c01,c02,c11,c12,c22]` per line with an optional header row.
/// Rows without covariance get `default_covariance`.
std::vector<Feature3D> read_features_csv(const std::filesystem::path& path, const Mat3& default_covariance);
void write_features_csv(const std::filesystem::path& path, const std::vector<Feature3D>& features);

/// `frame_id,u,v,nu,nv` per line with an optional header row. Normals are
/// normalized on ingest.
std::vector<OrientedContourPoint> read_contours_csv(const std::filesystem::path& path);
void write_contours_csv(const std::filesystem::path& path, const std::vector<CameraFrame>& frames);

/// Frames with intrinsics and camera-from-cloud poses; contours left empty.
std::vector<CameraFrame> read_cameras_json(const std::filesystem::path& path);
void write_cameras_json(const std::filesystem::path& path, const std::vector<CameraFrame>& frames);

/// Appends each contour point to the frame with the matching id; throws
/// Error(kParse) for an unknown frame id, leaving `frames` unchanged.
void attach_contours(std::vector<CameraFrame>& frames, const std::vector<OrientedContourPoint>& contours);

/// `{"candidates": [{"scale", "translation", "quaternion"}...], "scale_variants": [...]}`;
/// scale variants, when present, replace each candidate's scale.
std::vector<SimilarityTransform> read_init_json(const std::filesystem::path& path);
void write_init_json(const std::filesystem::path& path, const std::vector<SimilarityTransform>& candidates);

void write_ground_truth_json(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_ground_truth_json(const std::filesystem::path& path);

struct RunConfig {
  NoiseModel noise;
  SolverConfig solver;
  SceneSpec scene;
};

/// Applies a JSON document with optional sections "noise", "solver" and
/// "scene" on top of `base`. Unknown keys and wrong types raise Error(kConfig)
/// naming the key; the result is validated.
RunConfig parse_config(const std::string& json_text, const RunConfig& base = {});
RunConfig read_config_json(const std::filesystem::path& path, const RunConfig& base = {});
std::string config_to_json(const RunConfig& config);

/// Config keys addressable as "section.key" (nested sections use dots), in
/// document order.
std::vector<std::string> config_keys();

/// Machine-readable registration report.
struct ReportExtras {
  std::optional<double> tre_mm;
  std::optional<PoseError> pose_error;
  const MultistartResult* multistart = nullptr;
};
std::string report_json(const RegistrationResult& result, const ReportExtras& extras = {});

/// The final transform recorded in a report written by report_json.
SimilarityTransform read_report_transform(const std::filesystem::path& path);

void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history);
void write_ranking_csv(const std::filesystem::path& path, const MultistartResult& multistart);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

/// Offsets file: `mm,deg` per line with an optional header row.
std::vector<SweepOffset> read_offsets_csv(const std::filesystem::path& path);

/// Scene directory layout shared by simulate, register, sweep and overlay.
struct SceneFiles {
  std::filesystem::path mesh;
  std::filesystem::path features;
  std::filesystem::path contours;
  std::filesystem::path cameras;
  std::filesystem::path init;
  std::filesystem::path ground_truth;

  static SceneFiles in(const std::filesystem::path& dir);
};

/// Writes mesh.ply, features.csv, contours.csv, cameras.json, init.json
/// (identity start) and ground_truth.json.
void write_scene(const std::filesystem::path& dir, const Scene& scene);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vimlop
