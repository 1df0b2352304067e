#include "vimlop/scene_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"
#include "vimlop/error.hpp"
#include "vimlop/mesh_io.hpp"

namespace vimlop {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (std::string& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end;
}

// Rows of numeric CSV fields; a non-numeric first row is treated as a header.
std::vector<std::pair<int, std::vector<double>>> read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  std::vector<std::pair<int, std::vector<double>>> rows;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> fields = split_csv(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && parse_double(fields[i], values[i]);
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw Error(ErrorCode::kParse, fmt::format("{} line {}: non-numeric field", path.string(), line_no));
    }
    first = false;
    rows.emplace_back(line_no, std::move(values));
  }
  return rows;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  return out;
}

std::string num(double v) { return fmt::format("{}", v); }

// ---- JSON field access with path-qualified errors

const Json& member(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kParse, fmt::format("{}: expected an object", where));
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::kParse, fmt::format("{}.{}: missing", where, key));
  return *it;
}

double number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw Error(ErrorCode::kParse, fmt::format("{}: expected a number", where));
  return v.get<double>();
}

int integer(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) throw Error(ErrorCode::kParse, fmt::format("{}: expected an integer", where));
  return v.get<int>();
}

Vec3 vec3(const Json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw Error(ErrorCode::kParse, fmt::format("{}: expected 3 numbers", where));
  return {number(v[0], where), number(v[1], where), number(v[2], where)};
}

void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw Error(ErrorCode::kParse, fmt::format("{}: unknown key '{}'", where, key));
    }
  }
}

Json transform_json(const SimilarityTransform& t) {
  Eigen::Quaterniond q = t.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  Json j;
  j["scale"] = t.scale;
  j["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
  j["quaternion"] = {q.w(), q.x(), q.y(), q.z()};
  return j;
}

SimilarityTransform parse_transform(const Json& j, const std::string& where, bool allow_scale) {
  if (allow_scale) {
    reject_unknown(j, {"scale", "translation", "quaternion"}, where);
  } else {
    reject_unknown(j, {"translation", "quaternion"}, where);
  }
  const Json& qj = member(j, "quaternion", where);
  if (!qj.is_array() || qj.size() != 4) {
    throw Error(ErrorCode::kParse, fmt::format("{}.quaternion: expected [w,x,y,z]", where));
  }
  const Eigen::Quaterniond q(number(qj[0], where + ".quaternion"), number(qj[1], where + ".quaternion"),
                             number(qj[2], where + ".quaternion"), number(qj[3], where + ".quaternion"));
  double scale = 1.0;
  if (allow_scale && j.contains("scale")) scale = number(j["scale"], where + ".scale");
  if (!(scale > 0.0)) throw Error(ErrorCode::kParse, fmt::format("{}.scale: must be positive", where));
  try {
    return SimilarityTransform::from_quaternion(scale, q, vec3(member(j, "translation", where), where + ".translation"));
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}.quaternion: {}", where, e.what()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Features and contours

std::vector<Feature3D> read_features_csv(const fs::path& path, const Mat3& default_covariance) {
  std::vector<Feature3D> out;
  for (const auto& [line, v] : read_numeric_csv(path)) {
    if (v.size() != 3 && v.size() != 9) {
      throw Error(ErrorCode::kParse,
                  fmt::format("{} line {}: expected 3 or 9 fields, got {}", path.string(), line, v.size()));
    }
    Feature3D f;
    f.position = Vec3(v[0], v[1], v[2]);
    if (v.size() == 9) {
      f.covariance << v[3], v[4], v[5], v[4], v[6], v[7], v[5], v[7], v[8];
      if (!is_spd(f.covariance)) {
        throw Error(ErrorCode::kInvalidCovariance,
                    fmt::format("{} line {}: covariance is not positive definite", path.string(), line));
      }
    } else {
      f.covariance = default_covariance;
    }
    out.push_back(f);
  }
  return out;
}

void write_features_csv(const fs::path& path, const std::vector<Feature3D>& features) {
  std::ofstream out = open_out(path);
  out << "x,y,z,c00,c01,c02,c11,c12,c22\n";
  for (const Feature3D& f : features) {
    const Mat3& c = f.covariance;
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", f.position.x(), f.position.y(), f.position.z(), c(0, 0), c(0, 1),
                       c(0, 2), c(1, 1), c(1, 2), c(2, 2));
  }
}

std::vector<OrientedContourPoint> read_contours_csv(const fs::path& path) {
  std::vector<OrientedContourPoint> out;
  for (const auto& [line, v] : read_numeric_csv(path)) {
    if (v.size() != 5) {
      throw Error(ErrorCode::kParse, fmt::format("{} line {}: expected 5 fields, got {}", path.string(), line, v.size()));
    }
    if (v[0] != std::floor(v[0])) {
      throw Error(ErrorCode::kParse, fmt::format("{} line {}: frame_id must be an integer", path.string(), line));
    }
    OrientedContourPoint x;
    x.frame_id = static_cast<int>(v[0]);
    x.position = Vec2(v[1], v[2]);
    const Vec2 n(v[3], v[4]);
    if (!(n.norm() > 1e-12) || !n.allFinite()) {
      throw Error(ErrorCode::kParse, fmt::format("{} line {}: contour normal has zero length", path.string(), line));
    }
    x.normal = n.normalized();
    out.push_back(x);
  }
  return out;
}

void write_contours_csv(const fs::path& path, const std::vector<CameraFrame>& frames) {
  std::ofstream out = open_out(path);
  out << "frame_id,u,v,nu,nv\n";
  for (const CameraFrame& f : frames) {
    for (const OrientedContourPoint& x : f.contours) {
      out << fmt::format("{},{},{},{},{}\n", f.id, x.position.x(), x.position.y(), x.normal.x(), x.normal.y());
    }
  }
}

// ---------------------------------------------------------------------------
// Cameras, init, ground truth

std::vector<CameraFrame> read_cameras_json(const fs::path& path) {
  const Json doc = parse_json_file(path);
  const std::string file = path.filename().string();
  reject_unknown(doc, {"frames"}, file);
  const Json& frames = member(doc, "frames", file);
  if (!frames.is_array() || frames.empty()) {
    throw Error(ErrorCode::kParse, fmt::format("{}.frames: expected a non-empty array", file));
  }
  std::vector<CameraFrame> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string where = fmt::format("{}.frames[{}]", file, i);
    const Json& fj = frames[i];
    reject_unknown(fj, {"id", "intrinsics", "pose"}, where);
    CameraFrame f;
    f.id = integer(member(fj, "id", where), where + ".id");
    const Json& kj = member(fj, "intrinsics", where);
    const std::string kw = where + ".intrinsics";
    reject_unknown(kj, {"fx", "fy", "cx", "cy", "width", "height"}, kw);
    f.intrinsics.fx = number(member(kj, "fx", kw), kw + ".fx");
    f.intrinsics.fy = number(member(kj, "fy", kw), kw + ".fy");
    f.intrinsics.cx = number(member(kj, "cx", kw), kw + ".cx");
    f.intrinsics.cy = number(member(kj, "cy", kw), kw + ".cy");
    f.intrinsics.width = integer(member(kj, "width", kw), kw + ".width");
    f.intrinsics.height = integer(member(kj, "height", kw), kw + ".height");
    try {
      f.intrinsics.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, fmt::format("{}: {}", kw, e.what()));
    }
    f.camera_from_cloud = parse_transform(member(fj, "pose", where), where + ".pose", false);
    for (const CameraFrame& g : out) {
      if (g.id == f.id) throw Error(ErrorCode::kParse, fmt::format("{}.id: duplicate frame id {}", where, f.id));
    }
    out.push_back(f);
  }
  return out;
}

void write_cameras_json(const fs::path& path, const std::vector<CameraFrame>& frames) {
  Json doc;
  doc["frames"] = Json::array();
  for (const CameraFrame& f : frames) {
    Json fj;
    fj["id"] = f.id;
    fj["intrinsics"] = {{"fx", f.intrinsics.fx}, {"fy", f.intrinsics.fy}, {"cx", f.intrinsics.cx},
                        {"cy", f.intrinsics.cy}, {"width", f.intrinsics.width}, {"height", f.intrinsics.height}};
    Json pose = transform_json(f.camera_from_cloud);
    pose.erase("scale");
    fj["pose"] = pose;
    doc["frames"].push_back(fj);
  }
  write_text(path, doc.dump(2) + "\n");
}

void attach_contours(std::vector<CameraFrame>& frames, const std::vector<OrientedContourPoint>& contours) {
  std::map<int, std::size_t> by_id;
  for (std::size_t j = 0; j < frames.size(); ++j) by_id[frames[j].id] = j;
  for (const OrientedContourPoint& x : contours) {
    if (!by_id.contains(x.frame_id)) {
      throw Error(ErrorCode::kParse, fmt::format("contour frame_id {} has no camera entry", x.frame_id));
    }
  }
  for (const OrientedContourPoint& x : contours) frames[by_id[x.frame_id]].contours.push_back(x);
}

std::vector<SimilarityTransform> read_init_json(const fs::path& path) {
  const Json doc = parse_json_file(path);
  const std::string file = path.filename().string();
  reject_unknown(doc, {"candidates", "scale_variants"}, file);
  const Json& cands = member(doc, "candidates", file);
  if (!cands.is_array() || cands.empty()) {
    throw Error(ErrorCode::kParse, fmt::format("{}.candidates: expected a non-empty array", file));
  }
  std::vector<SimilarityTransform> out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    out.push_back(parse_transform(cands[i], fmt::format("{}.candidates[{}]", file, i), true));
  }
  if (doc.contains("scale_variants")) {
    const Json& sv = doc["scale_variants"];
    if (!sv.is_array() || sv.empty()) {
      throw Error(ErrorCode::kParse, fmt::format("{}.scale_variants: expected a non-empty array", file));
    }
    std::vector<double> scales;
    for (std::size_t i = 0; i < sv.size(); ++i) {
      scales.push_back(number(sv[i], fmt::format("{}.scale_variants[{}]", file, i)));
    }
    try {
      out = expand_scale_variants(out, scales);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, fmt::format("{}.scale_variants: {}", file, e.what()));
    }
  }
  return out;
}

void write_init_json(const fs::path& path, const std::vector<SimilarityTransform>& candidates) {
  Json doc;
  doc["candidates"] = Json::array();
  for (const SimilarityTransform& t : candidates) doc["candidates"].push_back(transform_json(t));
  write_text(path, doc.dump(2) + "\n");
}

void write_ground_truth_json(const fs::path& path, const GroundTruth& truth) {
  Json doc;
  doc["misalignment"] = transform_json(truth.misalignment);
  doc["camera_poses"] = Json::array();
  for (const SimilarityTransform& p : truth.camera_poses) {
    Json pj = transform_json(p);
    pj.erase("scale");
    doc["camera_poses"].push_back(pj);
  }
  doc["middle_frame"] = truth.middle_frame;
  doc["targets"] = Json::array();
  for (const Vec3& p : truth.targets) doc["targets"].push_back({p.x(), p.y(), p.z()});
  write_text(path, doc.dump(2) + "\n");
}

GroundTruth read_ground_truth_json(const fs::path& path) {
  const Json doc = parse_json_file(path);
  const std::string file = path.filename().string();
  reject_unknown(doc, {"misalignment", "camera_poses", "middle_frame", "targets"}, file);
  GroundTruth t;
  t.misalignment = parse_transform(member(doc, "misalignment", file), file + ".misalignment", true);
  const Json& poses = member(doc, "camera_poses", file);
  if (!poses.is_array()) throw Error(ErrorCode::kParse, fmt::format("{}.camera_poses: expected an array", file));
  for (std::size_t i = 0; i < poses.size(); ++i) {
    t.camera_poses.push_back(parse_transform(poses[i], fmt::format("{}.camera_poses[{}]", file, i), false));
  }
  t.middle_frame = integer(member(doc, "middle_frame", file), file + ".middle_frame");
  if (t.middle_frame < 0 || t.middle_frame >= static_cast<int>(t.camera_poses.size())) {
    throw Error(ErrorCode::kParse, fmt::format("{}.middle_frame: out of range", file));
  }
  const Json& targets = member(doc, "targets", file);
  if (!targets.is_array() || targets.empty()) {
    throw Error(ErrorCode::kParse, fmt::format("{}.targets: expected a non-empty array", file));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    t.targets.push_back(vec3(targets[i], fmt::format("{}.targets[{}]", file, i)));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const Json&, const std::string&)> set;
  std::function<Json(const RunConfig&)> get;
};

template <class Ref>
ConfigField real_field(std::string key, Ref ref) {
  return {std::move(key),
          [ref](RunConfig& c, const Json& v, const std::string& w) {
            if (!v.is_number()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected a number", w));
            ref(c) = v.get<double>();
          },
          [ref](const RunConfig& c) { return Json(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
ConfigField int_field(std::string key, Ref ref) {
  return {std::move(key),
          [ref](RunConfig& c, const Json& v, const std::string& w) {
            if (!v.is_number_integer()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected an integer", w));
            using T = std::remove_reference_t<decltype(ref(c))>;
            if constexpr (std::is_unsigned_v<T>) {
              if (!v.is_number_unsigned()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected a non-negative integer", w));
              ref(c) = v.get<T>();
            } else {
              ref(c) = static_cast<T>(v.get<std::int64_t>());
            }
          },
          [ref](const RunConfig& c) { return Json(ref(const_cast<RunConfig&>(c))); }};
}

ConfigField degree_field(std::string key, std::function<double&(RunConfig&)> ref) {
  return {std::move(key),
          [ref](RunConfig& c, const Json& v, const std::string& w) {
            if (!v.is_number()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected a number", w));
            ref(c) = deg_to_rad(v.get<double>());
          },
          [ref](const RunConfig& c) { return Json(rad_to_deg(ref(const_cast<RunConfig&>(c)))); }};
}

// A scalar variance (times identity) or a full symmetric matrix.
template <int N>
ConfigField matrix_field(std::string key, std::function<Eigen::Matrix<double, N, N>&(RunConfig&)> ref) {
  using M = Eigen::Matrix<double, N, N>;
  return {std::move(key),
          [ref](RunConfig& c, const Json& v, const std::string& w) {
            if (v.is_number()) {
              ref(c) = v.get<double>() * M::Identity();
              return;
            }
            if (!v.is_array() || v.size() != N) {
              throw Error(ErrorCode::kConfig, fmt::format("{}: expected a number or a {}x{} array", w, N, N));
            }
            M m;
            for (int r = 0; r < N; ++r) {
              const Json& row = v[static_cast<std::size_t>(r)];
              if (!row.is_array() || row.size() != N) {
                throw Error(ErrorCode::kConfig, fmt::format("{}: expected a {}x{} array", w, N, N));
              }
              for (int col = 0; col < N; ++col) {
                const Json& x = row[static_cast<std::size_t>(col)];
                if (!x.is_number()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected numbers", w));
                m(r, col) = x.get<double>();
              }
            }
            ref(c) = m;
          },
          [ref](const RunConfig& c) {
            const M& m = ref(const_cast<RunConfig&>(c));
            Json rows = Json::array();
            for (int r = 0; r < N; ++r) {
              Json row = Json::array();
              for (int col = 0; col < N; ++col) row.push_back(m(r, col));
              rows.push_back(row);
            }
            return rows;
          }};
}

Json bumps_json(const std::vector<CavityBump>& bumps) {
  Json arr = Json::array();
  for (const CavityBump& b : bumps) {
    arr.push_back({{"xi", b.xi}, {"phi_deg", rad_to_deg(b.phi)}, {"width_xi", b.width_xi},
                   {"width_phi_deg", rad_to_deg(b.width_phi)}, {"height", b.height}});
  }
  return arr;
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    f.push_back(matrix_field<2>("noise.sigma2d", [](RunConfig& c) -> Mat2& { return c.noise.sigma2d; }));
    f.push_back(real_field("noise.kappa", [](RunConfig& c) -> double& { return c.noise.kappa; }));
    f.push_back(matrix_field<3>("noise.sigma3d_default", [](RunConfig& c) -> Mat3& { return c.noise.sigma3d_default; }));
    f.push_back(real_field("noise.trim_ratio_3d", [](RunConfig& c) -> double& { return c.noise.trim_ratio_3d; }));
    f.push_back(real_field("noise.chi2_p", [](RunConfig& c) -> double& { return c.noise.chi2_p; }));
    f.push_back(degree_field("noise.orientation_gate_deg", [](RunConfig& c) -> double& { return c.noise.orientation_gate; }));
    f.push_back(real_field("noise.contour_outlier_cap", [](RunConfig& c) -> double& { return c.noise.contour_outlier_cap; }));

    f.push_back(real_field("solver.scale_min", [](RunConfig& c) -> double& { return c.solver.scale_min; }));
    f.push_back(real_field("solver.scale_max", [](RunConfig& c) -> double& { return c.solver.scale_max; }));
    f.push_back(int_field("solver.max_outer_iterations", [](RunConfig& c) -> int& { return c.solver.max_outer_iterations; }));
    f.push_back(real_field("solver.convergence_translation", [](RunConfig& c) -> double& { return c.solver.convergence.translation; }));
    f.push_back(real_field("solver.convergence_rotation", [](RunConfig& c) -> double& { return c.solver.convergence.rotation; }));
    f.push_back(real_field("solver.convergence_scale", [](RunConfig& c) -> double& { return c.solver.convergence.scale; }));
    f.push_back(int_field("solver.inner_max_steps", [](RunConfig& c) -> int& { return c.solver.inner_max_steps; }));
    f.push_back(real_field("solver.inner_gradient_tolerance", [](RunConfig& c) -> double& { return c.solver.inner_gradient_tolerance; }));
    f.push_back(real_field("solver.constraint_backup_fraction", [](RunConfig& c) -> double& { return c.solver.constraint_backup_fraction; }));
    f.push_back(int_field("solver.max_backups", [](RunConfig& c) -> int& { return c.solver.max_backups; }));
    f.push_back(int_field("solver.trim_anneal_iterations", [](RunConfig& c) -> int& { return c.solver.trim_anneal_iterations; }));
    f.push_back(int_field("solver.chi2_refinement_passes", [](RunConfig& c) -> int& { return c.solver.chi2_refinement_passes; }));
    f.push_back(real_field("solver.visibility_tolerance", [](RunConfig& c) -> double& { return c.solver.visibility_tolerance; }));
    f.push_back(int_field("solver.seed", [](RunConfig& c) -> std::uint64_t& { return c.solver.seed; }));

    f.push_back({"scene.mesh_path",
                 [](RunConfig& c, const Json& v, const std::string& w) {
                   if (!v.is_string()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected a string", w));
                   c.scene.mesh_path = v.get<std::string>();
                 },
                 [](const RunConfig& c) { return Json(c.scene.mesh_path); }});
    f.push_back(int_field("scene.frame_count", [](RunConfig& c) -> int& { return c.scene.frame_count; }));
    f.push_back(int_field("scene.point_count", [](RunConfig& c) -> int& { return c.scene.point_count; }));
    f.push_back(real_field("scene.noise_parallel", [](RunConfig& c) -> double& { return c.scene.noise_parallel; }));
    f.push_back(real_field("scene.noise_orthogonal", [](RunConfig& c) -> double& { return c.scene.noise_orthogonal; }));
    f.push_back(real_field("scene.covariance_floor", [](RunConfig& c) -> double& { return c.scene.covariance_floor; }));
    f.push_back(real_field("scene.camera_noise_mm", [](RunConfig& c) -> double& { return c.scene.camera_noise_mm; }));
    f.push_back(real_field("scene.camera_noise_deg", [](RunConfig& c) -> double& { return c.scene.camera_noise_deg; }));
    f.push_back(real_field("scene.misalign_min_mm", [](RunConfig& c) -> double& { return c.scene.misalign_min_mm; }));
    f.push_back(real_field("scene.misalign_max_mm", [](RunConfig& c) -> double& { return c.scene.misalign_max_mm; }));
    f.push_back(real_field("scene.misalign_min_deg", [](RunConfig& c) -> double& { return c.scene.misalign_min_deg; }));
    f.push_back(real_field("scene.misalign_max_deg", [](RunConfig& c) -> double& { return c.scene.misalign_max_deg; }));
    f.push_back(real_field("scene.misalign_scale_min", [](RunConfig& c) -> double& { return c.scene.misalign_scale_min; }));
    f.push_back(real_field("scene.misalign_scale_max", [](RunConfig& c) -> double& { return c.scene.misalign_scale_max; }));
    f.push_back(matrix_field<2>("scene.contour_covariance", [](RunConfig& c) -> Mat2& { return c.scene.contour_covariance; }));
    f.push_back(real_field("scene.contour_kappa", [](RunConfig& c) -> double& { return c.scene.contour_kappa; }));
    f.push_back(int_field("scene.contour_stride", [](RunConfig& c) -> int& { return c.scene.contour_stride; }));
    f.push_back(real_field("scene.visibility_tolerance", [](RunConfig& c) -> double& { return c.scene.visibility_tolerance; }));
    f.push_back(real_field("scene.min_camera_clearance", [](RunConfig& c) -> double& { return c.scene.min_camera_clearance; }));
    f.push_back(int_field("scene.seed", [](RunConfig& c) -> std::uint64_t& { return c.scene.seed; }));
    f.push_back(real_field("scene.intrinsics.fx", [](RunConfig& c) -> double& { return c.scene.intrinsics.fx; }));
    f.push_back(real_field("scene.intrinsics.fy", [](RunConfig& c) -> double& { return c.scene.intrinsics.fy; }));
    f.push_back(real_field("scene.intrinsics.cx", [](RunConfig& c) -> double& { return c.scene.intrinsics.cx; }));
    f.push_back(real_field("scene.intrinsics.cy", [](RunConfig& c) -> double& { return c.scene.intrinsics.cy; }));
    f.push_back(int_field("scene.intrinsics.width", [](RunConfig& c) -> int& { return c.scene.intrinsics.width; }));
    f.push_back(int_field("scene.intrinsics.height", [](RunConfig& c) -> int& { return c.scene.intrinsics.height; }));
    f.push_back({"scene.cavity.semi_axes",
                 [](RunConfig& c, const Json& v, const std::string& w) {
                   try {
                     c.scene.cavity.semi_axes = vec3(v, w);
                   } catch (const Error& e) {
                     throw Error(ErrorCode::kConfig, e.what());
                   }
                 },
                 [](const RunConfig& c) {
                   const Vec3& a = c.scene.cavity.semi_axes;
                   return Json::array({a.x(), a.y(), a.z()});
                 }});
    f.push_back(int_field("scene.cavity.subdivision", [](RunConfig& c) -> int& { return c.scene.cavity.subdivision; }));
    f.push_back(real_field("scene.cavity.bumpiness", [](RunConfig& c) -> double& { return c.scene.cavity.bumpiness; }));
    f.push_back({"scene.cavity.bumps",
                 [](RunConfig& c, const Json& v, const std::string& w) {
                   if (!v.is_array()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected an array", w));
                   std::vector<CavityBump> bumps;
                   for (std::size_t i = 0; i < v.size(); ++i) {
                     const std::string bw = fmt::format("{}[{}]", w, i);
                     try {
                       reject_unknown(v[i], {"xi", "phi_deg", "width_xi", "width_phi_deg", "height"}, bw);
                       CavityBump b;
                       b.xi = number(member(v[i], "xi", bw), bw + ".xi");
                       b.phi = deg_to_rad(number(member(v[i], "phi_deg", bw), bw + ".phi_deg"));
                       b.width_xi = number(member(v[i], "width_xi", bw), bw + ".width_xi");
                       b.width_phi = deg_to_rad(number(member(v[i], "width_phi_deg", bw), bw + ".width_phi_deg"));
                       b.height = number(member(v[i], "height", bw), bw + ".height");
                       if (!(b.width_xi > 0.0 && b.width_phi > 0.0)) {
                         throw Error(ErrorCode::kConfig, fmt::format("{}: widths must be positive", bw));
                       }
                       bumps.push_back(b);
                     } catch (const Error& e) {
                       throw Error(ErrorCode::kConfig, e.what());
                     }
                   }
                   c.scene.cavity.bumps = std::move(bumps);
                 },
                 [](const RunConfig& c) { return bumps_json(c.scene.cavity.bumps); }});
    f.push_back({"scene.trajectory",
                 [](RunConfig& c, const Json& v, const std::string& w) {
                   if (!v.is_array()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected an array", w));
                   std::vector<SimilarityTransform> poses;
                   for (std::size_t i = 0; i < v.size(); ++i) {
                     try {
                       poses.push_back(parse_transform(v[i], fmt::format("{}[{}]", w, i), false));
                     } catch (const Error& e) {
                       throw Error(ErrorCode::kConfig, e.what());
                     }
                   }
                   c.scene.trajectory = std::move(poses);
                 },
                 [](const RunConfig& c) {
                   Json arr = Json::array();
                   for (const SimilarityTransform& p : c.scene.trajectory) {
                     Json pj = transform_json(p);
                     pj.erase("scale");
                     arr.push_back(pj);
                   }
                   return arr;
                 }});
    return f;
  }();
  return fields;
}

const ConfigField* find_field(const std::string& key) {
  for (const ConfigField& f : config_fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

bool is_section(const std::string& key) {
  return key == "noise" || key == "solver" || key == "scene" || key == "scene.intrinsics" || key == "scene.cavity";
}

void apply(RunConfig& c, const Json& obj, const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (is_section(path)) {
      if (!value.is_object()) throw Error(ErrorCode::kConfig, fmt::format("{}: expected an object", path));
      apply(c, value, path);
      continue;
    }
    const ConfigField* f = find_field(path);
    if (f == nullptr) throw Error(ErrorCode::kConfig, fmt::format("unknown config key '{}'", path));
    f->set(c, value, path);
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const RunConfig& base) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kConfig, fmt::format("invalid config JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  RunConfig c = base;
  apply(c, doc, "");
  try {
    c.noise.validate();
    c.solver.validate();
    c.scene.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, fmt::format("invalid config: {}", e.what()));
  }
  return c;
}

RunConfig read_config_json(const fs::path& path, const RunConfig& base) {
  try {
    return parse_config(read_file(path), base);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string config_to_json(const RunConfig& config) {
  Json doc = Json::object();
  for (const ConfigField& f : config_fields()) {
    Json* node = &doc;
    std::string rest = f.key;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      node = &(*node)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    (*node)[rest] = f.get(config);
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const ConfigField& f : config_fields()) keys.push_back(f.key);
  return keys;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::string report_json(const RegistrationResult& result, const ReportExtras& extras) {
  Json doc;
  doc["converged"] = result.converged;
  doc["termination"] = to_string(result.termination);
  doc["diagnostic"] = result.diagnostic;
  doc["iterations"] = result.history.size();
  Json t = transform_json(result.transform);
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) {
    rot.push_back({result.transform.rotation(r, 0), result.transform.rotation(r, 1), result.transform.rotation(r, 2)});
  }
  t["rotation"] = rot;
  doc["transform"] = t;
  const RegistrationMetrics& m = result.metrics;
  doc["metrics"] = {{"mean_residual_3d_mm", m.mean_residual_3d},
                    {"mean_contour_error_px", m.mean_contour_error_all},
                    {"mean_contour_error_inliers_px", m.mean_contour_error_inliers},
                    {"inliers_3d", m.inliers_3d},
                    {"inliers_2d", m.inliers_2d},
                    {"contour_matches", m.contour_matches},
                    {"total_error", finite_or_null(m.total_error)}};
  Json hist = Json::array();
  for (const IterationRecord& r : result.history) {
    hist.push_back({{"iteration", r.iteration},
                    {"total_error", finite_or_null(r.total_error)},
                    {"inliers_3d", r.inliers_3d},
                    {"inliers_2d", r.inliers_2d},
                    {"sigma2_match", r.sigma2_match},
                    {"mean_contour_error_px", r.mean_contour_error_px},
                    {"trim_ratio", r.trim_ratio},
                    {"backups", r.backups},
                    {"cameras_interior", r.cameras_interior},
                    {"delta_translation_mm", r.delta.translation},
                    {"delta_rotation_rad", r.delta.rotation},
                    {"delta_scale", r.delta.relative_scale}});
  }
  doc["history"] = hist;
  if (extras.tre_mm || extras.pose_error) {
    Json ev = Json::object();
    if (extras.tre_mm) ev["tre_mm"] = *extras.tre_mm;
    if (extras.pose_error) {
      ev["camera_position_error_mm"] = extras.pose_error->position_mm;
      ev["camera_angle_error_deg"] = extras.pose_error->angle_deg;
    }
    doc["evaluation"] = ev;
  }
  if (extras.multistart != nullptr) {
    Json ms;
    ms["best"] = extras.multistart->best;
    ms["all_failed"] = extras.multistart->all_failed;
    Json ranking = Json::array();
    for (const RankEntry& e : extras.multistart->ranking) {
      ranking.push_back({{"candidate", e.candidate},
                         {"contour_error", finite_or_null(e.contour_error)},
                         {"failed", e.failed},
                         {"reason", e.reason}});
    }
    ms["ranking"] = ranking;
    doc["multistart"] = ms;
  }
  return doc.dump(2) + "\n";
}

SimilarityTransform read_report_transform(const fs::path& path) {
  const Json doc = parse_json_file(path);
  const std::string file = path.filename().string();
  Json t = member(doc, "transform", file);
  t.erase("rotation");
  return parse_transform(t, file + ".transform", true);
}

void write_history_csv(const fs::path& path, const std::vector<IterationRecord>& history) {
  std::ofstream out = open_out(path);
  out << "iteration,total_error,inliers_3d,inliers_2d,sigma2_match,mean_contour_error_px,trim_ratio,backups,"
         "cameras_interior,delta_translation_mm,delta_rotation_rad,delta_scale\n";
  for (const IterationRecord& r : history) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.iteration, num(r.total_error), r.inliers_3d,
                       r.inliers_2d, num(r.sigma2_match), num(r.mean_contour_error_px), num(r.trim_ratio), r.backups,
                       r.cameras_interior ? 1 : 0, num(r.delta.translation), num(r.delta.rotation),
                       num(r.delta.relative_scale));
  }
}

void write_ranking_csv(const fs::path& path, const MultistartResult& multistart) {
  std::ofstream out = open_out(path);
  out << "rank,candidate,contour_error,failed,best,reason\n";
  for (std::size_t i = 0; i < multistart.ranking.size(); ++i) {
    const RankEntry& e = multistart.ranking[i];
    std::string reason = e.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    out << fmt::format("{},{},{},{},{},{}\n", i + 1, e.candidate, num(e.contour_error), e.failed ? 1 : 0,
                       e.candidate == multistart.best ? 1 : 0, reason);
  }
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out = open_out(path);
  out << "offset_mm,offset_deg,reprojection_px,contour_err_px,converged,tre_mm,iterations,termination\n";
  for (const SweepRow& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", num(r.offset.mm), num(r.offset.deg), num(r.reprojection_px),
                       num(r.contour_error_px), r.converged ? 1 : 0, num(r.tre_mm), r.iterations, r.termination);
  }
}

std::vector<SweepOffset> read_offsets_csv(const fs::path& path) {
  std::vector<SweepOffset> out;
  for (const auto& [line, v] : read_numeric_csv(path)) {
    if (v.size() != 2) {
      throw Error(ErrorCode::kParse, fmt::format("{} line {}: expected 2 fields, got {}", path.string(), line, v.size()));
    }
    out.push_back({v[0], v[1]});
  }
  if (out.empty()) throw Error(ErrorCode::kParse, fmt::format("{}: no offsets", path.string()));
  return out;
}

SceneFiles SceneFiles::in(const fs::path& dir) {
  SceneFiles f;
  f.mesh = dir / "mesh.ply";
  f.features = dir / "features.csv";
  f.contours = dir / "contours.csv";
  f.cameras = dir / "cameras.json";
  f.init = dir / "init.json";
  f.ground_truth = dir / "ground_truth.json";
  return f;
}

void write_scene(const fs::path& dir, const Scene& scene) {
  fs::create_directories(dir);
  const SceneFiles files = SceneFiles::in(dir);
  write_ply(*scene.mesh, files.mesh);
  write_features_csv(files.features, scene.features);
  write_contours_csv(files.contours, scene.frames);
  write_cameras_json(files.cameras, scene.frames);
  write_init_json(files.init, {SimilarityTransform::identity()});
  write_ground_truth_json(files.ground_truth, scene.truth);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing {}", path.string()));
}

}  // namespace vimlop
