#include <gtest/gtest.h>

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "test_util.hpp"
#include "vimlop/scene_io.hpp"

using namespace vimlop;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

const char* kCameras = R"({"frames": [
  {"id": 0, "intrinsics": {"fx": 450, "fy": 450, "cx": 319.5, "cy": 239.5, "width": 640, "height": 480},
   "pose": {"translation": [0, 0, 0], "quaternion": [1, 0, 0, 0]}},
  {"id": 3, "intrinsics": {"fx": 400, "fy": 410, "cx": 320, "cy": 240, "width": 640, "height": 480},
   "pose": {"translation": [1, 2, 3], "quaternion": [0, 0, 1, 0]}}
]})";

}  // namespace

TEST(FeaturesCsv, ThreeAndNineFieldRows) {
  TempDir dir("features");
  write_file(dir / "f.csv", "x,y,z\n1,2,3\n\n4,5,6,2,0,0,2,0,3\n");
  const Mat3 fallback = 0.25 * Mat3::Identity();
  const auto f = read_features_csv(dir / "f.csv", fallback);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].position, Vec3(1, 2, 3));
  EXPECT_EQ(f[0].covariance, fallback);
  EXPECT_EQ(f[1].covariance, Vec3(2, 2, 3).asDiagonal().toDenseMatrix());
}

TEST(FeaturesCsv, Errors) {
  TempDir dir("features_bad");
  write_file(dir / "a.csv", "1,2\n");
  EXPECT_EQ(error_code_of([&] { read_features_csv(dir / "a.csv", Mat3::Identity()); }), ErrorCode::kParse);
  write_file(dir / "b.csv", "1,2,3\n1,2,x\n");
  EXPECT_EQ(error_code_of([&] { read_features_csv(dir / "b.csv", Mat3::Identity()); }), ErrorCode::kParse);
  write_file(dir / "c.csv", "1,2,3,1,0,0,-1,0,1\n");
  EXPECT_EQ(error_code_of([&] { read_features_csv(dir / "c.csv", Mat3::Identity()); }), ErrorCode::kInvalidCovariance);
  EXPECT_EQ(error_code_of([&] { read_features_csv(dir / "missing.csv", Mat3::Identity()); }), ErrorCode::kIo);
}

TEST(FeaturesCsv, RoundTrip) {
  TempDir dir("features_rt");
  std::vector<Feature3D> f(2);
  f[0].position = Vec3(0.1, -1.0 / 3.0, 1e-7);
  f[1].position = Vec3(5, 6, 7);
  f[1].covariance << 2, 0.5, 0.1, 0.5, 1, 0.2, 0.1, 0.2, 3;
  write_features_csv(dir / "f.csv", f);
  const auto g = read_features_csv(dir / "f.csv", Mat3::Identity());
  ASSERT_EQ(g.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(g[i].position, f[i].position);
    EXPECT_EQ(g[i].covariance, f[i].covariance);
  }
}

TEST(ContoursCsv, NormalizesAndRejectsZeroNormal) {
  TempDir dir("contours");
  write_file(dir / "c.csv", "frame_id,u,v,nu,nv\n2,10,20,3,4\n");
  const auto c = read_contours_csv(dir / "c.csv");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].frame_id, 2);
  EXPECT_EQ(c[0].position, Vec2(10, 20));
  EXPECT_NEAR(c[0].normal.x(), 0.6, 1e-15);
  EXPECT_NEAR(c[0].normal.y(), 0.8, 1e-15);
  write_file(dir / "z.csv", "0,1,1,0,0\n");
  EXPECT_EQ(error_code_of([&] { read_contours_csv(dir / "z.csv"); }), ErrorCode::kParse);
  write_file(dir / "f.csv", "0.5,1,1,0,1\n");
  EXPECT_EQ(error_code_of([&] { read_contours_csv(dir / "f.csv"); }), ErrorCode::kParse);
}

TEST(CamerasJson, ParsesAndAttaches) {
  TempDir dir("cameras");
  write_file(dir / "c.json", kCameras);
  auto frames = read_cameras_json(dir / "c.json");
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[1].id, 3);
  EXPECT_EQ(frames[1].intrinsics.fy, 410.0);
  EXPECT_EQ(frames[1].camera_from_cloud.translation, Vec3(1, 2, 3));
  EXPECT_NEAR((frames[1].camera_from_cloud.rotation - Vec3(-1, 1, -1).asDiagonal().toDenseMatrix()).norm(), 0.0,
              1e-15);

  std::vector<OrientedContourPoint> c(2);
  c[0].frame_id = 3;
  c[1].frame_id = 7;
  EXPECT_EQ(error_code_of([&] { attach_contours(frames, c); }), ErrorCode::kParse);
  c.pop_back();
  attach_contours(frames, c);
  EXPECT_EQ(frames[1].contours.size(), 1u);
  EXPECT_TRUE(frames[0].contours.empty());

  write_cameras_json(dir / "d.json", frames);
  const auto again = read_cameras_json(dir / "d.json");
  ASSERT_EQ(again.size(), 2u);
  EXPECT_EQ(again[0].camera_from_cloud.translation, frames[0].camera_from_cloud.translation);
  EXPECT_LT((again[1].camera_from_cloud.rotation - frames[1].camera_from_cloud.rotation).norm(), 1e-15);
}

TEST(CamerasJson, StrictSchema) {
  TempDir dir("cameras_bad");
  std::string unknown = kCameras;
  unknown.replace(unknown.find("\"fx\": 400"), 9, "\"fz\": 400");
  write_file(dir / "a.json", unknown);
  const std::string msg = message_of([&] { read_cameras_json(dir / "a.json"); });
  EXPECT_NE(msg.find("fz"), std::string::npos) << msg;

  std::string dup = kCameras;
  dup.replace(dup.find("\"id\": 3"), 7, "\"id\": 0");
  write_file(dir / "b.json", dup);
  EXPECT_EQ(error_code_of([&] { read_cameras_json(dir / "b.json"); }), ErrorCode::kParse);

  std::string missing = kCameras;
  missing.replace(missing.find("\"cy\": 240, "), 11, "");
  write_file(dir / "c.json", missing);
  const std::string m2 = message_of([&] { read_cameras_json(dir / "c.json"); });
  EXPECT_NE(m2.find("cy"), std::string::npos) << m2;

  write_file(dir / "d.json", "{\"frames\": [");
  EXPECT_EQ(error_code_of([&] { read_cameras_json(dir / "d.json"); }), ErrorCode::kParse);
}

TEST(InitJson, CandidatesAndScaleVariants) {
  TempDir dir("init");
  write_file(dir / "a.json", R"({"candidates": [
    {"scale": 1.5, "translation": [1, 0, 0], "quaternion": [1, 0, 0, 0]},
    {"translation": [0, 1, 0], "quaternion": [2, 0, 0, 0]}]})");
  const auto a = read_init_json(dir / "a.json");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].scale, 1.5);
  EXPECT_EQ(a[1].scale, 1.0);
  EXPECT_LT((a[1].rotation - Mat3::Identity()).norm(), 1e-15);

  write_file(dir / "b.json", R"({"candidates": [
    {"translation": [0, 0, 0], "quaternion": [1, 0, 0, 0]},
    {"translation": [0, 1, 0], "quaternion": [1, 0, 0, 0]}], "scale_variants": [0.9, 1.1]})");
  const auto b = read_init_json(dir / "b.json");
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(b[0].scale, 0.9);
  EXPECT_EQ(b[1].scale, 1.1);
  EXPECT_EQ(b[2].translation, Vec3(0, 1, 0));

  write_file(dir / "c.json", R"({"candidates": [{"translation": [0, 0, 0], "quaternion": [0, 0, 0, 0]}]})");
  EXPECT_EQ(error_code_of([&] { read_init_json(dir / "c.json"); }), ErrorCode::kParse);
  write_file(dir / "d.json", R"({"candidates": [], "extra": 1})");
  EXPECT_EQ(error_code_of([&] { read_init_json(dir / "d.json"); }), ErrorCode::kParse);
  write_file(dir / "e.json", R"({"candidates": [{"scale": -1, "translation": [0, 0, 0], "quaternion": [1, 0, 0, 0]}]})");
  EXPECT_EQ(error_code_of([&] { read_init_json(dir / "e.json"); }), ErrorCode::kParse);

  const std::vector<SimilarityTransform> w = {
      SimilarityTransform{1.2, rotation_exp(Vec3(0.1, -0.2, 0.3)), Vec3(4, 5, 6)}};
  write_init_json(dir / "w.json", w);
  const auto r = read_init_json(dir / "w.json");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].scale, 1.2);
  EXPECT_LT((r[0].rotation - w[0].rotation).norm(), 1e-14);
}

TEST(GroundTruthJson, RoundTrip) {
  TempDir dir("truth");
  GroundTruth t;
  t.misalignment = SimilarityTransform{1.01, rotation_exp(Vec3(0.02, 0.01, -0.03)), Vec3(1, -2, 0.5)};
  t.camera_poses = {SimilarityTransform{}, SimilarityTransform{1.0, rotation_exp(Vec3(0, 0.1, 0)), Vec3(0, 0, 2)}};
  t.middle_frame = 1;
  t.targets = {Vec3(1, 2, 3), Vec3(0.25, 0.5, 0.75)};
  write_ground_truth_json(dir / "g.json", t);
  const GroundTruth r = read_ground_truth_json(dir / "g.json");
  EXPECT_EQ(r.middle_frame, 1);
  EXPECT_EQ(r.targets, t.targets);
  EXPECT_EQ(r.misalignment.scale, t.misalignment.scale);
  EXPECT_LT((r.misalignment.rotation - t.misalignment.rotation).norm(), 1e-14);
  ASSERT_EQ(r.camera_poses.size(), 2u);
  EXPECT_EQ(r.camera_poses[1].translation, Vec3(0, 0, 2));
}

TEST(Config, UnknownKeyAndWrongType) {
  EXPECT_EQ(error_code_of([] { parse_config(R"({"noise": {"kapa": 3}})"); }), ErrorCode::kConfig);
  const std::string msg = message_of([] { parse_config(R"({"noise": {"kapa": 3}})"); });
  EXPECT_NE(msg.find("noise.kapa"), std::string::npos) << msg;
  EXPECT_EQ(error_code_of([] { parse_config(R"({"solver": {"max_outer_iterations": 1.5}})"); }), ErrorCode::kConfig);
  EXPECT_EQ(error_code_of([] { parse_config(R"({"solver": {"scale_min": 3.0}})"); }), ErrorCode::kConfig);
  EXPECT_EQ(error_code_of([] { parse_config("[1, 2]"); }), ErrorCode::kConfig);
  EXPECT_EQ(error_code_of([] { parse_config("{"); }), ErrorCode::kConfig);
}

TEST(Config, OverridesAndRoundTrip) {
  const RunConfig c = parse_config(R"({"noise": {"kappa": 50}, "solver": {"max_outer_iterations": 7},
                                       "scene": {"point_count": 123, "seed": 9}})");
  EXPECT_EQ(c.noise.kappa, 50.0);
  EXPECT_EQ(c.solver.max_outer_iterations, 7);
  EXPECT_EQ(c.scene.point_count, 123);
  EXPECT_EQ(c.scene.seed, 9u);
  EXPECT_EQ(c.solver.scale_min, RunConfig{}.solver.scale_min);
  const std::string text = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_config(text)), text);
  EXPECT_FALSE(config_keys().empty());
}

TEST(Report, DeterministicAndTransformReadable) {
  TempDir dir("report");
  RegistrationResult r;
  r.transform = SimilarityTransform{1.05, rotation_exp(Vec3(0.1, 0.2, -0.1)), Vec3(1, 2, 3)};
  r.converged = true;
  r.termination = Termination::kConverged;
  IterationRecord h;
  h.iteration = 1;
  h.total_error = 12.5;
  h.transform = r.transform;
  r.history = {h};
  ReportExtras extras;
  extras.tre_mm = 0.25;
  const std::string a = report_json(r, extras);
  EXPECT_EQ(a, report_json(r, extras));
  EXPECT_NE(a.find("\"cameras_interior\": true"), std::string::npos);
  write_text(dir / "report.json", a);
  const SimilarityTransform t = read_report_transform(dir / "report.json");
  EXPECT_EQ(t.scale, r.transform.scale);
  EXPECT_EQ(t.translation, r.transform.translation);
  EXPECT_LT((t.rotation - r.transform.rotation).norm(), 1e-14);
}

TEST(OffsetsCsv, ParsesWithHeader) {
  TempDir dir("offsets");
  write_file(dir / "o.csv", "mm,deg\n0,0\n1.5,3\n");
  const auto o = read_offsets_csv(dir / "o.csv");
  ASSERT_EQ(o.size(), 2u);
  EXPECT_EQ(o[1].mm, 1.5);
  EXPECT_EQ(o[1].deg, 3.0);
  write_file(dir / "e.csv", "mm,deg\n");
  EXPECT_EQ(error_code_of([&] { read_offsets_csv(dir / "e.csv"); }), ErrorCode::kParse);
}

TEST(SceneFiles, WriteSceneLayout) {
  TempDir dir("scene");
  SceneSpec spec;
  spec.point_count = 50;
  const Scene s = generate_scene(spec);
  write_scene(dir.path(), s);
  const SceneFiles files = SceneFiles::in(dir.path());
  const auto features = read_features_csv(files.features, Mat3::Identity());
  ASSERT_EQ(features.size(), s.features.size());
  EXPECT_EQ(features[7].position, s.features[7].position);
  auto frames = read_cameras_json(files.cameras);
  attach_contours(frames, read_contours_csv(files.contours));
  ASSERT_EQ(frames.size(), s.frames.size());
  EXPECT_EQ(frames[2].contours.size(), s.frames[2].contours.size());
  EXPECT_EQ(read_init_json(files.init).size(), 1u);
  EXPECT_EQ(read_ground_truth_json(files.ground_truth).targets, s.truth.targets);
  EXPECT_FALSE(read_file(files.mesh).empty());
}

namespace {

using Json = nlohmann::ordered_json;

Json load_schema(const std::string& name) {
  return Json::parse(read_file(std::filesystem::path(VIMLOP_SCHEMA_DIR) / name));
}

const Json& resolve(const Json& node, const Json& root) {
  if (!node.contains("$ref")) return node;
  const std::string ref = node["$ref"];
  const auto hash = ref.find('#');
  static std::map<std::string, Json> loaded;
  const Json* base = &root;
  if (hash > 0) {
    const std::string file = ref.substr(0, hash);
    if (!loaded.contains(file)) loaded[file] = load_schema(file);
    base = &loaded[file];
  }
  return base->at(Json::json_pointer(ref.substr(hash + 1)));
}

bool has_type(const Json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "null") return v.is_null();
  return false;
}

// Subset of JSON Schema: $ref, type, enum, oneOf, required, properties,
// additionalProperties false, items, minItems, maxItems.
void conforms(const Json& v, const Json& schema_node, const Json& root, const std::string& where,
              std::vector<std::string>& errors) {
  const Json& s = resolve(schema_node, root);
  if (s.contains("oneOf")) {
    for (const Json& alt : s["oneOf"]) {
      std::vector<std::string> e;
      conforms(v, alt, root, where, e);
      if (e.empty()) return;
    }
    errors.push_back(where + ": matches no alternative");
    return;
  }
  if (s.contains("type")) {
    const Json& t = s["type"];
    bool ok = false;
    if (t.is_array()) {
      for (const Json& x : t) ok = ok || has_type(v, x);
    } else {
      ok = has_type(v, t);
    }
    if (!ok) {
      errors.push_back(where + ": wrong type");
      return;
    }
  }
  if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end()) {
    errors.push_back(where + ": value not in enum");
  }
  if (v.is_object()) {
    for (const Json& key : s.value("required", Json::array())) {
      if (!v.contains(key.get<std::string>())) errors.push_back(where + "." + key.get<std::string>() + ": missing");
    }
    const Json props = s.value("properties", Json::object());
    for (const auto& [key, value] : v.items()) {
      if (props.contains(key)) {
        conforms(value, props[key], root, where + "." + key, errors);
      } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
        errors.push_back(where + "." + key + ": not in schema");
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errors.push_back(where + ": too short");
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) errors.push_back(where + ": too long");
    if (s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) conforms(v[i], s["items"], root, fmt::format("{}[{}]", where, i), errors);
    }
  }
}

std::vector<std::string> validate_file(const std::filesystem::path& file, const std::string& schema_name) {
  const Json schema = load_schema(schema_name);
  std::vector<std::string> errors;
  conforms(Json::parse(read_file(file)), schema, schema, file.filename().string(), errors);
  return errors;
}

void collect_keys(const Json& props, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, s] : props.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (s.contains("properties") && s.value("type", "") == "object") {
      collect_keys(s["properties"], path, out);
    } else {
      out.push_back(path);
    }
  }
}

}  // namespace

TEST(Schemas, ConfigSchemaListsEveryKey) {
  const Json schema = load_schema("config.schema.json");
  std::vector<std::string> keys;
  collect_keys(schema["properties"], "", keys);
  EXPECT_EQ(keys, config_keys());
}

TEST(Schemas, WrittenFilesConform) {
  TempDir dir("schemas");
  SceneSpec spec;
  spec.point_count = 60;
  const Scene s = generate_scene(spec);
  write_scene(dir.path(), s);
  write_text(dir / "config.json", config_to_json(RunConfig{}));
  write_init_json(dir / "multi.json", {SimilarityTransform{}, SimilarityTransform{1.1, Mat3::Identity(), Vec3(1, 2, 3)}});
  const SpatialIndex index(s.mesh);
  const RegistrationProblem problem{s.features, s.frames, &index};
  SolverConfig config;
  config.max_outer_iterations = 3;
  const std::vector<SimilarityTransform> starts = {SimilarityTransform{}};
  const MultistartResult ms = multistart_register(starts, problem, NoiseModel{}, config);
  ReportExtras extras;
  extras.tre_mm = evaluate_tre(ms.results[0].transform, s.truth);
  extras.pose_error = evaluate_pose_error(ms.results[0].transform, s.frames, s.truth);
  extras.multistart = &ms;
  write_text(dir / "report.json", report_json(ms.results[0], extras));

  const std::pair<const char*, const char*> files[] = {
      {"cameras.json", "cameras.schema.json"}, {"init.json", "init.schema.json"},
      {"multi.json", "init.schema.json"},      {"ground_truth.json", "ground_truth.schema.json"},
      {"config.json", "config.schema.json"},   {"report.json", "report.schema.json"}};
  for (const auto& [file, schema] : files) {
    const auto errors = validate_file(dir / file, schema);
    EXPECT_TRUE(errors.empty()) << file << ": " << errors.front();
  }
}

TEST(Schemas, CheckerRejectsStrayKeys) {
  TempDir dir("schemas_bad");
  write_file(dir / "c.json", std::string(kCameras).replace(std::string(kCameras).find("\"fx\": 400"), 9, "\"fz\": 400"));
  EXPECT_FALSE(validate_file(dir / "c.json", "cameras.schema.json").empty());
}
