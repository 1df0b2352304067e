#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vimlop/error.hpp"
#include "vimlop/mesh_io.hpp"
#include "vimlop/overlay.hpp"
#include "vimlop/registration.hpp"
#include "vimlop/render.hpp"
#include "vimlop/scene_io.hpp"
#include "vimlop/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vimlop;

namespace {

enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kInput = 2,
  kNotConverged = 3,
  kInfeasible = 4,
  kDegenerate = 5,
  kRegistrationFailed = 6,
  kShortfall = 7,
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kDomain: return kUsage;
    case ErrorCode::kIo:
    case ErrorCode::kParse:
    case ErrorCode::kInvalidCovariance:
    case ErrorCode::kTopology:
    case ErrorCode::kEmptyInput: return kInput;
    case ErrorCode::kInvalidInitialization: return kInfeasible;
    case ErrorCode::kDegenerateGeometry: return kDegenerate;
    case ErrorCode::kCountShortfall: return kShortfall;
    default: return kRegistrationFailed;
  }
}

int exit_code_for(Termination t) {
  switch (t) {
    case Termination::kConverged: return kOk;
    case Termination::kMaxIterations: return kNotConverged;
    case Termination::kInfeasibleInitialization: return kInfeasible;
    case Termination::kDegenerateGeometry: return kDegenerate;
    case Termination::kEmptyInliers: return kRegistrationFailed;
  }
  return kRegistrationFailed;
}

struct Logger {
  int verbosity = 1;
  template <class... Args>
  void info(fmt::format_string<Args...> f, Args&&... args) const {
    if (verbosity >= 1) std::cerr << fmt::format(f, std::forward<Args>(args)...) << "\n";
  }
  template <class... Args>
  void debug(fmt::format_string<Args...> f, Args&&... args) const {
    if (verbosity >= 2) std::cerr << fmt::format(f, std::forward<Args>(args)...) << "\n";
  }
};

std::string flag_name(const std::string& key) {
  std::string name = key;
  for (char& c : name) {
    if (c == '.' || c == '_') c = '-';
  }
  return "--" + name;
}

// Flag values are JSON literals when they parse as such and strings otherwise.
nlohmann::ordered_json flag_value(const std::string& text) {
  try {
    return nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::parse_error&) {
    return text;
  }
}

struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> values;  // config key -> flag text
};

void add_config_options(CLI::App& app, ConfigOptions& opts) {
  app.add_option("--config", opts.config_path, "JSON config with noise/solver/scene sections")->check(CLI::ExistingFile);
  for (const std::string& key : config_keys()) {
    app.add_option_function<std::string>(
           flag_name(key), [&opts, key](const std::string& v) { opts.values[key] = v; },
           fmt::format("config {}", key))
        ->group("Config");
  }
}

RunConfig resolve_config(const ConfigOptions& opts) {
  RunConfig config;
  if (!opts.config_path.empty()) config = read_config_json(opts.config_path, config);
  if (!opts.values.empty()) {
    nlohmann::ordered_json patch = nlohmann::ordered_json::object();
    for (const auto& [key, text] : opts.values) {
      nlohmann::ordered_json* node = &patch;
      std::string rest = key;
      for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
        node = &(*node)[rest.substr(0, dot)];
        rest = rest.substr(dot + 1);
      }
      (*node)[rest] = flag_value(text);
    }
    config = parse_config(patch.dump(), config);
  }
  return config;
}

fs::path resolve_out(const std::string& out) {
  if (!out.empty()) return out;
  if (const char* env = std::getenv("VIMLOP_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return "vimlop_out";
}

struct InputPaths {
  std::string scene;
  std::string mesh;
  std::string features;
  std::string contours;
  std::string cameras;
  std::string init;
  std::string ground_truth;
};

void add_input_options(CLI::App& app, InputPaths& in) {
  app.add_option("--scene", in.scene, "Scene directory (mesh.ply, features.csv, contours.csv, cameras.json, ...)");
  app.add_option("--mesh", in.mesh, "Triangle mesh (PLY or OBJ)");
  app.add_option("--features", in.features, "3D features CSV");
  app.add_option("--contours", in.contours, "Video contours CSV");
  app.add_option("--cameras", in.cameras, "Cameras JSON");
  app.add_option("--init", in.init, "Initial candidates JSON");
  app.add_option("--ground-truth", in.ground_truth, "Ground truth JSON (optional; enables TRE)");
}

// An explicitly named file must exist; a scene-directory file is optional.
std::optional<fs::path> pick(const std::string& explicit_path, const std::string& scene, const fs::path& scene_file) {
  if (!explicit_path.empty()) {
    if (!fs::exists(explicit_path)) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", explicit_path));
    return fs::path(explicit_path);
  }
  if (!scene.empty() && fs::exists(scene_file)) return scene_file;
  return std::nullopt;
}

struct LoadedInputs {
  std::shared_ptr<const TriangleMesh> mesh;
  std::vector<Feature3D> features;
  std::vector<CameraFrame> frames;
  std::vector<SimilarityTransform> candidates;
  std::optional<GroundTruth> truth;
};

LoadedInputs load_inputs(const InputPaths& p, const RunConfig& config, bool need_init) {
  if (!p.scene.empty() && !fs::is_directory(p.scene)) {
    throw Error(ErrorCode::kIo, fmt::format("scene directory {} does not exist", p.scene));
  }
  const SceneFiles files = SceneFiles::in(p.scene);
  LoadedInputs in;
  if (p.mesh.empty() && p.scene.empty()) throw Error(ErrorCode::kConfig, "no mesh given (use --scene or --mesh)");
  in.mesh = std::make_shared<const TriangleMesh>(read_mesh(p.mesh.empty() ? files.mesh : fs::path(p.mesh)));
  if (const auto f = pick(p.features, p.scene, files.features)) {
    in.features = read_features_csv(*f, config.noise.sigma3d_default);
  }
  if (const auto f = pick(p.cameras, p.scene, files.cameras)) in.frames = read_cameras_json(*f);
  if (const auto f = pick(p.contours, p.scene, files.contours)) attach_contours(in.frames, read_contours_csv(*f));
  if (need_init) {
    const auto f = pick(p.init, p.scene, files.init);
    in.candidates = f ? read_init_json(*f) : std::vector<SimilarityTransform>{SimilarityTransform::identity()};
  }
  if (const auto f = pick(p.ground_truth, p.scene, files.ground_truth)) in.truth = read_ground_truth_json(*f);
  return in;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& config, const fs::path& out, const Logger& log) {
  const Scene scene = generate_scene(config.scene);
  write_scene(out, scene);
  write_text(out / "config.json", config_to_json(config));
  std::size_t contours = 0;
  for (const CameraFrame& f : scene.frames) contours += f.contours.size();
  log.info("simulate: {} features, {} frames, {} contour points, {} TRE targets -> {}", scene.features.size(),
           scene.frames.size(), contours, scene.truth.targets.size(), out.string());
  return kOk;
}

int cmd_register(const RunConfig& config, const InputPaths& paths, const fs::path& out, bool dump_depth,
                 const Logger& log) {
  const LoadedInputs in = load_inputs(paths, config, true);
  if (in.truth && in.truth->camera_poses.size() != in.frames.size()) {
    throw Error(ErrorCode::kParse, "ground truth camera count does not match cameras.json");
  }
  const SpatialIndex index(in.mesh);
  const RegistrationProblem problem{in.features, in.frames, &index};
  const MultistartResult ms = multistart_register(in.candidates, problem, config.noise, config.solver);

  const int chosen = ms.all_failed ? ms.ranking.front().candidate : ms.best;
  const RegistrationResult& result = ms.results[static_cast<std::size_t>(chosen)];
  ReportExtras extras;
  if (in.truth && !ms.all_failed) {
    extras.tre_mm = evaluate_tre(result.transform, *in.truth);
    if (!in.frames.empty()) extras.pose_error = evaluate_pose_error(result.transform, in.frames, *in.truth);
  }
  extras.multistart = &ms;

  fs::create_directories(out);
  write_text(out / "report.json", report_json(result, extras));
  write_history_csv(out / "history.csv", result.history);
  write_ranking_csv(out / "ranking.csv", ms);
  write_text(out / "config.json", config_to_json(config));
  if (dump_depth) {
    for (const CameraFrame& f : in.frames) {
      DepthBuffer depth;
      compute_visible_contours(*in.mesh, f.view(result.transform), config.solver.visibility_tolerance, &depth);
      write_pgm(depth, out / fmt::format("depth_{}.pgm", f.id));
    }
  }

  if (ms.all_failed) {
    log.info("register: all {} candidates failed; first: {}", ms.ranking.size(), ms.ranking.front().reason);
    return exit_code_for(result.termination);
  }
  log.info("register: candidate {} of {}, {} after {} iterations", chosen, in.candidates.size(),
           to_string(result.termination), result.history.size());
  log.info("  mean 3D residual {:.4f} mm, contour error {:.3f} px (inliers {:.3f} px), inliers 3D {} 2D {}",
           result.metrics.mean_residual_3d, result.metrics.mean_contour_error_all,
           result.metrics.mean_contour_error_inliers, result.metrics.inliers_3d, result.metrics.inliers_2d);
  if (extras.tre_mm) log.info("  TRE {:.4f} mm", *extras.tre_mm);
  return exit_code_for(result.termination);
}

std::vector<SweepOffset> parse_offsets(const std::string& text) {
  if (fs::exists(text)) return read_offsets_csv(text);
  std::vector<SweepOffset> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument(item);
      out.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, fmt::format("--offsets: expected mm:deg[,mm:deg...] or a CSV file, got '{}'", item));
    }
  }
  if (out.empty()) throw Error(ErrorCode::kConfig, "--offsets: no offsets given");
  return out;
}

int cmd_sweep(const RunConfig& config, const InputPaths& paths, const std::string& offsets_text, const fs::path& out,
              const Logger& log) {
  const std::vector<SweepOffset> offsets = parse_offsets(offsets_text);
  LoadedInputs in = load_inputs(paths, config, false);
  if (!in.truth) throw Error(ErrorCode::kIo, "sweep needs ground_truth.json");
  if (in.frames.empty()) throw Error(ErrorCode::kParse, "sweep needs camera frames");
  Scene scene;
  scene.mesh = in.mesh;
  scene.features = std::move(in.features);
  scene.frames = std::move(in.frames);
  scene.truth = std::move(*in.truth);
  const SpatialIndex index(scene.mesh);
  const std::vector<SweepRow> rows = perturbation_sweep(scene, index, offsets, config.noise, config.solver);
  write_sweep_csv(out / "sweep.csv", rows);
  for (const SweepRow& r : rows) {
    log.info("sweep {:6.2f} mm {:6.2f} deg: reprojection {:.3f} px, contour {:.3f} px, TRE {:.3f} mm, {}", r.offset.mm,
             r.offset.deg, r.reprojection_px, r.contour_error_px, r.tre_mm, r.termination);
  }
  return kOk;
}

int cmd_overlay(const RunConfig& config, const InputPaths& paths, const std::string& report, const fs::path& out,
                const Logger& log) {
  const SimilarityTransform t = report.empty() ? SimilarityTransform::identity() : read_report_transform(report);
  const LoadedInputs in = load_inputs(paths, config, false);
  if (in.frames.empty()) throw Error(ErrorCode::kParse, "overlay needs camera frames");
  const std::vector<OverlayStats> stats = write_overlays(*in.mesh, in.frames, t, config.solver.visibility_tolerance, out);
  std::ofstream csv(out / "overlay.csv");
  csv << "frame_id,video_points,model_points,mean_distance_px\n";
  for (const OverlayStats& s : stats) {
    csv << fmt::format("{},{},{},{}\n", s.frame_id, s.video_points, s.model_points, s.mean_distance_px);
    if (s.video_points == 0) log.info("overlay: warning: frame {} has no video contours", s.frame_id);
    log.info("overlay frame {}: {} video / {} model points, mean distance {:.3f} px", s.frame_id, s.video_points,
             s.model_points, s.mean_distance_px);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video-to-mesh similarity registration from 3D features and oriented contours"};
  app.require_subcommand(1);
  app.fallthrough();
  ConfigOptions config_opts;
  add_config_options(app, config_opts);
  std::string out;
  app.add_option("--out", out, "Output directory (default: $VIMLOP_OUTPUT_DIR or ./vimlop_out)");
  Logger log;
  app.add_flag_function("-v,--verbose", [&](std::int64_t n) { log.verbosity = 1 + static_cast<int>(n); }, "More logging");
  app.add_flag_function("-q,--quiet", [&](std::int64_t) { log.verbosity = 0; }, "No logging");

  InputPaths inputs;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic scene");
  CLI::App* reg = app.add_subcommand("register", "Register features and contours to a mesh");
  add_input_options(*reg, inputs);
  bool dump_depth = false;
  reg->add_flag("--dump-depth", dump_depth, "Write per-frame depth buffers at the final pose");
  CLI::App* sweep = app.add_subcommand("sweep", "Initialization-offset sweep on a synthetic scene");
  add_input_options(*sweep, inputs);
  std::string offsets;
  sweep->add_option("--offsets", offsets, "mm:deg[,mm:deg...] or a CSV file of mm,deg rows")->required();
  CLI::App* overlay = app.add_subcommand("overlay", "Draw video and model contours per frame");
  add_input_options(*overlay, inputs);
  std::string report;
  overlay->add_option("--report", report, "report.json whose transform places the model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const RunConfig config = resolve_config(config_opts);
    const fs::path out_dir = resolve_out(out);
    if (*simulate) return cmd_simulate(config, out_dir, log);
    if (*reg) return cmd_register(config, inputs, out_dir, dump_depth, log);
    if (*sweep) return cmd_sweep(config, inputs, offsets, out_dir, log);
    if (*overlay) return cmd_overlay(config, inputs, report, out_dir, log);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kUsage;
}
