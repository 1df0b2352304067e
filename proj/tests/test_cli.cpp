#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "test_util.hpp"
#include "vimlop/scene_io.hpp"

using namespace vimlop;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string log;
};

CliRun run_cli(const std::string& args, const TempDir& dir) {
  const fs::path log = dir / "stderr.txt";
  const std::string cmd = std::string(VIMLOP_CLI) + " " + args + " 2> " + log.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.log = ss.str();
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

double report_tre(const fs::path& report) {
  const std::string text = read_file(report);
  const auto at = text.find("\"tre_mm\": ");
  if (at == std::string::npos) return -1.0;
  return std::stod(text.substr(at + 10));
}

}  // namespace

TEST(Cli, MissingMeshFailsWithoutOutputs) {
  TempDir dir("cli_missing");
  const CliRun r = run_cli(fmt::format("register --mesh {} --out {}", (dir / "nope.ply").string(), (dir / "out").string()), dir);
  EXPECT_EQ(r.code, 2) << r.log;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, UnknownConfigKeyIsUsageError) {
  TempDir dir("cli_config");
  std::ofstream(dir / "c.json") << R"({"noise": {"kapa": 3}})";
  const CliRun r = run_cli(fmt::format("--config {} --out {} simulate", (dir / "c.json").string(), (dir / "s").string()), dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.log.find("kapa"), std::string::npos) << r.log;
  EXPECT_FALSE(fs::exists(dir / "s"));
  EXPECT_EQ(run_cli("simulate --no-such-flag 1", dir).code, 1);
}

TEST(Cli, SimulateThenRegisterIsAccurateAndReproducible) {
  TempDir dir("cli_register");
  const std::string scene = (dir / "scene").string();
  ASSERT_EQ(run_cli(fmt::format("--out {} simulate", scene), dir).code, 0);
  EXPECT_EQ(read_features_csv(fs::path(scene) / "features.csv", Mat3::Identity()).size(), 900u);
  const std::string first = read_file(fs::path(scene) / "features.csv");
  ASSERT_EQ(run_cli(fmt::format("--out {} simulate", (dir / "scene2").string()), dir).code, 0);
  EXPECT_EQ(read_file(dir / "scene2" / "features.csv"), first);
  EXPECT_EQ(read_file(dir / "scene2" / "contours.csv"), read_file(fs::path(scene) / "contours.csv"));

  const CliRun a = run_cli(fmt::format("--out {} register --scene {}", (dir / "a").string(), scene), dir);
  ASSERT_EQ(a.code, 0) << a.log;
  const double tre = report_tre(dir / "a" / "report.json");
  EXPECT_GE(tre, 0.0);
  EXPECT_LE(tre, 0.5);
  for (const char* f : {"report.json", "history.csv", "ranking.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  }
  ASSERT_EQ(run_cli(fmt::format("--out {} register --scene {}", (dir / "b").string(), scene), dir).code, 0);
  for (const char* f : {"report.json", "history.csv", "ranking.csv"}) {
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  }
}

TEST(Cli, EnvironmentSetsDefaultOutput) {
  TempDir dir("cli_env");
  const std::string cmd = fmt::format("VIMLOP_OUTPUT_DIR={} {} -q --scene-point-count 50 simulate",
                                      (dir / "env").string(), VIMLOP_CLI);
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "env" / "features.csv"));
}

TEST(Cli, MultipleCandidatesAreRanked) {
  TempDir dir("cli_ranking");
  const std::string scene = (dir / "scene").string();
  ASSERT_EQ(run_cli(fmt::format("--out {} --scene-point-count 300 simulate", scene), dir).code, 0);
  std::ofstream(dir / "init.json") << R"({"candidates": [
    {"translation": [0, 0, 0], "quaternion": [1, 0, 0, 0]},
    {"translation": [40, 0, 0], "quaternion": [1, 0, 0, 0]}]})";
  const CliRun r = run_cli(fmt::format("--out {} register --scene {} --init {}", (dir / "out").string(), scene,
                                    (dir / "init.json").string()),
                        dir);
  EXPECT_EQ(r.code, 0) << r.log;
  const auto rows = read_csv(dir / "out" / "ranking.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][1], "0");
  EXPECT_EQ(rows[0][4], "1");
  EXPECT_EQ(rows[1][1], "1");
  EXPECT_EQ(rows[1][3], "1");
  EXPECT_EQ(rows[1][4], "0");
}

TEST(Cli, SweepWritesOneRowPerOffset) {
  TempDir dir("cli_sweep");
  const std::string scene = (dir / "scene").string();
  ASSERT_EQ(run_cli(fmt::format("--out {} --scene-point-count 300 simulate", scene), dir).code, 0);
  std::ofstream(dir / "offsets.csv") << "mm,deg\n0,0\n1,2\n2,4\n3,6\n4,8\n5,10\n6,12\n7,14\n8,16\n9,18\n";
  const std::string args = fmt::format("sweep --scene {} --offsets {}", scene, (dir / "offsets.csv").string());
  ASSERT_EQ(run_cli(fmt::format("--out {} {}", (dir / "a").string(), args), dir).code, 0);
  const auto rows = read_csv(dir / "a" / "sweep.csv");
  ASSERT_EQ(rows.size(), 10u);
  // Converged rows settle on neighbouring fixed points of the alternation whose
  // contour errors differ by a few thousandths of a pixel.
  const double zero = std::stod(rows[0][3]);
  for (const auto& row : rows) EXPECT_LE(zero, std::stod(row[3]) * (1.0 + 1e-3)) << row[0];
  EXPECT_GT(std::stod(rows[9][3]), 2.0 * zero);
  ASSERT_EQ(run_cli(fmt::format("--out {} {}", (dir / "b").string(), args), dir).code, 0);
  EXPECT_EQ(read_file(dir / "a" / "sweep.csv"), read_file(dir / "b" / "sweep.csv"));
}

TEST(Cli, OverlayDistances) {
  TempDir dir("cli_overlay");
  const std::string scene = (dir / "scene").string();
  // Exact contours and cameras so a correct registration projects onto them.
  ASSERT_EQ(run_cli(fmt::format("--out {} --scene-point-count 300 --scene-contour-covariance 0 --scene-contour-kappa 0 "
                                "--scene-camera-noise-mm 0 --scene-camera-noise-deg 0 --scene-noise-parallel 0 "
                                "--scene-noise-orthogonal 0 --scene-misalign-min-mm 4 --scene-misalign-max-mm 5 simulate",
                                scene),
                    dir)
                .code,
            0);
  ASSERT_EQ(run_cli(fmt::format("--out {} register --scene {}", (dir / "reg").string(), scene), dir).code, 0);
  const CliRun good = run_cli(fmt::format("--out {} overlay --scene {} --report {}", (dir / "good").string(), scene,
                                       (dir / "reg" / "report.json").string()),
                           dir);
  ASSERT_EQ(good.code, 0) << good.log;
  // Identity leaves the model at the misaligned starting pose.
  ASSERT_EQ(run_cli(fmt::format("--out {} overlay --scene {}", (dir / "bad").string(), scene), dir).code, 0);
  const auto good_rows = read_csv(dir / "good" / "overlay.csv");
  const auto bad_rows = read_csv(dir / "bad" / "overlay.csv");
  ASSERT_EQ(good_rows.size(), 6u);
  ASSERT_EQ(bad_rows.size(), 6u);
  double good_sum = 0.0;
  double bad_sum = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    good_sum += std::stod(good_rows[i][3]);
    bad_sum += std::stod(bad_rows[i][3]);
    EXPECT_TRUE(fs::exists(dir / "good" / fmt::format("frame_{}.png", good_rows[i][0])));
  }
  EXPECT_LT(good_sum / 6.0, 2.0);
  EXPECT_GT(bad_sum / 6.0, 10.0);
}

TEST(Cli, OverlayWarnsOnEmptyContourFrame) {
  TempDir dir("cli_overlay_empty");
  const std::string scene = (dir / "scene").string();
  ASSERT_EQ(run_cli(fmt::format("--out {} --scene-point-count 50 simulate", scene), dir).code, 0);
  std::ofstream(dir / "contours.csv") << "frame_id,u,v,nu,nv\n1,100,100,1,0\n";
  const CliRun r = run_cli(fmt::format("--out {} overlay --scene {} --contours {}", (dir / "out").string(), scene,
                                    (dir / "contours.csv").string()),
                        dir);
  EXPECT_EQ(r.code, 0) << r.log;
  EXPECT_NE(r.log.find("frame 0 has no video contours"), std::string::npos) << r.log;
  EXPECT_TRUE(fs::exists(dir / "out" / "frame_0.png"));
}
