#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "scenecarve/camera.hpp"
#include "scenecarve/pipeline.hpp"
#include "scenecarve/synth_fixtures.hpp"
#include "support.hpp"

using namespace scenecarve;
using namespace scenecarve::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SCENECARVE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Camera overhead_camera() {
  Camera c;
  c.intrinsics = {300, 300, 160, 120};
  c.width = 320;
  c.height = 240;
  c.pose.block<3, 3>(0, 0) = Eigen::AngleAxisd(std::numbers::pi, Vector3::UnitX()).toRotationMatrix();
  c.pose.block<3, 1>(0, 3) = Vector3(0, 0, 3.0);
  return c;
}

// Colored-boxes scene plus one overhead frame whose image is the mesh colors
// rendered through the z-buffer.
fs::path write_scene(const fs::path& dir) {
  fixtures::FixtureSpec spec;
  spec.kind = fixtures::Kind::kColoredBoxes;
  spec.seed = 1;
  fixtures::write_fixture(spec, dir);
  const SceneMesh mesh = read_ply(dir / "scene.ply").mesh;
  const Camera cam = overhead_camera();
  const DepthBuffer db = render_depth(mesh, cam);
  RgbImage img(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const int f = db.face(y, x);
      if (f < 0) continue;
      const Vector3 c = mesh.color(mesh.faces(f, 0));
      for (int k = 0; k < 3; ++k) img.at(x, y)[k] = static_cast<std::uint8_t>(std::lround(c[k] * 255));
    }
  }
  write_png(dir / "frame0.png", img);
  json pose = json::array();
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 4; ++col) pose.push_back(cam.pose(r, col));
  }
  const json frames = json::array({{{"image_path", "frame0.png"},
                                    {"intrinsics", {{"fx", 300}, {"fy", 300}, {"cx", 160}, {"cy", 120}}},
                                    {"pose", pose}}});
  write_json(dir / "frames.json", frames);
  return dir;
}

}  // namespace

TEST(Config, DefaultValues) {
  const PipelineConfig c;
  EXPECT_EQ(c.seg.smoothing, 0.5);
  EXPECT_EQ(c.seg.threshold_k, 500.0);
  EXPECT_EQ(c.seg.min_size, 20);
  EXPECT_EQ(c.mrf.gamma, 0.5);
  EXPECT_EQ(c.mrf.split_penalty, 0.05);
  EXPECT_EQ(c.search.accept.tau_s, 0.7);
  EXPECT_EQ(c.search.accept.tau_a, 0.4);
  EXPECT_EQ(c.search.match.delta, 2.0);
  EXPECT_EQ(c.search.iterations, 10);
  EXPECT_EQ(c.search.scene_samples, 20000);
  EXPECT_EQ(c.align.kappa_continuity, 0.1);
  EXPECT_EQ(c.align.kappa_smoothness, 3.0);
  EXPECT_EQ(c.align.candidates, 30);
  EXPECT_EQ(c.align.radius_fraction, 0.1);
}

TEST(Config, TomlOverrides) {
  PipelineConfig c;
  c.apply_toml("[seg]\nthreshold = 100\nmin_size = 5\n[mrf]\ngamma = 0.25\n[search]\nuse_alignment = false\n"
               "tau_s = 0.6\n[align]\ncandidates = 12\n");
  EXPECT_EQ(c.seg.threshold_k, 100.0);
  EXPECT_EQ(c.seg.min_size, 5);
  EXPECT_EQ(c.mrf.gamma, 0.25);
  EXPECT_FALSE(c.search.accept.use_alignment);
  EXPECT_EQ(c.search.accept.tau_s, 0.6);
  EXPECT_EQ(c.align.candidates, 12);
  EXPECT_EQ(c.seg.smoothing, 0.5);
}

TEST(Config, TomlRejectsUnknownAndMistyped) {
  PipelineConfig c;
  EXPECT_THROW(c.apply_toml("[seg]\nthreshhold = 1\n"), ValidationError);
  EXPECT_THROW(c.apply_toml("[segmentation]\nthreshold = 1\n"), ValidationError);
  EXPECT_THROW(c.apply_toml("[seg]\nmin_size = 2.5\n"), ValidationError);
  EXPECT_THROW(c.apply_toml("[search]\nuse_alignment = 1\n"), ValidationError);
  EXPECT_THROW(c.apply_toml("[seg]\nthreshold = -4\n"), ValidationError);
  EXPECT_THROW(c.apply_toml("[seg\n"), ValidationError);
  EXPECT_THROW(c.apply_toml_file("/nonexistent/config.toml"), ValidationError);
}

TEST(Stages, ParseInPipelineOrder) {
  EXPECT_EQ(parse_stages("mrf,seg"), (std::vector<Stage>{Stage::kSeg, Stage::kMrf}));
  EXPECT_THROW(parse_stages("seg,render"), ValidationError);
  EXPECT_THROW(parse_stages(""), ValidationError);
}

TEST(Pipeline, PrerequisitesAreNamed) {
  const Workspace ws{scenecarve::testing::temp_dir("prereq")};
  try {
    run_mrf(ws, {});
    FAIL() << "expected a prerequisite error";
  } catch (const PrerequisiteError& e) {
    EXPECT_NE(std::string(e.what()).find("'seg'"), std::string::npos);
  }
  EXPECT_THROW(run_seg(ws, {}), PrerequisiteError);
  EXPECT_THROW(current_hierarchy(ws), PrerequisiteError);
  RunOptions opts;
  opts.stages = {Stage::kMrf};
  EXPECT_THROW(run_pipeline(ws, {}, opts), PrerequisiteError);
}

TEST(Pipeline, TwoPlaneManifestCounts) {
  const auto dir = scenecarve::testing::temp_dir("twoplane");
  fixtures::FixtureSpec spec;
  fixtures::write_fixture(spec, dir / "fx");
  const Workspace ws{dir / "work"};
  RunOptions opts;
  opts.mesh = dir / "fx" / "scene.ply";
  opts.stages = parse_stages("ingest,seg,mrf,eval");
  opts.truth = dir / "fx" / "truth.json";
  const json m = run_pipeline(ws, {}, opts);
  EXPECT_EQ(m["counts"]["supervertices"], 2);
  EXPECT_EQ(m["counts"]["regions"], 2);
  EXPECT_LT(m["results"]["eval"]["seg"]["oce_supervertices"].get<double>(), 0.05);
  EXPECT_TRUE(fs::exists(ws.timings()));
}

TEST(Pipeline, ArtifactsAreByteStable) {
  const auto dir = scenecarve::testing::temp_dir("stable");
  write_scene(dir / "fx");
  PipelineConfig config;
  config.seg.threshold_k = 100;
  config.search.scene_samples = 4000;
  RunOptions opts;
  opts.mesh = dir / "fx" / "scene.ply";
  opts.frames = dir / "fx" / "frames.json";
  opts.stages = parse_stages("ingest,seg,mrf,search,project,eval");
  opts.template_regions = {1};
  opts.truth = dir / "fx" / "truth.json";
  std::map<std::string, std::string> first;
  for (int run = 0; run < 2; ++run) {
    const Workspace ws{dir / ("work" + std::to_string(run))};
    run_pipeline(ws, config, opts);
    for (const auto& entry : fs::recursive_directory_iterator(ws.dir)) {
      if (!entry.is_regular_file() || entry.path().filename() == "timings.json") continue;
      const std::string rel = fs::relative(entry.path(), ws.dir).string();
      if (run == 0) {
        first[rel] = slurp(entry.path());
      } else {
        ASSERT_TRUE(first.count(rel)) << rel;
        EXPECT_EQ(first[rel], slurp(entry.path())) << rel;
      }
    }
  }
  EXPECT_TRUE(first.count("manifest.json"));
  EXPECT_TRUE(first.count("search.json"));
  EXPECT_TRUE(first.count("masks/frame_0/contours.json"));
  EXPECT_GT(first.size(), 10u);
}

TEST(Pipeline, ProjectWritesMasksAndContours) {
  const auto dir = scenecarve::testing::temp_dir("project");
  write_scene(dir / "fx");
  const Workspace ws{dir / "work"};
  ingest(ws, dir / "fx" / "scene.ply", dir / "fx" / "frames.json");
  PipelineConfig config;
  config.seg.threshold_k = 100;
  run_seg(ws, config);
  EXPECT_THROW(run_project(ws, config, 0, dir / "masks"), PrerequisiteError);
  run_mrf(ws, config);
  const json doc = run_project(ws, config, 0, dir / "masks");
  ASSERT_FALSE(doc["regions"].empty());
  for (const json& r : doc["regions"]) {
    const std::string stem = "region_" + std::to_string(r["region"].get<int>());
    EXPECT_TRUE(fs::exists(dir / "masks" / (stem + ".png")));
    EXPECT_TRUE(fs::exists(dir / "masks" / (stem + "_aligned.png")));
    EXPECT_EQ(r["contour"].size(), r["aligned"].size());
  }
  EXPECT_THROW(run_project(ws, config, 4, dir / "masks"), NotFoundError);
}

TEST(Pipeline, EvalPredictionMatchesWorkspaceEval) {
  const auto dir = scenecarve::testing::temp_dir("evalpred");
  fixtures::FixtureSpec spec;
  spec.kind = fixtures::Kind::kColoredBoxes;
  fixtures::write_fixture(spec, dir / "fx");
  const Workspace ws{dir / "work"};
  ingest(ws, dir / "fx" / "scene.ply", std::nullopt);
  run_seg(ws, {});
  run_mrf(ws, {});
  const json a = run_eval(ws, dir / "fx" / "truth.json");
  const json b = eval_prediction(ws.regions(), dir / "fx" / "truth.json");
  EXPECT_EQ(a["mrf"], b["partition"]);
}

TEST(Cli, ExitCodes) {
  const auto dir = scenecarve::testing::temp_dir("cli");
  const std::string d = dir.string();
  EXPECT_EQ(run_cli("fixture --kind two-plane --seed 2 --out " + d + "/fx"), 0);
  EXPECT_EQ(run_cli("mrf --work " + d + "/w"), 3);
  EXPECT_EQ(run_cli("ingest --mesh " + d + "/fx/scene.ply --work " + d + "/w"), 0);
  EXPECT_EQ(run_cli("seg --work " + d + "/w --seg-min-size 0"), 2);
  EXPECT_EQ(run_cli("fixture --kind cone --out " + d + "/x"), 2);
  EXPECT_EQ(run_cli("--no-such-flag"), 2);
  std::ofstream(dir / "bad.toml") << "[seg]\nthreshold = \"high\"\n";
  EXPECT_EQ(run_cli("--config " + d + "/bad.toml seg --work " + d + "/w"), 2);
  std::ofstream(dir / "good.toml") << "[seg]\nthreshold = 500\n";
  EXPECT_EQ(run_cli("--config " + d + "/good.toml seg --work " + d + "/w"), 0);
  EXPECT_EQ(run_cli("mrf --work " + d + "/w"), 0);
  EXPECT_EQ(run_cli("eval --pred " + d + "/w/regions.json --gt " + d + "/fx/truth.json"), 0);
  EXPECT_EQ(run_cli("search --template 0 --scene " + d + "/w"), 2);  // a flat template has no volume
  EXPECT_EQ(run_cli("search --template 0,1 --scene " + d + "/w"), 0);
  EXPECT_TRUE(fs::exists(dir / "w" / "search.json"));
}
