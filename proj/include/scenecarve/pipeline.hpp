#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenecarve/geom_seg.hpp"
#include "scenecarve/mrf_seg.hpp"
#include "scenecarve/proj2d.hpp"
#include "scenecarve/session.hpp"
#include "scenecarve/shape_search.hpp"

namespace scenecarve::pipeline {

/// Every tunable of the batch pipeline.
struct PipelineConfig {
  geom::SegParams seg;
  mrf::MrfParams mrf;
  search::SearchParams search;
  proj2d::AlignParams align;
  proj2d::CannyParams canny;

  void validate() const;
  nlohmann::json to_json() const;

  /// Overrides fields from a TOML document with sections seg, mrf, search,
  /// align and canny. Unknown keys and mistyped values are ValidationErrors.
  void apply_toml(const std::string& text, const std::string& source = "<config>");
  void apply_toml_file(const std::filesystem::path& path);
};

/// Artifact locations inside a work directory.
struct Workspace {
  std::filesystem::path dir;

  std::filesystem::path mesh() const { return dir / "scene.ply"; }
  std::filesystem::path frames() const { return dir / "frames.json"; }
  std::filesystem::path supervertices() const { return dir / "supervertices.json"; }
  std::filesystem::path regions() const { return dir / "regions.json"; }
  std::filesystem::path mrf_report() const { return dir / "mrf.json"; }
  /// Hierarchy saved by an annotation session; preferred over regions.json.
  std::filesystem::path annotations() const { return dir / "annotations.json"; }
  std::filesystem::path search_result() const { return dir / "search.json"; }
  std::filesystem::path eval_report() const { return dir / "eval.json"; }
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path timings() const { return dir / "timings.json"; }
};

/// Writes text with a trailing newline; JSON artifacts use 2-space indent.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Copies the mesh (with computed colors) and the frames manifest into the
/// workspace. Returns vertex and face counts.
nlohmann::json ingest(const Workspace& ws, const std::filesystem::path& mesh_file,
                      const std::optional<std::filesystem::path>& frames_manifest,
                      std::vector<std::string>* warnings = nullptr);

/// Loads the ingested mesh and frames; PrerequisiteError when not ingested.
AnnotationSession load_workspace_scene(const Workspace& ws);

nlohmann::json run_seg(const Workspace& ws, const PipelineConfig& config);
nlohmann::json run_mrf(const Workspace& ws, const PipelineConfig& config);

/// Current region hierarchy: annotations.json, else regions.json.
SegmentationHierarchy current_hierarchy(const Workspace& ws);

/// Candidate list [{regions, C, E, T}] as written to search.json.
nlohmann::json candidates_json(const std::vector<search::Candidate>& candidates);

nlohmann::json search_candidates(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy,
                                 const std::vector<int>& template_regions, const PipelineConfig& config);
nlohmann::json run_search(const Workspace& ws, const PipelineConfig& config, const std::vector<int>& template_regions);

/// Projected and aligned contours of every region visible in one frame.
/// With `mask_dir`, writes region_<id>.png and region_<id>_aligned.png there.
nlohmann::json frame_masks(const AnnotationSession& session, const SegmentationHierarchy& hierarchy, int frame_id,
                           const PipelineConfig& config, const std::optional<std::filesystem::path>& mask_dir = {},
                           const Mask* precomputed_edges = nullptr);
nlohmann::json run_project(const Workspace& ws, const PipelineConfig& config, int frame_id,
                           const std::filesystem::path& out_dir, const Mask* precomputed_edges = nullptr);

/// Aligns one projected mask to the edges of an image under a cue setting.
/// Scores against `truth` when given.
nlohmann::json run_align2d(const RgbImage& image, const Mask& projected, const std::optional<Mask>& truth,
                           proj2d::AlignMode mode, const PipelineConfig& config,
                           const std::optional<std::filesystem::path>& out_dir, const Mask* precomputed_edges = nullptr);

/// OCE of the workspace partitions against a fixture truth document, plus
/// detection scores when search.json and placements exist.
nlohmann::json run_eval(const Workspace& ws, const std::filesystem::path& truth_file);
/// Scores one saved hierarchy (and optionally a candidate list) against a
/// truth document.
nlohmann::json eval_prediction(const std::filesystem::path& prediction, const std::filesystem::path& truth_file,
                               const std::optional<std::filesystem::path>& search_file = {});

enum class Stage { kIngest, kSeg, kMrf, kSearch, kProject, kEval };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& name);
/// Comma-separated stage list, returned in pipeline order.
std::vector<Stage> parse_stages(const std::string& list);

struct RunOptions {
  std::optional<std::filesystem::path> mesh;    // required when ingest runs
  std::optional<std::filesystem::path> frames;
  std::vector<Stage> stages;
  std::vector<int> template_regions;            // search
  int frame = 0;                                // project
  std::optional<std::filesystem::path> truth;   // eval
};

/// Runs the stages in order. manifest.json holds the configuration, stages
/// and counts and is byte-stable; wall-clock times go to timings.json.
nlohmann::json run_pipeline(const Workspace& ws, const PipelineConfig& config, const RunOptions& options);

}  // namespace scenecarve::pipeline
