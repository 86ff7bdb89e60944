#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scenecarve/camera.hpp"
#include "scenecarve/hierarchy.hpp"
#include "scenecarve/mesh.hpp"
#include "scenecarve/mrf_seg.hpp"

namespace scenecarve {

/// A recorded hierarchy change with enough of the prior state to reverse it.
struct Edit {
  enum class Kind { kMerge, kExtract, kSplit, kAnnotate, kObjectAccept };

  Kind kind = Kind::kMerge;
  std::vector<std::pair<int, int>> previous_regions;             // (supervertex, old region)
  std::map<int, std::optional<std::string>> previous_labels;      // region -> old label
};

const char* to_string(Edit::Kind kind);

/// Screen-space stroke plus the view it was drawn in.
struct Stroke {
  Camera camera;
  std::vector<Eigen::Vector2d> polyline;  // pixels
};

/// Casts a ray per sample along the polyline (1 px spacing) and keeps the
/// nearest vertex of the front-most hit triangle. Consecutive duplicates are
/// dropped and misses skipped. Throws PreconditionError if nothing is hit.
std::vector<int> resolve_stroke(const Stroke& stroke, const SceneMesh& mesh);

/// Mesh, frames, the editable hierarchy, an immutable copy of the
/// graph-based supervertices, the undo log and object templates.
class AnnotationSession {
 public:
  AnnotationSession() = default;
  AnnotationSession(SceneMesh mesh, std::vector<Frame> frames);

  /// PLY mesh plus optional frames manifest. Normals are computed; colors
  /// come from the PLY, else the frames, else mid-gray.
  static AnnotationSession load_scene(const std::filesystem::path& mesh_file,
                                      const std::optional<std::filesystem::path>& frames_manifest,
                                      std::vector<std::string>* warnings = nullptr);

  const SceneMesh& mesh() const { return *mesh_; }
  const std::vector<Frame>& frames() const { return *frames_; }
  const Frame& frame(int id) const;
  const SegmentationHierarchy& hierarchy() const { return hierarchy_; }
  const std::shared_ptr<const SegmentationHierarchy>& cached_supervertices() const {
    return cached_;
  }
  const std::vector<Edit>& undo_log() const { return undo_log_; }
  const std::vector<std::vector<int>>& templates() const { return templates_; }

  /// Installs a graph-based result; it becomes the immutable cache and the
  /// region level starts 1:1. Clears the undo log.
  void set_supervertices(SegmentationHierarchy supervertices);
  /// Installs a hierarchy whose supervertex level matches the cache (e.g.
  /// MRF output or a loaded annotation file). Clears the undo log.
  void set_hierarchy(SegmentationHierarchy hierarchy);

  /// Survivor is the smallest id; it keeps the label of the largest labeled
  /// member. Returns the survivor.
  int merge(std::vector<int> regions);
  /// Dissolves a region into one region per cached supervertex and returns
  /// those supervertices. Nothing is recomputed.
  std::vector<int> extract(int region);
  /// MRF split of one region with the endpoint supervertices forced apart.
  std::vector<int> split(int region, int start_supervertex, int end_supervertex,
                         const mrf::MrfParams& params = {});
  std::vector<int> split(int region, const Stroke& stroke, const mrf::MrfParams& params = {});
  void annotate(int region, const std::string& label);
  /// Merge plus annotate as a single edit (accepting a search candidate).
  int accept_object(std::vector<int> regions, const std::string& label);
  /// Reverses the last edit. Returns false (with a notice) on an empty log.
  bool undo(std::string* notice = nullptr);

  int add_template(std::vector<int> regions);

  const std::vector<mrf::SupervertexStats>& supervertex_stats() const;

 private:
  void require_region(int region) const;
  void record(Edit edit);
  int merge_into(Edit& edit, std::vector<int> regions);

  std::shared_ptr<const SceneMesh> mesh_ = std::make_shared<SceneMesh>();
  std::shared_ptr<const std::vector<Frame>> frames_ = std::make_shared<std::vector<Frame>>();
  SegmentationHierarchy hierarchy_;
  std::shared_ptr<const SegmentationHierarchy> cached_;
  std::vector<Edit> undo_log_;
  std::vector<std::vector<int>> templates_;
  mutable std::shared_ptr<const std::vector<mrf::SupervertexStats>> stats_;
};

}  // namespace scenecarve
