#include "scenecarve/session.hpp"

#include <algorithm>
#include <cmath>

namespace scenecarve {

const char* to_string(Edit::Kind kind) {
  switch (kind) {
    case Edit::Kind::kMerge: return "merge";
    case Edit::Kind::kExtract: return "extract";
    case Edit::Kind::kSplit: return "split";
    case Edit::Kind::kAnnotate: return "annotate";
    case Edit::Kind::kObjectAccept: return "object-accept";
  }
  return "unknown";
}

std::vector<int> resolve_stroke(const Stroke& stroke, const SceneMesh& mesh) {
  stroke.camera.validate("stroke camera");
  if (stroke.polyline.empty()) throw PreconditionError("empty stroke: no sample points");

  std::vector<Eigen::Vector2d> samples{stroke.polyline.front()};
  for (std::size_t i = 1; i < stroke.polyline.size(); ++i) {
    const Eigen::Vector2d a = stroke.polyline[i - 1];
    const Eigen::Vector2d b = stroke.polyline[i];
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a).norm())));
    for (int s = 1; s <= steps; ++s) samples.push_back(a + (b - a) * (double(s) / steps));
  }

  const DepthBuffer buffer = render_depth(mesh, stroke.camera);
  std::vector<int> path;
  for (const Eigen::Vector2d& p : samples) {
    const int x = static_cast<int>(std::floor(p.x()));
    const int y = static_cast<int>(std::floor(p.y()));
    if (x < 0 || y < 0 || x >= buffer.width() || y >= buffer.height()) continue;
    const int f = buffer.face(y, x);
    if (f < 0) continue;
    const Ray ray = pixel_ray(p.x(), p.y(), stroke.camera);
    const Vector3 a = mesh.position(mesh.faces(f, 0));
    const Vector3 b = mesh.position(mesh.faces(f, 1));
    const Vector3 c = mesh.position(mesh.faces(f, 2));
    // The z-buffer picked the face at the pixel center; the exact sample may
    // graze its edge, so accept the plane hit with a loose tolerance.
    const auto hit = intersect_triangle(ray, a, b, c, 0.5);
    if (!hit) continue;
    int best = mesh.faces(f, 0);
    double best_d = (mesh.position(best) - *hit).squaredNorm();
    for (int k = 1; k < 3; ++k) {
      const int v = mesh.faces(f, k);
      const double d = (mesh.position(v) - *hit).squaredNorm();
      if (d < best_d || (d == best_d && v < best)) {
        best = v;
        best_d = d;
      }
    }
    if (path.empty() || path.back() != best) path.push_back(best);
  }
  if (path.empty()) throw PreconditionError("empty stroke: no sample hits the mesh");
  return path;
}

AnnotationSession::AnnotationSession(SceneMesh mesh, std::vector<Frame> frames)
    : mesh_(std::make_shared<const SceneMesh>(std::move(mesh))),
      frames_(std::make_shared<const std::vector<Frame>>(std::move(frames))),
      hierarchy_(SegmentationHierarchy::identity(mesh_->vertex_count())) {
  mesh_->validate();
  cached_ = std::make_shared<const SegmentationHierarchy>(hierarchy_);
}

AnnotationSession AnnotationSession::load_scene(
    const std::filesystem::path& mesh_file,
    const std::optional<std::filesystem::path>& frames_manifest,
    std::vector<std::string>* warnings) {
  PlyData ply = read_ply(mesh_file);
  std::vector<Frame> frames;
  if (frames_manifest) frames = load_frames_manifest(*frames_manifest);
  compute_normals(ply.mesh, warnings);
  if (!ply.has_colors) {
    ply.mesh.colors = Points::Constant(ply.mesh.vertex_count(), 3, 0.5);
    if (!frames.empty()) colors_from_frames(ply.mesh, frames);
  }
  return AnnotationSession(std::move(ply.mesh), std::move(frames));
}

const Frame& AnnotationSession::frame(int id) const {
  for (const Frame& f : *frames_)
    if (f.id == id) return f;
  throw NotFoundError("unknown frame " + std::to_string(id));
}

void AnnotationSession::set_supervertices(SegmentationHierarchy supervertices) {
  if (supervertices.vertex_count() != mesh_->vertex_count()) {
    throw ValidationError("supervertex map does not match the mesh");
  }
  supervertices.validate();
  for (int s = 0; s < supervertices.supervertex_count(); ++s) supervertices.region_of[s] = s;
  supervertices.labels.clear();
  cached_ = std::make_shared<const SegmentationHierarchy>(supervertices);
  hierarchy_ = std::move(supervertices);
  undo_log_.clear();
  stats_.reset();
}

void AnnotationSession::set_hierarchy(SegmentationHierarchy hierarchy) {
  hierarchy.validate();
  if (hierarchy.supervertex_of != cached_->supervertex_of) {
    if (hierarchy.vertex_count() != mesh_->vertex_count()) {
      throw ValidationError("annotation vertex count does not match the mesh");
    }
    // A loaded file may carry its own supervertex level; it becomes the cache.
    SegmentationHierarchy cache = hierarchy;
    for (int s = 0; s < cache.supervertex_count(); ++s) cache.region_of[s] = s;
    cache.labels.clear();
    cached_ = std::make_shared<const SegmentationHierarchy>(std::move(cache));
    stats_.reset();
  }
  hierarchy_ = std::move(hierarchy);
  undo_log_.clear();
}

void AnnotationSession::require_region(int region) const {
  if (!hierarchy_.has_region(region)) throw NotFoundError("unknown region " + std::to_string(region));
}

void AnnotationSession::record(Edit edit) {
  hierarchy_.validate();
  undo_log_.push_back(std::move(edit));
}

int AnnotationSession::merge_into(Edit& edit, std::vector<int> regions) {
  std::sort(regions.begin(), regions.end());
  regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
  for (int r : regions) require_region(r);
  if (regions.size() < 2) throw PreconditionError("merge needs at least two distinct regions");

  const int survivor = regions.front();
  const auto sizes = hierarchy_.supervertex_sizes();
  std::map<int, long long> region_size;
  for (int s = 0; s < hierarchy_.supervertex_count(); ++s) region_size[hierarchy_.region_of[s]] += sizes[s];

  int label_source = -1;
  for (int r : regions) {
    if (!hierarchy_.labels.count(r)) continue;
    if (label_source < 0 || region_size[r] > region_size[label_source]) label_source = r;
  }

  for (int s = 0; s < hierarchy_.supervertex_count(); ++s) {
    const int r = hierarchy_.region_of[s];
    if (r != survivor && std::binary_search(regions.begin(), regions.end(), r)) {
      edit.previous_regions.emplace_back(s, r);
      hierarchy_.region_of[s] = survivor;
    }
  }
  std::optional<std::string> new_label;
  if (label_source >= 0) new_label = hierarchy_.labels.at(label_source);
  for (int r : regions) {
    auto it = hierarchy_.labels.find(r);
    std::optional<std::string> old;
    if (it != hierarchy_.labels.end()) old = it->second;
    if (!edit.previous_labels.count(r)) edit.previous_labels[r] = old;
    if (it != hierarchy_.labels.end()) hierarchy_.labels.erase(it);
  }
  if (new_label) hierarchy_.labels[survivor] = *new_label;
  return survivor;
}

int AnnotationSession::merge(std::vector<int> regions) {
  Edit edit{Edit::Kind::kMerge, {}, {}};
  const int survivor = merge_into(edit, std::move(regions));
  record(std::move(edit));
  return survivor;
}

std::vector<int> AnnotationSession::extract(int region) {
  require_region(region);
  // Members come straight from the cached graph-based supervertices.
  std::vector<int> members;
  for (int s = 0; s < cached_->supervertex_count(); ++s)
    if (hierarchy_.region_of[s] == region) members.push_back(s);

  Edit edit{Edit::Kind::kExtract, {}, {}};
  int next_id = hierarchy_.max_region_id() + 1;
  for (std::size_t i = 1; i < members.size(); ++i) {
    edit.previous_regions.emplace_back(members[i], region);
    hierarchy_.region_of[members[i]] = next_id++;
  }
  if (auto it = hierarchy_.labels.find(region); it != hierarchy_.labels.end()) {
    edit.previous_labels[region] = it->second;
    hierarchy_.labels.erase(it);
  }
  record(std::move(edit));
  return members;
}

std::vector<int> AnnotationSession::split(int region, int start_supervertex, int end_supervertex,
                                          const mrf::MrfParams& params) {
  require_region(region);
  mrf::SplitResult result = mrf::optimize_split(hierarchy_, supervertex_stats(), region,
                                                start_supervertex, end_supervertex, params);
  Edit edit{Edit::Kind::kSplit, {}, {}};
  for (int s = 0; s < hierarchy_.supervertex_count(); ++s) {
    if (result.hierarchy.region_of[s] != hierarchy_.region_of[s]) {
      edit.previous_regions.emplace_back(s, hierarchy_.region_of[s]);
    }
  }
  hierarchy_.region_of = std::move(result.hierarchy.region_of);
  record(std::move(edit));
  return result.regions;
}

std::vector<int> AnnotationSession::split(int region, const Stroke& stroke,
                                          const mrf::MrfParams& params) {
  const std::vector<int> path = resolve_stroke(stroke, *mesh_);
  return split(region, hierarchy_.supervertex_of[path.front()],
               hierarchy_.supervertex_of[path.back()], params);
}

void AnnotationSession::annotate(int region, const std::string& label) {
  require_region(region);
  if (label.empty()) throw ValidationError("label must be non-empty");
  Edit edit{Edit::Kind::kAnnotate, {}, {}};
  auto it = hierarchy_.labels.find(region);
  edit.previous_labels[region] =
      it == hierarchy_.labels.end() ? std::nullopt : std::optional<std::string>(it->second);
  hierarchy_.labels[region] = label;
  record(std::move(edit));
}

int AnnotationSession::accept_object(std::vector<int> regions, const std::string& label) {
  if (label.empty()) throw ValidationError("label must be non-empty");
  std::sort(regions.begin(), regions.end());
  regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
  for (int r : regions) require_region(r);
  if (regions.empty()) throw PreconditionError("object needs at least one region");

  const SegmentationHierarchy before = hierarchy_;
  Edit edit{Edit::Kind::kObjectAccept, {}, {}};
  const int survivor = regions.size() >= 2 ? merge_into(edit, regions) : regions.front();
  if (!edit.previous_labels.count(survivor)) {
    auto it = before.labels.find(survivor);
    edit.previous_labels[survivor] =
        it == before.labels.end() ? std::nullopt : std::optional<std::string>(it->second);
  }
  hierarchy_.labels[survivor] = label;
  record(std::move(edit));
  return survivor;
}

bool AnnotationSession::undo(std::string* notice) {
  if (undo_log_.empty()) {
    if (notice) *notice = "nothing to undo";
    return false;
  }
  const Edit edit = std::move(undo_log_.back());
  undo_log_.pop_back();
  for (const auto& [s, r] : edit.previous_regions) hierarchy_.region_of[s] = r;
  for (const auto& [region, label] : edit.previous_labels) {
    if (label) hierarchy_.labels[region] = *label;
    else hierarchy_.labels.erase(region);
  }
  // Labels the edit created on regions that no longer exist.
  for (auto it = hierarchy_.labels.begin(); it != hierarchy_.labels.end();) {
    it = hierarchy_.has_region(it->first) ? std::next(it) : hierarchy_.labels.erase(it);
  }
  hierarchy_.validate();
  if (notice) *notice = std::string("undid ") + to_string(edit.kind);
  return true;
}

int AnnotationSession::add_template(std::vector<int> regions) {
  std::sort(regions.begin(), regions.end());
  regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
  if (regions.empty()) throw PreconditionError("template needs at least one region");
  for (int r : regions) require_region(r);
  templates_.push_back(std::move(regions));
  return static_cast<int>(templates_.size()) - 1;
}

const std::vector<mrf::SupervertexStats>& AnnotationSession::supervertex_stats() const {
  if (!stats_) {
    stats_ = std::make_shared<const std::vector<mrf::SupervertexStats>>(
        mrf::compute_stats(*mesh_, hierarchy_));
  }
  return *stats_;
}

}  // namespace scenecarve
