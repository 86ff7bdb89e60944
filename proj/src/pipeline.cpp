#include "scenecarve/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "scenecarve/eval_metrics.hpp"

namespace scenecarve::pipeline {

using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Binds a TOML key to a field; `set` throws on a type mismatch.
struct Field {
  const char* key;
  std::function<void(const toml::node&, const std::string&)> set;
};

template <typename T>
Field bind(const char* key, T& target) {
  return {key, [&target](const toml::node& node, const std::string& where) {
            if constexpr (std::is_same_v<T, bool>) {
              if (auto v = node.value_exact<bool>()) {
                target = *v;
                return;
              }
            } else if constexpr (std::is_integral_v<T>) {
              if (auto v = node.value_exact<std::int64_t>()) {
                target = static_cast<T>(*v);
                return;
              }
            } else {
              if (auto v = node.value<double>(); v && !node.is_boolean()) {
                target = *v;
                return;
              }
            }
            throw ValidationError(where + " has the wrong type");
          }};
}

Json transform_json(const Matrix4& m) {
  Json t = Json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) t.push_back(m(r, c));
  }
  return t;
}

Json contour_json(const proj2d::Contour& c) {
  Json out = Json::array();
  for (const proj2d::Pixel& p : c) out.push_back({p.x, p.y});
  return out;
}

std::vector<int> objects_from_runs(const Json& runs) {
  std::vector<int> out;
  for (const Json& r : runs) out.insert(out.end(), r.at(1).get<std::size_t>(), r.at(0).get<int>());
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  seg.validate();
  mrf.validate();
  const auto& s = search;
  if (s.scene_samples < 0) throw ValidationError("search.samples must be non-negative");
  if (s.template_points < 2 || s.min_points < 2 || s.max_points < s.min_points) {
    throw ValidationError("search point counts must satisfy 2 <= min_points <= max_points");
  }
  if (s.iterations < 0) throw ValidationError("search.iterations must be non-negative");
  if (!(s.accept.tau_s > 0) || !(s.accept.tau_a > 0)) throw ValidationError("search thresholds must be positive");
  if (!(s.match.delta > 0)) throw ValidationError("search.delta must be positive");
  if (!(s.match.dummy_cost >= 0)) throw ValidationError("search.dummy_cost must be non-negative");
  if (s.match.ransac_iterations < 1) throw ValidationError("search.ransac_iterations must be positive");
  if (!(s.match.inlier_fraction > 0)) throw ValidationError("search.inlier_fraction must be positive");
  if (align.candidates < 1) throw ValidationError("align.candidates must be positive");
  if (!(align.radius_fraction > 0)) throw ValidationError("align.radius_fraction must be positive");
  if (align.kappa_continuity < 0 || align.kappa_smoothness < 0) throw ValidationError("align weights must be non-negative");
  if (!(canny.sigma > 0)) throw ValidationError("canny.sigma must be positive");
  if (!(canny.high_percentile >= 0 && canny.high_percentile <= 1)) {
    throw ValidationError("canny.high_percentile must lie in [0, 1]");
  }
  if (!(canny.low_ratio >= 0 && canny.low_ratio <= 1)) throw ValidationError("canny.low_ratio must lie in [0, 1]");
}

Json PipelineConfig::to_json() const {
  Json j;
  j["seg"] = {{"smoothing", seg.smoothing}, {"threshold", seg.threshold_k}, {"min_size", seg.min_size}};
  j["mrf"] = {{"gamma", mrf.gamma},
              {"split_gamma", mrf.split_penalty},
              {"max_sweeps", mrf.max_sweeps},
              {"covariance_epsilon", mrf.covariance_epsilon}};
  j["search"] = {{"samples", search.scene_samples},
                 {"sample_seed", search.sample_seed},
                 {"template_points", search.template_points},
                 {"min_points", search.min_points},
                 {"max_points", search.max_points},
                 {"iterations", search.iterations},
                 {"tau_s", search.accept.tau_s},
                 {"tau_a", search.accept.tau_a},
                 {"use_alignment", search.accept.use_alignment},
                 {"delta", search.match.delta},
                 {"dummy_cost", search.match.dummy_cost},
                 {"ransac_iterations", search.match.ransac_iterations},
                 {"inlier_fraction", search.match.inlier_fraction},
                 {"seed", search.match.seed}};
  j["align"] = {{"kappa_continuity", align.kappa_continuity},
                {"kappa_smoothness", align.kappa_smoothness},
                {"candidates", align.candidates},
                {"radius_fraction", align.radius_fraction}};
  j["canny"] = {{"sigma", canny.sigma}, {"high_percentile", canny.high_percentile}, {"low_ratio", canny.low_ratio}};
  return j;
}

void PipelineConfig::apply_toml(const std::string& text, const std::string& source) {
  toml::table doc;
  try {
    doc = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ValidationError(msg.str());
  }
  const std::map<std::string, std::vector<Field>> sections = {
      {"seg", {bind("smoothing", seg.smoothing), bind("threshold", seg.threshold_k), bind("min_size", seg.min_size)}},
      {"mrf",
       {bind("gamma", mrf.gamma), bind("split_gamma", mrf.split_penalty), bind("max_sweeps", mrf.max_sweeps),
        bind("covariance_epsilon", mrf.covariance_epsilon)}},
      {"search",
       {bind("samples", search.scene_samples), bind("sample_seed", search.sample_seed),
        bind("template_points", search.template_points), bind("min_points", search.min_points),
        bind("max_points", search.max_points), bind("iterations", search.iterations),
        bind("tau_s", search.accept.tau_s), bind("tau_a", search.accept.tau_a),
        bind("use_alignment", search.accept.use_alignment), bind("delta", search.match.delta),
        bind("dummy_cost", search.match.dummy_cost), bind("ransac_iterations", search.match.ransac_iterations),
        bind("inlier_fraction", search.match.inlier_fraction), bind("seed", search.match.seed)}},
      {"align",
       {bind("kappa_continuity", align.kappa_continuity), bind("kappa_smoothness", align.kappa_smoothness),
        bind("candidates", align.candidates), bind("radius_fraction", align.radius_fraction)}},
      {"canny",
       {bind("sigma", canny.sigma), bind("high_percentile", canny.high_percentile),
        bind("low_ratio", canny.low_ratio)}},
  };
  for (const auto& [name, node] : doc) {
    const std::string section(name.str());
    auto it = sections.find(section);
    if (it == sections.end()) throw ValidationError(source + ": unknown section [" + section + "]");
    const toml::table* table = node.as_table();
    if (!table) throw ValidationError(source + ": [" + section + "] must be a table");
    for (const auto& [key, value] : *table) {
      const std::string k(key.str());
      const std::string where = source + ": " + section + "." + k;
      bool found = false;
      for (const Field& f : it->second) {
        if (k == f.key) {
          f.set(value, where);
          found = true;
        }
      }
      if (!found) throw ValidationError(where + " is not a known setting");
    }
  }
  validate();
}

void PipelineConfig::apply_toml_file(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config file " + path.string() + " does not exist");
  apply_toml(read_text(path), path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw ValidationError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2)); }

Json ingest(const Workspace& ws, const fs::path& mesh_file, const std::optional<fs::path>& frames_manifest,
            std::vector<std::string>* warnings) {
  fs::create_directories(ws.dir);
  AnnotationSession session = AnnotationSession::load_scene(mesh_file, frames_manifest, warnings);
  write_ply(ws.mesh(), session.mesh());
  fs::remove(ws.frames());
  if (frames_manifest) {
    // Image paths are made absolute so the copy resolves from the workspace.
    Json frames = Json::parse(read_text(*frames_manifest));
    const fs::path base = fs::absolute(*frames_manifest).parent_path();
    for (Json& f : frames) {
      if (f.contains("image_path")) {
        fs::path p = f["image_path"].get<std::string>();
        if (p.is_relative()) p = base / p;
        f["image_path"] = p.lexically_normal().string();
      }
    }
    write_json(ws.frames(), frames);
  }
  return {{"vertices", session.mesh().vertex_count()},
          {"faces", session.mesh().face_count()},
          {"frames", session.frames().size()}};
}

AnnotationSession load_workspace_scene(const Workspace& ws) {
  if (!fs::exists(ws.mesh())) {
    throw PrerequisiteError("stage 'ingest' has not run: " + ws.mesh().string() + " is missing");
  }
  std::optional<fs::path> frames;
  if (fs::exists(ws.frames())) frames = ws.frames();
  return AnnotationSession::load_scene(ws.mesh(), frames);
}

Json run_seg(const Workspace& ws, const PipelineConfig& config) {
  config.seg.validate();
  const AnnotationSession session = load_workspace_scene(ws);
  const SegmentationHierarchy h = geom::segment_graph(session.mesh(), config.seg);
  save_annotations(ws.supervertices(), h);
  return {{"supervertices", h.supervertex_count()}};
}

Json run_mrf(const Workspace& ws, const PipelineConfig& config) {
  config.mrf.validate();
  if (!fs::exists(ws.supervertices())) {
    throw PrerequisiteError("stage 'seg' has not run: " + ws.supervertices().string() + " is missing");
  }
  const AnnotationSession session = load_workspace_scene(ws);
  const SegmentationHierarchy sv = load_annotations(ws.supervertices());
  if (sv.vertex_count() != session.mesh().vertex_count()) {
    throw ValidationError("supervertices.json does not match the ingested mesh");
  }
  const auto stats = mrf::compute_stats(session.mesh(), sv);
  std::vector<double> energies;
  SegmentationHierarchy regions = mrf::optimize(sv, stats, config.mrf, &energies);
  save_annotations(ws.regions(), regions);
  write_json(ws.mrf_report(), {{"energies", energies}, {"sweeps", energies.size()}});
  return {{"supervertices", sv.supervertex_count()}, {"regions", regions.regions().size()}};
}

SegmentationHierarchy current_hierarchy(const Workspace& ws) {
  if (fs::exists(ws.annotations())) return load_annotations(ws.annotations());
  if (fs::exists(ws.regions())) return load_annotations(ws.regions());
  throw PrerequisiteError("stage 'mrf' has not run: " + ws.regions().string() + " is missing");
}

Json candidates_json(const std::vector<search::Candidate>& candidates) {
  Json out = Json::array();
  for (const search::Candidate& c : candidates) {
    out.push_back({{"regions", c.regions},
                   {"C", c.evaluation.cost},
                   {"E", c.evaluation.alignment_error},
                   {"T", transform_json(c.evaluation.transform)}});
  }
  return out;
}

Json search_candidates(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy,
                       const std::vector<int>& template_regions, const PipelineConfig& config) {
  config.validate();
  search::ObjectSearch engine(mesh, hierarchy, config.search);
  engine.set_template(template_regions);
  return candidates_json(engine.search());
}

Json run_search(const Workspace& ws, const PipelineConfig& config, const std::vector<int>& template_regions) {
  const AnnotationSession session = load_workspace_scene(ws);
  const SegmentationHierarchy h = current_hierarchy(ws);
  if (h.vertex_count() != session.mesh().vertex_count()) {
    throw ValidationError("region hierarchy does not match the ingested mesh");
  }
  Json candidates = search_candidates(session.mesh(), h, template_regions, config);
  write_json(ws.search_result(), candidates);
  return candidates;
}

Json frame_masks(const AnnotationSession& session, const SegmentationHierarchy& hierarchy, int frame_id,
                 const PipelineConfig& config, const std::optional<fs::path>& mask_dir, const Mask* precomputed_edges) {
  const Frame& frame = session.frame(frame_id);
  if (frame.image.empty() && !precomputed_edges) {
    throw PreconditionError("frame " + std::to_string(frame_id) + " has no image to detect edges in");
  }
  const DepthBuffer depth = render_depth(session.mesh(), frame.camera);
  proj2d::EdgeDetector detector(config.canny);
  const proj2d::EdgeMap edges = detector.detect(frame.image, precomputed_edges);
  if (mask_dir) fs::create_directories(*mask_dir);

  Json regions = Json::array();
  for (int r : hierarchy.regions()) {
    const proj2d::RegionMask rm = proj2d::project_region(depth, session.mesh(), hierarchy, r, frame_id);
    if (rm.empty()) continue;
    Json entry = {{"region", r}, {"pixels", static_cast<long long>((rm.mask != 0).count())},
                  {"contour", contour_json(rm.contour)}};
    proj2d::Contour aligned = rm.contour;
    bool no_edges = false;
    if (rm.contour.size() >= 3) {
      const proj2d::AlignResult a = proj2d::align_contour(rm.contour, edges, config.align);
      aligned = a.mapped;
      no_edges = a.no_edges;
    }
    entry["aligned"] = contour_json(aligned);
    entry["no_edges"] = no_edges;
    if (mask_dir) {
      const std::string stem = "region_" + std::to_string(r);
      write_mask_png(*mask_dir / (stem + ".png"), rm.mask);
      write_mask_png(*mask_dir / (stem + "_aligned.png"),
                     proj2d::contour_to_mask(aligned, frame.camera.width, frame.camera.height));
    }
    regions.push_back(std::move(entry));
  }
  return {{"frame", frame_id}, {"width", frame.camera.width}, {"height", frame.camera.height}, {"regions", regions}};
}

Json run_project(const Workspace& ws, const PipelineConfig& config, int frame_id, const fs::path& out_dir,
                 const Mask* precomputed_edges) {
  config.validate();
  const AnnotationSession session = load_workspace_scene(ws);
  if (session.frames().empty()) {
    throw PrerequisiteError("stage 'ingest' was run without a frames manifest; nothing to project into");
  }
  const SegmentationHierarchy h = current_hierarchy(ws);
  Json doc = frame_masks(session, h, frame_id, config, out_dir, precomputed_edges);
  write_json(out_dir / "contours.json", doc);
  return doc;
}

Json run_align2d(const RgbImage& image, const Mask& projected, const std::optional<Mask>& truth,
                 proj2d::AlignMode mode, const PipelineConfig& config, const std::optional<fs::path>& out_dir,
                 const Mask* precomputed_edges) {
  config.validate();
  if (!precomputed_edges && (image.width != projected.cols() || image.height != projected.rows())) {
    throw ValidationError("image and mask sizes differ");
  }
  proj2d::EdgeDetector detector(config.canny);
  const proj2d::EdgeMap edges = detector.detect(image, precomputed_edges);
  const Mask reference = truth ? *truth : projected;
  const proj2d::AblationResult r = proj2d::ablate_alignment(projected, edges, reference, mode, config.align);
  Json doc = {{"mode", proj2d::to_string(mode)}, {"contour", contour_json(r.contour)}};
  if (truth) doc["oce"] = r.oce;
  if (out_dir) {
    write_mask_png(*out_dir / "aligned.png", r.mask);
    write_json(*out_dir / "alignment.json", doc);
  }
  return doc;
}

namespace {

struct Truth {
  Json doc;
  std::vector<int> objects;
};

Truth load_truth(const fs::path& truth_file) {
  Truth t{Json::parse(read_text(truth_file)), {}};
  if (!t.doc.contains("vertex_object_runs")) throw ValidationError(truth_file.string() + " has no vertex_object_runs");
  t.objects = objects_from_runs(t.doc["vertex_object_runs"]);
  return t;
}

Json score_partition(const SegmentationHierarchy& h, const std::vector<int>& objects, const std::string& what) {
  if (h.vertex_count() != static_cast<int>(objects.size())) {
    throw ValidationError(what + " does not cover the truth vertices");
  }
  std::vector<int> sv(objects.size()), rg(objects.size());
  for (int v = 0; v < h.vertex_count(); ++v) {
    sv[v] = h.supervertex_of[v];
    rg[v] = h.region_of_vertex(v);
  }
  return {{"supervertices", h.supervertex_count()},
          {"regions", h.regions().size()},
          {"oce_supervertices", eval::oce(sv, objects)},
          {"oce_regions", eval::oce(rg, objects)}};
}

// Copies 1..n of the template are the objects a search should find.
std::optional<Json> score_search(const Truth& truth, const SegmentationHierarchy& h, const Json& candidates) {
  if (!truth.doc.contains("placements") || truth.doc["placements"].size() < 2) return std::nullopt;
  const auto names = truth.doc["objects"].get<std::vector<std::string>>();
  std::vector<std::vector<int>> truths;
  for (std::size_t p = 1; p < truth.doc["placements"].size(); ++p) {
    const std::string name = "copy" + std::to_string(truth.doc["placements"][p]["copy"].get<int>());
    std::vector<int> verts;
    for (std::size_t o = 0; o < names.size(); ++o) {
      if (names[o] != name) continue;
      for (std::size_t v = 0; v < truth.objects.size(); ++v) {
        if (truth.objects[v] == static_cast<int>(o)) verts.push_back(static_cast<int>(v));
      }
    }
    truths.push_back(std::move(verts));
  }
  std::vector<std::vector<int>> found;
  for (const Json& c : candidates) found.push_back(h.vertices_of(c.at("regions").get<std::vector<int>>()));
  const eval::DetectionScores s = eval::detection_prf(found, truths);
  return Json{{"candidates", found.size()},
              {"true_positives", s.true_positives},
              {"precision", s.precision},
              {"recall", s.recall},
              {"f_measure", s.f_measure}};
}

}  // namespace

Json run_eval(const Workspace& ws, const fs::path& truth_file) {
  const Truth truth = load_truth(truth_file);
  Json report;
  auto score = [&](const char* name, const fs::path& file) {
    if (fs::exists(file)) report[name] = score_partition(load_annotations(file), truth.objects, file.string());
  };
  score("seg", ws.supervertices());
  score("mrf", ws.regions());
  score("annotations", ws.annotations());
  if (report.empty()) {
    throw PrerequisiteError("stage 'seg' has not run: nothing to evaluate in " + ws.dir.string());
  }
  if (fs::exists(ws.search_result())) {
    if (auto s = score_search(truth, current_hierarchy(ws), Json::parse(read_text(ws.search_result())))) {
      report["search"] = *s;
    }
  }
  write_json(ws.eval_report(), report);
  return report;
}

Json eval_prediction(const fs::path& prediction, const fs::path& truth_file,
                     const std::optional<fs::path>& search_file) {
  const Truth truth = load_truth(truth_file);
  const SegmentationHierarchy h = load_annotations(prediction);
  Json report = {{"partition", score_partition(h, truth.objects, prediction.string())}};
  if (search_file) {
    if (auto s = score_search(truth, h, Json::parse(read_text(*search_file)))) report["search"] = *s;
  }
  return report;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kSeg: return "seg";
    case Stage::kMrf: return "mrf";
    case Stage::kSearch: return "search";
    case Stage::kProject: return "project";
    case Stage::kEval: return "eval";
  }
  return "ingest";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::kIngest, Stage::kSeg, Stage::kMrf, Stage::kSearch, Stage::kProject, Stage::kEval}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown stage '" + name + "' (expected ingest, seg, mrf, search, project or eval)");
}

std::vector<Stage> parse_stages(const std::string& list) {
  std::set<Stage> stages;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) stages.insert(parse_stage(item));
  }
  if (stages.empty()) throw ValidationError("no stages given");
  return {stages.begin(), stages.end()};
}

Json run_pipeline(const Workspace& ws, const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  fs::create_directories(ws.dir);
  Json manifest;
  manifest["config"] = config.to_json();
  manifest["stages"] = Json::array();
  Json results = Json::object();
  Json timings = Json::object();

  for (Stage stage : options.stages) {
    const auto t0 = std::chrono::steady_clock::now();
    Json out;
    switch (stage) {
      case Stage::kIngest:
        if (!options.mesh) throw ValidationError("stage 'ingest' needs a mesh file");
        out = ingest(ws, *options.mesh, options.frames);
        break;
      case Stage::kSeg: out = run_seg(ws, config); break;
      case Stage::kMrf: out = run_mrf(ws, config); break;
      case Stage::kSearch: {
        const Json c = run_search(ws, config, options.template_regions);
        out = {{"template", options.template_regions}, {"candidates", c.size()}};
        break;
      }
      case Stage::kProject: {
        const Json doc = run_project(ws, config, options.frame, ws.dir / "masks" / ("frame_" + std::to_string(options.frame)));
        out = {{"frame", options.frame}, {"regions", doc["regions"].size()}};
        break;
      }
      case Stage::kEval:
        if (!options.truth) throw ValidationError("stage 'eval' needs a truth file");
        out = run_eval(ws, *options.truth);
        break;
    }
    timings[to_string(stage)] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest["stages"].push_back(to_string(stage));
    results[to_string(stage)] = out;
  }
  manifest["results"] = results;

  // Counts in one place, whichever stages produced them.
  Json counts = Json::object();
  if (fs::exists(ws.mesh())) {
    const PlyData ply = read_ply(ws.mesh());
    counts["vertices"] = ply.mesh.vertex_count();
    counts["faces"] = ply.mesh.face_count();
  }
  if (fs::exists(ws.supervertices())) counts["supervertices"] = load_annotations(ws.supervertices()).supervertex_count();
  if (fs::exists(ws.regions())) counts["regions"] = load_annotations(ws.regions()).regions().size();
  manifest["counts"] = counts;

  write_json(ws.manifest(), manifest);
  write_json(ws.timings(), timings);
  return manifest;
}

}  // namespace scenecarve::pipeline
