#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "scenecarve/pipeline.hpp"
#include "scenecarve/service.hpp"
#include "scenecarve/synth_fixtures.hpp"

namespace fs = std::filesystem;
using namespace scenecarve;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<double> seg_smoothing;
  std::optional<double> seg_threshold;
  std::optional<int> seg_min_size;
  std::optional<double> mrf_gamma;
  std::optional<int> mrf_max_sweeps;
  std::optional<double> split_gamma;
  std::string config_file;

  pipeline::PipelineConfig resolve() const {
    pipeline::PipelineConfig c;
    if (!config_file.empty()) c.apply_toml_file(config_file);
    if (seg_smoothing) c.seg.smoothing = *seg_smoothing;
    if (seg_threshold) c.seg.threshold_k = *seg_threshold;
    if (seg_min_size) c.seg.min_size = *seg_min_size;
    if (mrf_gamma) c.mrf.gamma = *mrf_gamma;
    if (mrf_max_sweeps) c.mrf.max_sweeps = *mrf_max_sweeps;
    if (split_gamma) c.mrf.split_penalty = *split_gamma;
    c.validate();
    return c;
  }
};

std::vector<int> parse_ids(const std::vector<std::string>& items) {
  std::vector<int> ids;
  for (const std::string& item : items) {
    std::stringstream in(item);
    std::string part;
    while (std::getline(in, part, ',')) {
      if (part.empty()) continue;
      try {
        std::size_t used = 0;
        ids.push_back(std::stoi(part, &used));
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::logic_error&) {
        throw ValidationError("'" + part + "' is not a region id");
      }
    }
  }
  return ids;
}

void print(const json& doc) { std::cout << doc.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh segmentation, annotation and object search"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  app.add_option("--config", ov.config_file, "TOML file overriding parameter defaults")->check(CLI::ExistingFile);
  app.add_option("--seg-smoothing", ov.seg_smoothing, "graph segmentation smoothing (0.5)");
  app.add_option("--seg-threshold", ov.seg_threshold, "graph segmentation threshold k (500)");
  app.add_option("--seg-min-size", ov.seg_min_size, "minimum supervertex size (20)");
  app.add_option("--mrf-gamma", ov.mrf_gamma, "MRF label change weight (0.5)");
  app.add_option("--mrf-max-sweeps", ov.mrf_max_sweeps, "MRF sweep limit");
  app.add_option("--split-gamma", ov.split_gamma, "split label change weight (0.05)");

  std::string work = "work";
  auto add_work = [&](CLI::App* sub) { sub->add_option("--work,--scene", work, "workspace directory"); };

  std::string mesh_file, frames_file;
  auto* ingest = app.add_subcommand("ingest", "copy a mesh and its frames into the workspace");
  add_work(ingest);
  ingest->add_option("--mesh", mesh_file, "PLY mesh")->required()->check(CLI::ExistingFile);
  ingest->add_option("--frames", frames_file, "frames manifest JSON")->check(CLI::ExistingFile);

  auto* seg = app.add_subcommand("seg", "graph segmentation into supervertices");
  add_work(seg);
  auto* mrf = app.add_subcommand("mrf", "group supervertices into regions");
  add_work(mrf);

  std::vector<std::string> template_ids;
  auto* search = app.add_subcommand("search", "find copies of a template object");
  add_work(search);
  search->add_option("--template", template_ids, "template region ids (comma separated)")->required();

  int frame = 0;
  std::string out_dir;
  auto* project = app.add_subcommand("project", "project regions into a frame and align their contours");
  add_work(project);
  project->add_option("--frame", frame, "frame id")->required();
  project->add_option("--out", out_dir, "mask output directory")->required();

  std::string image_file, projected_file, truth_mask_file, mode_name = "full";
  auto* align = app.add_subcommand("align2d", "align one projected mask to image edges");
  align->add_option("--image", image_file, "RGB PNG")->required()->check(CLI::ExistingFile);
  align->add_option("--projected", projected_file, "projected mask PNG")->required()->check(CLI::ExistingFile);
  align->add_option("--truth", truth_mask_file, "truth mask PNG for scoring")->check(CLI::ExistingFile);
  align->add_option("--mode", mode_name, "projection, local, continuity, smoothness or full");
  align->add_option("--out", out_dir, "output directory");

  std::string pred_file, gt_file, search_file;
  auto* eval = app.add_subcommand("eval", "score partitions and search results");
  eval->add_option("--work", work, "workspace directory");
  eval->add_option("--pred", pred_file, "saved hierarchy JSON")->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_file, "fixture truth JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--search", search_file, "candidate list JSON (with --pred)")->check(CLI::ExistingFile);

  std::string kind_name;
  fixtures::FixtureSpec spec;
  auto* fixture = app.add_subcommand("fixture", "generate a synthetic scene with ground truth");
  fixture->add_option("--kind", kind_name, "two-plane, colored-boxes, duplicated-room or shifted-square")->required();
  fixture->add_option("--seed", spec.seed, "random seed");
  fixture->add_option("--jitter", spec.jitter, "vertex noise sigma in meters");
  fixture->add_option("--drop", spec.drop_fraction, "face fraction dropped from damaged copies");
  fixture->add_flag("--clutter-only", spec.clutter_only, "duplicated room without the extra copies");
  fixture->add_option("--out", out_dir, "output directory")->required();

  std::string host = "127.0.0.1", session_id = "default";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the annotation service");
  add_work(serve);
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "0 picks a free port");
  serve->add_option("--session", session_id, "session id clients must address");

  std::string stages = "ingest,seg,mrf";
  auto* run = app.add_subcommand("run", "run several stages and write manifest.json");
  add_work(run);
  run->add_option("--stages", stages, "comma separated: ingest,seg,mrf,search,project,eval");
  run->add_option("--mesh", mesh_file, "PLY mesh (ingest)")->check(CLI::ExistingFile);
  run->add_option("--frames", frames_file, "frames manifest (ingest)")->check(CLI::ExistingFile);
  run->add_option("--template", template_ids, "template region ids (search)");
  run->add_option("--frame", frame, "frame id (project)");
  run->add_option("--gt", gt_file, "fixture truth JSON (eval)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const pipeline::PipelineConfig config = ov.resolve();
    const pipeline::Workspace ws{work};

    if (*ingest) {
      std::vector<std::string> warnings;
      std::optional<fs::path> frames;
      if (!frames_file.empty()) frames = frames_file;
      json out = pipeline::ingest(ws, mesh_file, frames, &warnings);
      for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
      print(out);
    } else if (*seg) {
      print(pipeline::run_seg(ws, config));
    } else if (*mrf) {
      print(pipeline::run_mrf(ws, config));
    } else if (*search) {
      print(pipeline::run_search(ws, config, parse_ids(template_ids)));
    } else if (*project) {
      print(pipeline::run_project(ws, config, frame, out_dir));
    } else if (*align) {
      const RgbImage image = read_png(image_file);
      const Mask projected = read_mask_png(projected_file);
      std::optional<Mask> truth;
      if (!truth_mask_file.empty()) truth = read_mask_png(truth_mask_file);
      std::optional<fs::path> out;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        out = out_dir;
      }
      print(pipeline::run_align2d(image, projected, truth, proj2d::parse_align_mode(mode_name), config, out));
    } else if (*eval) {
      if (!pred_file.empty()) {
        std::optional<fs::path> candidates;
        if (!search_file.empty()) candidates = search_file;
        print(pipeline::eval_prediction(pred_file, gt_file, candidates));
      } else {
        print(pipeline::run_eval(ws, gt_file));
      }
    } else if (*fixture) {
      spec.kind = fixtures::parse_kind(kind_name);
      fixtures::write_fixture(spec, out_dir);
      print({{"kind", kind_name}, {"seed", spec.seed}, {"out", out_dir}});
    } else if (*serve) {
      AnnotationSession session = pipeline::load_workspace_scene(ws);
      if (fs::exists(ws.supervertices())) {
        session.set_supervertices(load_annotations(ws.supervertices()));
        session.set_hierarchy(pipeline::current_hierarchy(ws));
      }
      service::AnnotationService svc(std::move(session), config, session_id, ws);
      const int bound = svc.bind(host, port);
      std::cout << json{{"host", host}, {"port", bound}, {"session", session_id}}.dump() << std::endl;
      svc.listen();
    } else if (*run) {
      pipeline::RunOptions opts;
      opts.stages = pipeline::parse_stages(stages);
      if (!mesh_file.empty()) opts.mesh = mesh_file;
      if (!frames_file.empty()) opts.frames = frames_file;
      opts.template_regions = parse_ids(template_ids);
      opts.frame = frame;
      if (!gt_file.empty()) opts.truth = gt_file;
      print(pipeline::run_pipeline(ws, config, opts));
    }
  } catch (const PrerequisiteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
