#include "scenecarve/service.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include <httplib.h>

namespace scenecarve::service {

using Json = nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "mesh frames are written in host order");

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size()) throw ParseError("mesh frame truncated at byte " + std::to_string(offset));
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

Response json_response(int status, const Json& body) { return {status, "application/json", body.dump()}; }

Response error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

std::vector<int> int_list(const Json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_array()) {
    throw ValidationError(std::string("request needs an integer array '") + key + "'");
  }
  return body[key].get<std::vector<int>>();
}

int int_field(const Json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_number_integer()) {
    throw ValidationError(std::string("request needs an integer '") + key + "'");
  }
  return body[key].get<int>();
}

Json labels_json(const SegmentationHierarchy& h) {
  Json labels = Json::object();
  for (const auto& [region, label] : h.labels) labels[std::to_string(region)] = label;
  return labels;
}

}  // namespace

std::string encode_mesh(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy) {
  if (hierarchy.vertex_count() != mesh.vertex_count()) throw ValidationError("hierarchy does not match the mesh");
  const auto n = static_cast<std::uint32_t>(mesh.vertex_count());
  const auto m = static_cast<std::uint32_t>(mesh.face_count());
  std::string out;
  out.reserve(4 + n * 12 + 4 + m * 12 + n * 4 + n * 3);
  put<std::uint32_t>(out, n);
  for (std::uint32_t v = 0; v < n; ++v) {
    for (int c = 0; c < 3; ++c) put<float>(out, static_cast<float>(mesh.vertices(v, c)));
  }
  put<std::uint32_t>(out, m);
  for (std::uint32_t f = 0; f < m; ++f) {
    for (int c = 0; c < 3; ++c) put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.faces(f, c)));
  }
  for (std::uint32_t v = 0; v < n; ++v) put<std::uint32_t>(out, static_cast<std::uint32_t>(hierarchy.region_of_vertex(v)));
  const bool has_colors = mesh.colors.rows() == mesh.vertices.rows();
  for (std::uint32_t v = 0; v < n; ++v) {
    for (int c = 0; c < 3; ++c) {
      const double value = has_colors ? mesh.colors(v, c) : 0.5;
      put<std::uint8_t>(out, static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0)));
    }
  }
  return out;
}

DecodedMesh decode_mesh(const std::string& bytes) {
  DecodedMesh d;
  std::size_t at = 0;
  const auto n = take<std::uint32_t>(bytes, at);
  if (std::size_t(n) * 12 > bytes.size()) throw ParseError("mesh frame vertex count exceeds the payload");
  for (std::size_t i = 0; i < std::size_t(n) * 3; ++i) d.positions.push_back(take<float>(bytes, at));
  const auto m = take<std::uint32_t>(bytes, at);
  if (std::size_t(m) * 12 > bytes.size()) throw ParseError("mesh frame face count exceeds the payload");
  for (std::size_t i = 0; i < std::size_t(m) * 3; ++i) d.faces.push_back(take<std::uint32_t>(bytes, at));
  for (std::size_t i = 0; i < n; ++i) d.regions.push_back(take<std::uint32_t>(bytes, at));
  for (std::size_t i = 0; i < std::size_t(n) * 3; ++i) d.colors.push_back(take<std::uint8_t>(bytes, at));
  if (at != bytes.size()) throw ParseError("mesh frame has " + std::to_string(bytes.size() - at) + " trailing bytes");
  return d;
}

Camera camera_from_json(const Json& j) {
  try {
    Camera c;
    const Json& k = j.at("intrinsics");
    c.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                    k.at("cy").get<double>()};
    const auto pose = j.at("pose").get<std::vector<double>>();
    if (pose.size() != 16) throw ValidationError("camera pose needs 16 values");
    for (int r = 0; r < 4; ++r) {
      for (int col = 0; col < 4; ++col) c.pose(r, col) = pose[r * 4 + col];
    }
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.validate("camera");
    return c;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed camera: ") + e.what());
  }
}

AnnotationService::AnnotationService(AnnotationSession session, pipeline::PipelineConfig config, std::string session_id,
                                     std::optional<pipeline::Workspace> workspace)
    : session_id_(std::move(session_id)),
      config_(std::move(config)),
      workspace_(std::move(workspace)),
      session_(std::move(session)) {
  auto snap = std::make_shared<Snapshot>();
  snap->hierarchy = session_.hierarchy();
  snap->templates = session_.templates();
  history_[0] = snap->hierarchy.region_of;
  snapshot_ = std::move(snap);
  writer_ = std::thread([this] { writer_loop(); });
}

AnnotationService::~AnnotationService() {
  stop();
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (writer_.joinable()) writer_.join();
  wait_for_jobs();
}

long long AnnotationService::revision() const { return snapshot()->revision; }

std::shared_ptr<const AnnotationService::Snapshot> AnnotationService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void AnnotationService::writer_loop() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    task();
  }
}

void AnnotationService::commit() {
  auto snap = std::make_shared<Snapshot>();
  snap->revision = snapshot()->revision + 1;
  snap->hierarchy = session_.hierarchy();
  snap->templates = session_.templates();
  std::lock_guard lock(snapshot_mutex_);
  history_[snap->revision] = snap->hierarchy.region_of;
  snapshot_ = std::move(snap);
}

Response AnnotationService::mutate(const Json& body, std::function<Json(AnnotationSession&)> edit) {
  auto task = std::make_shared<std::packaged_task<Response()>>([this, body, edit = std::move(edit)]() -> Response {
    const long long current = snapshot()->revision;
    if (body.contains("rev") && body["rev"] != current) {
      return json_response(409, {{"error", "stale revision"}, {"revision", current}});
    }
    try {
      Json result = edit(session_);
      if (!result.contains("unchanged")) commit();
      result.erase("unchanged");
      result["revision"] = snapshot()->revision;
      return json_response(200, result);
    } catch (const Error& e) {
      return error_response(422, e.what());
    }
  });
  std::future<Response> done = task->get_future();
  {
    std::lock_guard lock(queue_mutex_);
    if (stopping_) return error_response(503, "service is shutting down");
    queue_.push_back([task] { (*task)(); });
  }
  queue_cv_.notify_one();
  return done.get();
}

Response AnnotationService::handle(const Request& request) {
  Json body = Json::object();
  if (!request.body.empty()) {
    try {
      body = Json::parse(request.body);
    } catch (const Json::parse_error& e) {
      return error_response(400, std::string("malformed JSON body: ") + e.what());
    }
    if (!body.is_object()) return error_response(400, "request body must be a JSON object");
  }
  std::string session = session_id_;
  if (auto it = request.query.find("session"); it != request.query.end()) session = it->second;
  if (body.contains("session") && body["session"].is_string()) session = body["session"].get<std::string>();
  if (session != session_id_) return error_response(404, "unknown session '" + session + "'");

  const std::string& path = request.path;
  const bool get = request.method == "GET";
  const bool post = request.method == "POST";
  try {
    if (get && path == "/mesh") return get_mesh();
    if (get && path == "/hierarchy") return get_hierarchy(request);
    if (get && path.starts_with("/search/")) return get_search(path.substr(8));
    if (get && path.starts_with("/frames/") && path.ends_with("/masks")) {
      const std::string id = path.substr(8, path.size() - 8 - 6);
      if (id.empty() || !std::all_of(id.begin(), id.end(), ::isdigit)) return error_response(404, "unknown frame");
      return get_frame_masks(std::stoi(id));
    }
    if (!post) return error_response(404, "no route for " + request.method + " " + path);

    if (path == "/stroke") return post_stroke(body);
    if (path == "/search") return post_search(body);
    if (path == "/guided-merge") return post_guided_merge(body);
    if (path == "/save") return post_save();
    if (path == "/merge") {
      const auto regions = int_list(body, "regions");
      return mutate(body, [regions](AnnotationSession& s) { return Json{{"region", s.merge(regions)}}; });
    }
    if (path == "/extract") {
      const int region = int_field(body, "region");
      return mutate(body, [region](AnnotationSession& s) { return Json{{"regions", s.extract(region)}}; });
    }
    if (path == "/split") {
      const int region = int_field(body, "region");
      const mrf::MrfParams params = config_.mrf;
      if (body.contains("stroke")) {
        Stroke stroke;
        const Json& js = body["stroke"];
        const Camera cam = js.contains("frame") ? session_.frame(int_field(js, "frame")).camera
                                                : camera_from_json(js.at("camera"));
        stroke.camera = cam;
        for (const Json& p : js.at("polyline")) stroke.polyline.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        return mutate(body, [region, stroke, params](AnnotationSession& s) {
          return Json{{"regions", s.split(region, stroke, params)}};
        });
      }
      const int a = int_field(body, "start_supervertex");
      const int b = int_field(body, "end_supervertex");
      return mutate(body, [region, a, b, params](AnnotationSession& s) {
        return Json{{"regions", s.split(region, a, b, params)}};
      });
    }
    if (path == "/annotate") {
      const int region = int_field(body, "region");
      if (!body.contains("label") || !body["label"].is_string()) throw ValidationError("request needs a string 'label'");
      const std::string label = body["label"];
      return mutate(body, [region, label](AnnotationSession& s) {
        s.annotate(region, label);
        return Json{{"region", region}, {"label", label}};
      });
    }
    if (path == "/accept") {
      const auto regions = int_list(body, "regions");
      if (!body.contains("label") || !body["label"].is_string()) throw ValidationError("request needs a string 'label'");
      const std::string label = body["label"];
      return mutate(body, [regions, label](AnnotationSession& s) {
        return Json{{"region", s.accept_object(regions, label)}, {"label", label}};
      });
    }
    if (path == "/undo") {
      return mutate(body, [](AnnotationSession& s) {
        std::string notice;
        const bool undone = s.undo(&notice);
        Json out = {{"undone", undone}};
        if (!undone) {
          out["notice"] = notice;
          out["unchanged"] = true;
        }
        return out;
      });
    }
    if (path == "/template") {
      const auto regions = int_list(body, "regions");
      return mutate(body, [regions](AnnotationSession& s) { return Json{{"template", s.add_template(regions)}}; });
    }
    return error_response(404, "no route for POST " + path);
  } catch (const Error& e) {
    return error_response(422, e.what());
  } catch (const Json::exception& e) {
    return error_response(422, std::string("malformed request: ") + e.what());
  }
}

Response AnnotationService::get_mesh() {
  const auto snap = snapshot();
  return {200, "application/octet-stream", encode_mesh(session_.mesh(), snap->hierarchy)};
}

Response AnnotationService::get_hierarchy(const Request& request) {
  const auto snap = snapshot();
  const SegmentationHierarchy& h = snap->hierarchy;
  auto it = request.query.find("rev");
  if (it == request.query.end() || it->second.empty()) {
    return json_response(200, {{"revision", snap->revision},
                               {"supervertex_of", h.supervertex_of},
                               {"region_of", h.region_of},
                               {"labels", labels_json(h)}});
  }
  long long base = -1;
  try {
    base = std::stoll(it->second);
  } catch (const std::exception&) {
    return error_response(422, "rev must be an integer");
  }
  std::vector<int> before;
  {
    std::lock_guard lock(snapshot_mutex_);
    auto old = history_.find(base);
    if (old == history_.end() || base > snap->revision) {
      return error_response(422, "unknown revision " + it->second);
    }
    before = old->second;
  }
  Json changes = Json::array();
  for (std::size_t s = 0; s < h.region_of.size(); ++s) {
    if (s >= before.size() || before[s] != h.region_of[s]) changes.push_back({s, h.region_of[s]});
  }
  return json_response(200, {{"revision", snap->revision},
                             {"base", base},
                             {"changes", changes},
                             {"labels", labels_json(h)}});
}

Response AnnotationService::post_stroke(const Json& body) {
  const auto snap = snapshot();
  Stroke stroke;
  stroke.camera = body.contains("frame") ? session_.frame(int_field(body, "frame")).camera
                                         : camera_from_json(body.at("camera"));
  for (const Json& p : body.at("polyline")) stroke.polyline.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  const std::vector<int> vertices = resolve_stroke(stroke, session_.mesh());
  std::vector<int> regions;
  std::set<int> seen;
  for (int v : vertices) {
    const int r = snap->hierarchy.region_of_vertex(v);
    if (seen.insert(r).second) regions.push_back(r);
  }
  return json_response(200, {{"revision", snap->revision}, {"vertices", vertices}, {"regions", regions}});
}

Response AnnotationService::post_search(const Json& body) {
  const auto snap = snapshot();
  std::vector<int> regions;
  if (body.contains("template")) {
    const int t = int_field(body, "template");
    if (t < 0 || t >= static_cast<int>(snap->templates.size())) {
      throw NotFoundError("template " + std::to_string(t) + " does not exist");
    }
    regions = snap->templates[t];
  } else {
    regions = int_list(body, "regions");
  }
  std::string id;
  {
    std::lock_guard lock(jobs_mutex_);
    id = std::to_string(next_job_++);
    jobs_[id].revision = snap->revision;
    job_threads_.emplace_back([this, id, snap, regions] {
      Job result;
      result.revision = snap->revision;
      try {
        result.candidates = pipeline::search_candidates(session_.mesh(), snap->hierarchy, regions, config_);
        result.status = "done";
      } catch (const std::exception& e) {
        result.status = "failed";
        result.error = e.what();
      }
      std::lock_guard inner(jobs_mutex_);
      jobs_[id] = std::move(result);
    });
  }
  return json_response(202, {{"job", id}, {"revision", snap->revision}});
}

Response AnnotationService::get_search(const std::string& id) {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return error_response(404, "unknown search job '" + id + "'");
  Json out = {{"job", id}, {"status", it->second.status}, {"revision", it->second.revision}};
  if (it->second.status == "done") out["candidates"] = it->second.candidates;
  if (it->second.status == "failed") out["error"] = it->second.error;
  return json_response(200, out);
}

Response AnnotationService::post_guided_merge(const Json& body) {
  const auto snap = snapshot();
  std::vector<int> regions;
  if (body.contains("template")) {
    const int t = int_field(body, "template");
    if (t < 0 || t >= static_cast<int>(snap->templates.size())) {
      throw NotFoundError("template " + std::to_string(t) + " does not exist");
    }
    regions = snap->templates[t];
  } else {
    regions = int_list(body, "template_regions");
  }
  const int seed = int_field(body, "region");
  search::ObjectSearch engine(session_.mesh(), snap->hierarchy, config_.search);
  engine.set_template(regions);
  const search::Candidate c = engine.guided_merge(seed);
  Json out = pipeline::candidates_json({c})[0];
  out["accepted"] = c.accepted;
  out["revision"] = snap->revision;
  return json_response(200, out);
}

Response AnnotationService::get_frame_masks(int frame_id) {
  const auto snap = snapshot();
  try {
    session_.frame(frame_id);
  } catch (const NotFoundError& e) {
    return error_response(404, e.what());
  }
  Json doc = pipeline::frame_masks(session_, snap->hierarchy, frame_id, config_);
  doc["revision"] = snap->revision;
  return json_response(200, doc);
}

Response AnnotationService::post_save() {
  if (!workspace_) throw PreconditionError("service was started without a workspace to save into");
  const auto snap = snapshot();
  save_annotations(workspace_->annotations(), snap->hierarchy);
  return json_response(200, {{"revision", snap->revision}, {"path", workspace_->annotations().string()}});
}

void AnnotationService::wait_for_jobs() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(jobs_mutex_);
    threads.swap(job_threads_);
  }
  for (std::thread& t : threads) {
    if (t.joinable()) t.join();
  }
}

int AnnotationService::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    const Response out = handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
    res.set_header("X-Revision", std::to_string(revision()));
  };
  server_->Get(".*", forward);
  server_->Post(".*", forward);
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationService::listen() {
  if (!server_) throw PreconditionError("bind() must be called before listen()");
  server_->listen_after_bind();
}

void AnnotationService::stop() {
  if (server_) server_->stop();
}

}  // namespace scenecarve::service
