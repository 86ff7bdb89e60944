#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenecarve/pipeline.hpp"
#include "scenecarve/session.hpp"

namespace httplib {
class Server;
}

namespace scenecarve::service {

struct Request {
  std::string method;  // GET or POST
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// Little-endian mesh frame: [u32 vertex count][f32 x3 positions][u32 face
/// count][u32 x3 indices][u32 region ids][u8 x3 colors].
std::string encode_mesh(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy);

struct DecodedMesh {
  std::vector<float> positions;
  std::vector<std::uint32_t> faces;
  std::vector<std::uint32_t> regions;
  std::vector<std::uint8_t> colors;
};
/// Throws ParseError on a truncated or oversized frame.
DecodedMesh decode_mesh(const std::string& bytes);

/// Camera from {intrinsics:{fx,fy,cx,cy}, pose:[16 row-major], width, height}.
Camera camera_from_json(const nlohmann::json& j);

/// One annotation session behind an HTTP+JSON interface. Mutations run on a
/// single writer thread in arrival order; reads see the last committed
/// snapshot. Every committed mutation bumps the revision by one. A request
/// carrying `rev` that differs from the current revision is refused with
/// 409.
class AnnotationService {
 public:
  AnnotationService(AnnotationSession session, pipeline::PipelineConfig config, std::string session_id = "default",
                    std::optional<pipeline::Workspace> workspace = {});
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  const std::string& session_id() const { return session_id_; }
  long long revision() const;

  /// Transport-independent dispatch; the HTTP server forwards here.
  Response handle(const Request& request);

  /// Binds the HTTP server; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void listen();
  void stop();

  /// Blocks until every submitted search job has finished.
  void wait_for_jobs();

 private:
  struct Snapshot {
    long long revision = 0;
    SegmentationHierarchy hierarchy;
    std::vector<std::vector<int>> templates;
  };
  struct Job {
    std::string status = "running";  // running | done | failed
    nlohmann::json candidates;
    std::string error;
    long long revision = 0;
  };

  std::shared_ptr<const Snapshot> snapshot() const;
  Response mutate(const nlohmann::json& body, std::function<nlohmann::json(AnnotationSession&)> edit);
  void commit();
  void writer_loop();

  Response get_mesh();
  Response get_hierarchy(const Request& request);
  Response post_stroke(const nlohmann::json& body);
  Response post_search(const nlohmann::json& body);
  Response get_search(const std::string& id);
  Response post_guided_merge(const nlohmann::json& body);
  Response get_frame_masks(int frame_id);
  Response post_save();

  const std::string session_id_;
  const pipeline::PipelineConfig config_;
  const std::optional<pipeline::Workspace> workspace_;

  // Owned by the writer thread.
  AnnotationSession session_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::map<long long, std::vector<int>> history_;  // revision -> region_of

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread writer_;

  std::mutex jobs_mutex_;
  std::map<std::string, Job> jobs_;
  std::vector<std::thread> job_threads_;
  int next_job_ = 1;

  std::unique_ptr<httplib::Server> server_;
};

}  // namespace scenecarve::service
