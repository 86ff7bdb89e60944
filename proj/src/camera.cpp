#include "scenecarve/camera.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace scenecarve {

void Camera::validate(const std::string& what) const {
  const Matrix3 r = pose.block<3, 3>(0, 0);
  const double orthogonality = (r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff();
  if (!std::isfinite(orthogonality) || orthogonality > 1e-6 ||
      std::abs(r.determinant() - 1.0) > 1e-6) {
    throw ValidationError(what + ": pose rotation is not rigid (R^T R != I or det != 1)");
  }
  if (pose.row(3).transpose() != Eigen::Vector4d(0, 0, 0, 1)) {
    throw ValidationError(what + ": pose bottom row must be [0 0 0 1]");
  }
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw ValidationError(what + ": focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) throw ValidationError(what + ": image size unknown");
}

std::optional<PixelHit> project_vertex(const Vector3& point, const Camera& camera) {
  const Matrix3 r = camera.pose.block<3, 3>(0, 0);
  const Vector3 p = r.transpose() * (point - camera.center());
  if (p.z() <= 0.0) return std::nullopt;
  const Intrinsics& k = camera.intrinsics;
  const double u = k.fx * p.x() / p.z() + k.cx;
  const double v = k.fy * p.y() / p.z() + k.cy;
  if (!(u >= 0.0 && u < camera.width && v >= 0.0 && v < camera.height)) return std::nullopt;
  return PixelHit{u, v, p.z()};
}

Vector3 unproject(double u, double v, double depth, const Camera& camera) {
  const Intrinsics& k = camera.intrinsics;
  const Vector3 p((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
  return camera.pose.block<3, 3>(0, 0) * p + camera.center();
}

Ray pixel_ray(double u, double v, const Camera& camera) {
  const Intrinsics& k = camera.intrinsics;
  const Vector3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  return {camera.center(), (camera.pose.block<3, 3>(0, 0) * dir_cam).normalized()};
}

DepthBuffer render_depth(const SceneMesh& mesh, const Camera& camera) {
  DepthBuffer buf;
  buf.depth.setConstant(camera.height, camera.width, std::numeric_limits<double>::infinity());
  buf.face.setConstant(camera.height, camera.width, -1);

  const Matrix3 rt = camera.pose.block<3, 3>(0, 0).transpose();
  const Vector3 t = camera.center();
  const Intrinsics& k = camera.intrinsics;
  constexpr double kNear = 1e-6;

  for (int f = 0; f < mesh.face_count(); ++f) {
    Eigen::Vector3d sx, sy, inv_z;
    bool behind = false;
    for (int c = 0; c < 3; ++c) {
      const Vector3 p = rt * (mesh.position(mesh.faces(f, c)) - t);
      if (p.z() <= kNear) {
        behind = true;
        break;
      }
      sx[c] = k.fx * p.x() / p.z() + k.cx;
      sy[c] = k.fy * p.y() / p.z() + k.cy;
      inv_z[c] = 1.0 / p.z();
    }
    // Triangles crossing the near plane are dropped rather than clipped.
    if (behind) continue;

    const double area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
    if (area == 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(sx.minCoeff())));
    const int x1 = std::min(camera.width - 1, static_cast<int>(std::ceil(sx.maxCoeff())));
    const int y0 = std::max(0, static_cast<int>(std::floor(sy.minCoeff())));
    const int y1 = std::min(camera.height - 1, static_cast<int>(std::ceil(sy.maxCoeff())));
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = ((sx[1] - px) * (sy[2] - py) - (sx[2] - px) * (sy[1] - py)) / area;
        const double w1 = ((sx[2] - px) * (sy[0] - py) - (sx[0] - px) * (sy[2] - py)) / area;
        const double w2 = 1.0 - w0 - w1;
        constexpr double eps = -1e-12;
        if (w0 < eps || w1 < eps || w2 < eps) continue;
        const double z = 1.0 / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]);
        if (z < buf.depth(y, x)) {
          buf.depth(y, x) = z;
          buf.face(y, x) = f;
        }
      }
    }
  }
  return buf;
}

std::optional<Vector3> intersect_triangle(const Ray& ray, const Vector3& a, const Vector3& b,
                                          const Vector3& c, double tolerance) {
  const Vector3 e1 = b - a;
  const Vector3 e2 = c - a;
  const Vector3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-15) return std::nullopt;
  const double inv = 1.0 / det;
  const Vector3 s = ray.origin - a;
  const double u = s.dot(p) * inv;
  if (u < -tolerance || u > 1.0 + tolerance) return std::nullopt;
  const Vector3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < -tolerance || u + v > 1.0 + tolerance) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t <= 0.0) return std::nullopt;
  return ray.origin + t * ray.direction;
}

std::vector<bool> colors_from_frames(SceneMesh& mesh, const std::vector<Frame>& frames,
                                     double occlusion_tolerance) {
  const int n = mesh.vertex_count();
  std::vector<std::vector<Eigen::Vector3d>> samples(n);
  for (const Frame& frame : frames) {
    if (frame.image.empty()) continue;
    const DepthBuffer buf = render_depth(mesh, frame.camera);
    for (int v = 0; v < n; ++v) {
      const auto hit = project_vertex(mesh.position(v), frame.camera);
      if (!hit) continue;
      const int x = static_cast<int>(hit->u);
      const int y = static_cast<int>(hit->v);
      if (hit->depth > buf.depth(y, x) + occlusion_tolerance) continue;
      const std::uint8_t* px = frame.image.at(x, y);
      samples[v].emplace_back(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0);
    }
  }

  std::vector<bool> observed(n, false);
  if (mesh.colors.rows() != n) mesh.colors = Points::Constant(n, 3, 0.5);
  std::vector<double> channel;
  for (int v = 0; v < n; ++v) {
    if (samples[v].empty()) continue;
    observed[v] = true;
    for (int c = 0; c < 3; ++c) {
      channel.clear();
      for (const auto& s : samples[v]) channel.push_back(s[c]);
      const std::size_t mid = channel.size() / 2;
      std::nth_element(channel.begin(), channel.begin() + mid, channel.end());
      double median = channel[mid];
      if (channel.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(channel.begin(), channel.begin() + mid));
      }
      mesh.colors(v, c) = median;
    }
  }
  return observed;
}

std::vector<Frame> load_frames_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ValidationError("cannot open frames manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(manifest.string() + ": manifest must be a JSON array");

  std::vector<Frame> frames;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    const std::string what = "frame " + std::to_string(i);
    Frame frame;
    frame.id = entry.value("id", static_cast<int>(i));
    try {
      const auto& k = entry.at("intrinsics");
      frame.camera.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                                 k.at("cx").get<double>(), k.at("cy").get<double>()};
      const auto& pose = entry.at("pose");
      if (!pose.is_array() || pose.size() != 16) {
        throw ValidationError(what + ": pose must hold 16 row-major numbers");
      }
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) frame.camera.pose(r, c) = pose[r * 4 + c].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(manifest.string() + ": " + what + ": " + e.what());
    }
    if (entry.contains("image_path")) {
      std::filesystem::path image_path = entry["image_path"].get<std::string>();
      if (image_path.is_relative()) image_path = manifest.parent_path() / image_path;
      frame.image = read_png(image_path);
      frame.camera.width = frame.image.width;
      frame.camera.height = frame.image.height;
    } else {
      frame.camera.width = entry.value("width", 0);
      frame.camera.height = entry.value("height", 0);
    }
    frame.camera.validate(what);
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace scenecarve
