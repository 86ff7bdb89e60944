#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "scenecarve/image.hpp"
#include "scenecarve/mesh.hpp"
#include "scenecarve/types.hpp"

namespace scenecarve {

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Pinhole view: intrinsics, a rigid camera-to-world pose and the image size.
/// Used both for recorded frames and for UI viewport cameras.
struct Camera {
  Intrinsics intrinsics;
  Matrix4 pose = Matrix4::Identity();
  int width = 0;
  int height = 0;

  /// Throws ValidationError naming `what` if the pose is not rigid or the
  /// focal lengths are not positive.
  void validate(const std::string& what) const;

  Vector3 center() const { return pose.block<3, 1>(0, 3); }
};

struct Frame {
  int id = 0;
  Camera camera;
  RgbImage image;
};

struct PixelHit {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-space z
};

/// Pinhole projection through the inverse pose. Empty when the point is
/// behind the camera or falls outside [0,width) x [0,height).
std::optional<PixelHit> project_vertex(const Vector3& point, const Camera& camera);

/// Inverse of project_vertex.
Vector3 unproject(double u, double v, double depth, const Camera& camera);

/// World-space ray through pixel coordinates (u, v).
struct Ray {
  Vector3 origin;
  Vector3 direction;  // unit
};
Ray pixel_ray(double u, double v, const Camera& camera);

/// Z-buffer of a mesh seen from a camera: per-pixel camera depth and the
/// front-most face id (-1 where nothing is visible). Pixel centers are
/// sampled at (x + 0.5, y + 0.5).
struct DepthBuffer {
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> depth;
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> face;

  int width() const { return static_cast<int>(depth.cols()); }
  int height() const { return static_cast<int>(depth.rows()); }
};

DepthBuffer render_depth(const SceneMesh& mesh, const Camera& camera);

/// Intersection of a ray with one triangle's plane, if it hits the triangle
/// (Moller-Trumbore with a small barycentric tolerance).
std::optional<Vector3> intersect_triangle(const Ray& ray, const Vector3& a, const Vector3& b,
                                          const Vector3& c, double tolerance = 1e-9);

/// Per-channel median of the pixels each vertex projects to, over frames
/// where it is in-frustum and passes a depth test against the rasterized
/// mesh (tolerance in meters). Returns false for vertices never observed.
std::vector<bool> colors_from_frames(SceneMesh& mesh, const std::vector<Frame>& frames,
                                     double occlusion_tolerance = 0.02);

/// JSON array of {image_path, intrinsics:{fx,fy,cx,cy}, pose:[16 row-major]}.
/// Relative image paths resolve against the manifest's directory. Entries may
/// carry explicit width/height instead of an image.
std::vector<Frame> load_frames_manifest(const std::filesystem::path& manifest);

}  // namespace scenecarve
