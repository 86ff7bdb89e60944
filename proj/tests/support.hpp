#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "scenecarve/hierarchy.hpp"
#include "scenecarve/mesh.hpp"

namespace scenecarve::testing {

// Builds meshes part by part; every part becomes one region.
struct MeshBuilder {
  std::vector<Vector3> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::vector<Vector3> colors;
  std::vector<int> part_of;
  int parts = 0;

  int add_vertex(const Vector3& p, const Vector3& color) {
    vertices.push_back(p);
    colors.push_back(color);
    part_of.push_back(parts);
    return static_cast<int>(vertices.size()) - 1;
  }

  // Grid of n x n cells on the quad origin + s*u + t*v, s,t in [0,1].
  void add_quad(const Vector3& origin, const Vector3& u, const Vector3& v, int n, const Vector3& color) {
    const int base = static_cast<int>(vertices.size());
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) add_vertex(origin + u * (double(i) / n) + v * (double(j) / n), color);
    }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int a = base + j * (n + 1) + i;
        faces.emplace_back(a, a + 1, a + n + 2);
        faces.emplace_back(a, a + n + 2, a + n + 1);
      }
    }
  }

  // Closed axis-aligned box surface (faces split, corners duplicated), as one part.
  void add_box(const Vector3& lo, const Vector3& hi, int n, const Vector3& color, const Matrix4& pose = Matrix4::Identity()) {
    const std::size_t first = vertices.size();
    const Vector3 d = hi - lo;
    const Vector3 ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
    add_quad(lo, ey, ex, n, color);            // bottom, facing -z
    add_quad(lo + ez, ex, ey, n, color);       // top
    add_quad(lo, ex, ez, n, color);            // front, -y
    add_quad(lo + ey, ez, ex, n, color);       // back
    add_quad(lo, ez, ey, n, color);            // left, -x
    add_quad(lo + ex, ey, ez, n, color);       // right
    for (std::size_t i = first; i < vertices.size(); ++i) {
      vertices[i] = pose.block<3, 3>(0, 0) * vertices[i] + pose.block<3, 1>(0, 3);
    }
    ++parts;
  }

  void end_part() { ++parts; }

  SceneMesh mesh() const {
    SceneMesh m;
    m.vertices.resize(vertices.size(), 3);
    m.colors.resize(vertices.size(), 3);
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      m.vertices.row(i) = vertices[i].transpose();
      m.colors.row(i) = colors[i].transpose();
    }
    m.faces.resize(faces.size(), 3);
    for (std::size_t f = 0; f < faces.size(); ++f) m.faces.row(f) = faces[f].transpose();
    compute_normals(m);
    return m;
  }

  // One supervertex and one region per part.
  SegmentationHierarchy hierarchy() const {
    SegmentationHierarchy h;
    h.supervertex_of = part_of;
    h.region_of.resize(parts);
    for (int p = 0; p < parts; ++p) h.region_of[p] = p;
    return h;
  }
};

inline Matrix4 pose_of(double yaw, const Vector3& t) {
  Matrix4 m = Matrix4::Identity();
  m.block<3, 3>(0, 0) = Eigen::AngleAxisd(yaw, Vector3::UnitZ()).toRotationMatrix();
  m.block<3, 1>(0, 3) = t;
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("scenecarve_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace scenecarve::testing
