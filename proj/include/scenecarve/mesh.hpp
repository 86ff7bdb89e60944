#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scenecarve/types.hpp"

namespace scenecarve {

/// Indexed triangle mesh with per-vertex normal and color. Positions are in
/// meters; colors are RGB in [0,1].
struct SceneMesh {
  Points vertices;
  Triangles faces;
  Points normals;
  Points colors;

  int vertex_count() const { return static_cast<int>(vertices.rows()); }
  int face_count() const { return static_cast<int>(faces.rows()); }

  Vector3 position(int v) const { return vertices.row(v).transpose(); }
  Vector3 normal(int v) const { return normals.row(v).transpose(); }
  Vector3 color(int v) const { return colors.row(v).transpose(); }

  /// Throws ValidationError on out-of-range or repeated face indices.
  void validate() const;
};

/// Raw result of reading a PLY file; `has_colors` is false when the file
/// carries no red/green/blue properties.
struct PlyData {
  SceneMesh mesh;
  bool has_colors = false;
};

/// ascii and binary_little_endian are supported. Polygons are fan-triangulated.
PlyData read_ply(const std::filesystem::path& path);
PlyData parse_ply(const std::string& bytes, const std::string& source_name = "<memory>");

/// Writes ascii PLY with 8-bit colors; output is byte-stable for equal input.
void write_ply(const std::filesystem::path& path, const SceneMesh& mesh);

/// Unique undirected mesh edges (i < j), sorted lexicographically.
std::vector<std::pair<int, int>> mesh_edges(const SceneMesh& mesh);

/// Sorted 1-ring neighbor lists.
std::vector<std::vector<int>> vertex_neighbors(const SceneMesh& mesh);

struct NormalOptions {
  double range_sigma = 0.35;  // radians
  bool bilateral = true;
};

/// Area-weighted face-normal average followed by one bilateral pass over the
/// 1-ring (spatial sigma = mean edge length). Vertices without an incident
/// face of non-zero area get +Z and are reported in `warnings`.
void compute_normals(SceneMesh& mesh, std::vector<std::string>* warnings = nullptr,
                     const NormalOptions& options = {});

Box3 bounding_box(const SceneMesh& mesh);

}  // namespace scenecarve
