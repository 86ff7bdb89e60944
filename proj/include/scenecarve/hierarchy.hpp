#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scenecarve/types.hpp"

namespace scenecarve {

/// Three-level partition: vertex -> supervertex -> region, plus optional
/// semantic labels per region. Supervertex ids are dense (0..S-1); region
/// ids are arbitrary non-negative ints until `compact_regions` is called.
struct SegmentationHierarchy {
  std::vector<int> supervertex_of;
  std::vector<int> region_of;
  std::map<int, std::string> labels;

  int vertex_count() const { return static_cast<int>(supervertex_of.size()); }
  int supervertex_count() const { return static_cast<int>(region_of.size()); }

  int region_of_vertex(int v) const { return region_of[supervertex_of[v]]; }

  /// Sorted distinct region ids.
  std::vector<int> regions() const;
  bool has_region(int region) const;
  /// Supervertices of a region, ascending.
  std::vector<int> members(int region) const;
  /// Vertices of a region (or a set of regions), ascending.
  std::vector<int> vertices_of(int region) const;
  std::vector<int> vertices_of(const std::vector<int>& regions) const;
  std::vector<int> supervertex_sizes() const;
  int max_region_id() const;

  /// One supervertex and one region per vertex.
  static SegmentationHierarchy identity(int vertex_count);

  /// Renumbers regions densely in order of first appearance by supervertex.
  void compact_regions();

  /// Partition totality: every vertex resolves to a region and labels only
  /// name live regions. Throws ValidationError otherwise.
  void validate() const;

  friend bool operator==(const SegmentationHierarchy&, const SegmentationHierarchy&) = default;
};

inline constexpr int kAnnotationSchemaVersion = 1;

/// JSON document: schema version, run-length supervertex map, dense
/// supervertex -> region array, region -> label object. Serialization is
/// canonical, so save(load(x)) == x byte for byte.
std::string annotations_to_json(const SegmentationHierarchy& hierarchy);
SegmentationHierarchy annotations_from_json(const std::string& text,
                                            const std::string& source = "<memory>");

void save_annotations(const std::filesystem::path& path, const SegmentationHierarchy& hierarchy);
SegmentationHierarchy load_annotations(const std::filesystem::path& path);

}  // namespace scenecarve
