#include "scenecarve/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace scenecarve {

using nlohmann::json;

std::vector<int> SegmentationHierarchy::regions() const {
  std::vector<int> out(region_of);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool SegmentationHierarchy::has_region(int region) const {
  return std::find(region_of.begin(), region_of.end(), region) != region_of.end();
}

std::vector<int> SegmentationHierarchy::members(int region) const {
  std::vector<int> out;
  for (int s = 0; s < supervertex_count(); ++s)
    if (region_of[s] == region) out.push_back(s);
  return out;
}

std::vector<int> SegmentationHierarchy::vertices_of(int region) const {
  return vertices_of(std::vector<int>{region});
}

std::vector<int> SegmentationHierarchy::vertices_of(const std::vector<int>& regions) const {
  std::vector<int> sorted(regions);
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> out;
  for (int v = 0; v < vertex_count(); ++v) {
    if (std::binary_search(sorted.begin(), sorted.end(), region_of_vertex(v))) out.push_back(v);
  }
  return out;
}

std::vector<int> SegmentationHierarchy::supervertex_sizes() const {
  std::vector<int> sizes(region_of.size(), 0);
  for (int s : supervertex_of) ++sizes[s];
  return sizes;
}

int SegmentationHierarchy::max_region_id() const {
  return region_of.empty() ? -1 : *std::max_element(region_of.begin(), region_of.end());
}

SegmentationHierarchy SegmentationHierarchy::identity(int vertex_count) {
  SegmentationHierarchy h;
  h.supervertex_of.resize(vertex_count);
  h.region_of.resize(vertex_count);
  for (int v = 0; v < vertex_count; ++v) h.supervertex_of[v] = h.region_of[v] = v;
  return h;
}

void SegmentationHierarchy::compact_regions() {
  std::unordered_map<int, int> remap;
  for (int& r : region_of) {
    auto [it, inserted] = remap.try_emplace(r, static_cast<int>(remap.size()));
    r = it->second;
  }
  std::map<int, std::string> relabeled;
  for (const auto& [region, label] : labels) {
    if (auto it = remap.find(region); it != remap.end()) relabeled[it->second] = label;
  }
  labels = std::move(relabeled);
}

void SegmentationHierarchy::validate() const {
  const int s_count = supervertex_count();
  std::vector<int> sizes(s_count, 0);
  for (int v = 0; v < vertex_count(); ++v) {
    const int s = supervertex_of[v];
    if (s < 0 || s >= s_count) {
      throw ValidationError("vertex " + std::to_string(v) + " maps to unknown supervertex " +
                            std::to_string(s));
    }
    ++sizes[s];
  }
  long long total = 0;
  for (int s = 0; s < s_count; ++s) {
    if (region_of[s] < 0) {
      throw ValidationError("supervertex " + std::to_string(s) + " has negative region id");
    }
    total += sizes[s];
  }
  if (total != vertex_count()) throw ValidationError("supervertex sizes do not sum to vertex count");
  for (const auto& [region, label] : labels) {
    if (!has_region(region)) {
      throw ValidationError("label '" + label + "' names region " + std::to_string(region) +
                            " which has no supervertices");
    }
  }
}

std::string annotations_to_json(const SegmentationHierarchy& h) {
  json runs = json::array();
  for (int v = 0; v < h.vertex_count();) {
    int end = v + 1;
    while (end < h.vertex_count() && h.supervertex_of[end] == h.supervertex_of[v]) ++end;
    runs.push_back({h.supervertex_of[v], end - v});
    v = end;
  }
  json labels = json::object();
  for (const auto& [region, label] : h.labels) labels[std::to_string(region)] = label;

  json doc;
  doc["schema_version"] = kAnnotationSchemaVersion;
  doc["vertex_count"] = h.vertex_count();
  doc["supervertex_runs"] = std::move(runs);
  doc["supervertex_to_region"] = h.region_of;
  doc["region_labels"] = std::move(labels);
  return doc.dump(1) + "\n";
}

SegmentationHierarchy annotations_from_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw ParseError(source + ": missing schema_version");
  }
  const int version = doc["schema_version"].get<int>();
  if (version != kAnnotationSchemaVersion) {
    throw UnsupportedVersionError(source + ": unsupported annotation schema version " +
                                  std::to_string(version) + " (expected " +
                                  std::to_string(kAnnotationSchemaVersion) + ")");
  }

  SegmentationHierarchy h;
  try {
    h.region_of = doc.at("supervertex_to_region").get<std::vector<int>>();
    const int vertex_count = doc.at("vertex_count").get<int>();
    h.supervertex_of.reserve(vertex_count);
    for (const auto& run : doc.at("supervertex_runs")) {
      const int s = run.at(0).get<int>();
      const int length = run.at(1).get<int>();
      if (s < 0 || s >= static_cast<int>(h.region_of.size())) {
        throw ValidationError(source + ": supervertex " + std::to_string(s) +
                              " is absent from supervertex_to_region");
      }
      if (length <= 0) throw ValidationError(source + ": non-positive run length");
      h.supervertex_of.insert(h.supervertex_of.end(), length, s);
    }
    if (static_cast<int>(h.supervertex_of.size()) != vertex_count) {
      throw ValidationError(source + ": runs cover " + std::to_string(h.supervertex_of.size()) +
                            " vertices, expected " + std::to_string(vertex_count));
    }
    const json labels = doc.value("region_labels", json::object());
    for (const auto& [key, value] : labels.items()) {
      const int region = std::stoi(key);
      if (!h.has_region(region)) {
        throw ValidationError(source + ": labeled region " + std::to_string(region) +
                              " is absent from the hierarchy");
      }
      h.labels[region] = value.get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
  h.validate();
  return h;
}

void save_annotations(const std::filesystem::path& path, const SegmentationHierarchy& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << annotations_to_json(h);
}

SegmentationHierarchy load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open annotation file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return annotations_from_json(ss.str(), path.string());
}

}  // namespace scenecarve
