#include "scenecarve/geom_seg.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>

namespace scenecarve::geom {

namespace {

std::atomic<long long> g_invocations{0};

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Returns the surviving root. The smaller index wins on equal size so
  // results do not depend on argument order.
  int join(int a, int b, double weight) {
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    internal_[a] = weight;
    return a;
  }

  int size(int root) const { return size_[root]; }
  double internal(int root) const { return internal_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
  std::vector<double> internal_;
};

}  // namespace

void SegParams::validate() const {
  if (!(threshold_k > 0.0)) throw ValidationError("threshold_k must be > 0");
  if (min_size < 1) throw ValidationError("min_size must be >= 1");
  if (!(smoothing >= 0.0 && smoothing <= 1.0)) throw ValidationError("smoothing must be in [0,1]");
}

Points smooth_normals(const SceneMesh& mesh, double smoothing) {
  if (smoothing <= 0.0) return mesh.normals;
  const auto ring = vertex_neighbors(mesh);
  Points out(mesh.vertex_count(), 3);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const Vector3 n = mesh.normal(v);
    if (ring[v].empty()) {
      out.row(v) = n.transpose();
      continue;
    }
    Vector3 mean = Vector3::Zero();
    for (int u : ring[v]) mean += mesh.normal(u);
    mean /= static_cast<double>(ring[v].size());
    const Vector3 blended = (1.0 - smoothing) * n + smoothing * mean;
    const double len = blended.norm();
    out.row(v) = (len > 1e-12 ? Vector3(blended / len) : n).transpose();
  }
  return out;
}

MeshGraph build_graph(const SceneMesh& mesh, const Points& normals) {
  MeshGraph graph;
  graph.node_count = mesh.vertex_count();
  for (const auto& [a, b] : mesh_edges(mesh)) {
    graph.edges.push_back({a, b, edge_weight(normals.row(a), normals.row(b))});
  }
  return graph;
}

SegmentationHierarchy segment_graph(const SceneMesh& mesh, const SegParams& params) {
  ++g_invocations;
  params.validate();
  if (mesh.normals.rows() != mesh.vertex_count()) {
    throw PreconditionError("segment_graph requires per-vertex normals");
  }

  MeshGraph graph = build_graph(mesh, smooth_normals(mesh, params.smoothing));
  std::sort(graph.edges.begin(), graph.edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  DisjointSet sets(graph.node_count);
  for (const GraphEdge& e : graph.edges) {
    const int ra = sets.find(e.a);
    const int rb = sets.find(e.b);
    if (ra == rb) continue;
    const double ta = sets.internal(ra) + params.threshold_k / sets.size(ra);
    const double tb = sets.internal(rb) + params.threshold_k / sets.size(rb);
    if (e.weight <= std::min(ta, tb)) sets.join(ra, rb, e.weight);
  }

  // Small components join the neighbor across their lowest-weight edge:
  // the first edge in sorted order touching them.
  for (const GraphEdge& e : graph.edges) {
    const int ra = sets.find(e.a);
    const int rb = sets.find(e.b);
    if (ra == rb) continue;
    if (sets.size(ra) < params.min_size || sets.size(rb) < params.min_size) {
      sets.join(ra, rb, std::max({e.weight, sets.internal(ra), sets.internal(rb)}));
    }
  }

  SegmentationHierarchy h;
  h.supervertex_of.resize(graph.node_count);
  std::vector<int> id_of_root(graph.node_count, -1);
  int next = 0;
  for (int v = 0; v < graph.node_count; ++v) {
    const int root = sets.find(v);
    if (id_of_root[root] < 0) id_of_root[root] = next++;
    h.supervertex_of[v] = id_of_root[root];
  }
  h.region_of.resize(next);
  std::iota(h.region_of.begin(), h.region_of.end(), 0);
  return h;
}

long long segment_graph_invocations() { return g_invocations.load(); }

}  // namespace scenecarve::geom
