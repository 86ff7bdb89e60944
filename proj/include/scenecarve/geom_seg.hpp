#pragma once

#include <vector>

#include "scenecarve/hierarchy.hpp"
#include "scenecarve/mesh.hpp"

namespace scenecarve::geom {

struct SegParams {
  double smoothing = 0.5;
  double threshold_k = 500.0;
  int min_size = 20;

  void validate() const;
};

struct GraphEdge {
  int a = 0;  // a < b
  int b = 0;
  double weight = 0.0;
};

/// One node per vertex, one edge per unique triangle edge.
struct MeshGraph {
  int node_count = 0;
  std::vector<GraphEdge> edges;
};

/// Dissimilarity of two unit normals: 1 - n_i . n_j, clamped to [0, 2].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar edge_weight(const Eigen::MatrixBase<DerivedA>& n_i,
                                      const Eigen::MatrixBase<DerivedB>& n_j) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar w = Scalar(1) - n_i.dot(n_j);
  return w < Scalar(0) ? Scalar(0) : (w > Scalar(2) ? Scalar(2) : w);
}

/// Blends each normal with the mean of its 1-ring: n' = normalize((1-s) n + s mean).
Points smooth_normals(const SceneMesh& mesh, double smoothing);

MeshGraph build_graph(const SceneMesh& mesh, const Points& normals);

/// Felzenszwalb-Huttenlocher over the mesh graph. Edges are visited in
/// ascending (weight, a, b) order; components merge when the edge weight is
/// at most min(Int(C) + k/|C|) of both sides; components below min_size are
/// then joined across their lowest-weight edges. Returns the supervertex
/// level with one region per supervertex.
SegmentationHierarchy segment_graph(const SceneMesh& mesh, const SegParams& params = {});

/// Number of segment_graph invocations since process start.
long long segment_graph_invocations();

}  // namespace scenecarve::geom
