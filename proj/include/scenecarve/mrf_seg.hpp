#pragma once

#include <map>
#include <optional>
#include <vector>

#include "scenecarve/hierarchy.hpp"
#include "scenecarve/mesh.hpp"

namespace scenecarve::mrf {

struct SupervertexStats {
  Vector3 mean_color = Vector3::Zero();
  Vector3 mean_normal = Vector3::UnitZ();
  std::vector<int> neighbors;  // ascending, symmetric
  int size = 0;
};

/// Per-supervertex means and the supervertex adjacency (two supervertices
/// are adjacent when a mesh edge joins them).
std::vector<SupervertexStats> compute_stats(const SceneMesh& mesh,
                                            const SegmentationHierarchy& hierarchy);

/// Restricts stats to `nodes` and renumbers neighbors into local indices.
std::vector<SupervertexStats> restrict_stats(const std::vector<SupervertexStats>& stats,
                                             const std::vector<int>& nodes);

/// 3D Gaussian with cached inverse and log-determinant.
class Gaussian3 {
 public:
  Gaussian3() : Gaussian3(Vector3::Zero(), Matrix3::Identity()) {}
  /// Throws ValidationError if `covariance` is not symmetric positive definite.
  Gaussian3(const Vector3& mean, const Matrix3& covariance);

  const Vector3& mean() const { return mean_; }
  const Matrix3& covariance() const { return covariance_; }

  /// -log N(x; mean, covariance)
  double neg_log_density(const Vector3& x) const;

 private:
  Vector3 mean_;
  Matrix3 covariance_;
  Matrix3 inverse_;
  double log_det_ = 0.0;
};

struct LabelModel {
  Gaussian3 color;
  Gaussian3 normal;
};

/// Size-weighted mean and covariance of the members' mean color and mean
/// normal, with epsilon * I added to both covariances.
LabelModel fit_label(const std::vector<SupervertexStats>& stats, const std::vector<int>& members,
                     double covariance_epsilon = 1e-4);

struct MrfParams {
  double gamma = 0.5;
  double split_penalty = 0.05;  // gamma used by split
  int max_sweeps = 50;
  double covariance_epsilon = 1e-4;

  void validate() const;
};

/// Potts pairwise term: -1 for equal labels, +1 otherwise.
inline double pairwise(int label_i, int label_j) { return label_i == label_j ? -1.0 : 1.0; }

/// Replaces the Potts term for one node pair; used by split to force the
/// stroke endpoints apart. The pair contributes even when not adjacent.
struct PairOverride {
  int a = -1;
  int b = -1;
  double same_cost = 1e9;
  double different_cost = -1.0;

  double operator()(int label_a, int label_b) const {
    return label_a == label_b ? same_cost : different_cost;
  }
};

double unary(const SupervertexStats& node, const LabelModel& model);

/// Sum of unaries plus gamma times the pairwise sum over unordered adjacent
/// pairs (i < j). Throws PreconditionError if a label has no model.
double energy(const std::vector<SupervertexStats>& stats, const std::vector<int>& labels,
              const std::map<int, LabelModel>& models, double gamma,
              const std::optional<PairOverride>& override_pair = std::nullopt);

struct OptimizeResult {
  std::vector<int> labels;             // per node
  std::map<int, LabelModel> models;    // live labels only
  std::vector<double> sweep_energies;  // [initial, after sweep 1, ...]
  int sweeps = 0;
};

/// Neighbor-constrained ICM. Each sweep visits nodes in index order and moves
/// a node to the label (current or a neighbor's) of least local energy. With
/// `refit`, label Gaussians are re-estimated after each sweep; a refit is
/// kept only if it does not raise that label's unary total, so the recorded
/// energies never increase.
OptimizeResult optimize_labels(const std::vector<SupervertexStats>& stats,
                               std::vector<int> labels, std::map<int, LabelModel> models,
                               double gamma, int max_sweeps, bool refit,
                               double covariance_epsilon = 1e-4,
                               const std::optional<PairOverride>& override_pair = std::nullopt);

/// Clusters all supervertices into regions starting from one label per
/// supervertex. Returns the new hierarchy (labels cleared, regions compact).
SegmentationHierarchy optimize(const SegmentationHierarchy& hierarchy,
                               const std::vector<SupervertexStats>& stats,
                               const MrfParams& params = {},
                               std::vector<double>* sweep_energies = nullptr);

struct SplitResult {
  SegmentationHierarchy hierarchy;
  std::vector<int> regions;  // the region ids the split region became
};

/// Re-runs the MRF on one region only with gamma = split_penalty, forcing the
/// two endpoint supervertices into different labels. The original id stays on
/// the part holding the smallest supervertex; other parts get fresh ids.
SplitResult optimize_split(const SegmentationHierarchy& hierarchy,
                           const std::vector<SupervertexStats>& stats, int region,
                           int stroke_start, int stroke_end, const MrfParams& params = {});

}  // namespace scenecarve::mrf
