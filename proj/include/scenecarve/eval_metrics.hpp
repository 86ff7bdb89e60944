#pragma once

#include <vector>

#include "scenecarve/types.hpp"

namespace scenecarve::eval {

/// Element -> segment id over a fixed universe (vertices or pixels). Segment
/// ids need not be dense.
using LabeledPartition = std::vector<int>;

/// Directed object-level consistency error of `a` measured against the
/// segments of `b`:
///   E(A,B) = sum_j |B_j|/N * [1 - sum_i IoU(B_j, A_i) * |A_i & B_j| / |B_j|]
double directed_consistency_error(const LabeledPartition& a, const LabeledPartition& b);

/// OCE = min(E(S,G), E(G,S)); 0 iff the partitions are identical up to
/// renaming. Throws ValidationError on size mismatch or an empty universe.
double oce(const LabeledPartition& segmented, const LabeledPartition& ground_truth);

/// |A & B| / |A | B| on vertex-index sets. Throws ValidationError when both
/// are empty.
double point_iou(std::vector<int> detected, std::vector<int> truth);

/// True detection criterion: IoU strictly above 0.5.
inline bool is_true_detection(double iou) { return iou > 0.5; }

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  int true_positives = 0;
};

/// Greedy one-to-one matching by descending IoU; a pair counts only when its
/// IoU is strictly above 0.5. Zero denominators yield 0.
DetectionScores detection_prf(const std::vector<std::vector<int>>& candidates,
                              const std::vector<std::vector<int>>& truths);

}  // namespace scenecarve::eval
