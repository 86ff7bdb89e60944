#include "scenecarve/eval_metrics.hpp"

#include <algorithm>
#include <map>
#include <tuple>
#include <unordered_map>

namespace scenecarve::eval {

double directed_consistency_error(const LabeledPartition& a, const LabeledPartition& b) {
  if (a.size() != b.size()) throw ValidationError("partitions cover different universes");
  if (a.empty()) throw ValidationError("partitions are empty");
  const double n = static_cast<double>(a.size());

  std::unordered_map<int, long long> size_a, size_b;
  std::map<std::pair<int, int>, long long> overlap;  // (b segment, a segment)
  for (std::size_t e = 0; e < a.size(); ++e) {
    ++size_a[a[e]];
    ++size_b[b[e]];
    ++overlap[{b[e], a[e]}];
  }

  double error = 0.0;
  auto it = overlap.begin();
  while (it != overlap.end()) {
    const int bj = it->first.first;
    const double bj_size = static_cast<double>(size_b[bj]);
    double agreement = 0.0;
    // Sum over A_i that intersect B_j; the intersection weights sum to |B_j|.
    for (; it != overlap.end() && it->first.first == bj; ++it) {
      const double inter = static_cast<double>(it->second);
      const double uni = bj_size + static_cast<double>(size_a[it->first.second]) - inter;
      agreement += (inter / uni) * (inter / bj_size);
    }
    error += (bj_size / n) * (1.0 - agreement);
  }
  return error;
}

double oce(const LabeledPartition& segmented, const LabeledPartition& ground_truth) {
  return std::min(directed_consistency_error(segmented, ground_truth),
                  directed_consistency_error(ground_truth, segmented));
}

double point_iou(std::vector<int> detected, std::vector<int> truth) {
  if (detected.empty() && truth.empty()) {
    throw ValidationError("IoU is undefined when both sets are empty");
  }
  std::sort(detected.begin(), detected.end());
  detected.erase(std::unique(detected.begin(), detected.end()), detected.end());
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
  std::vector<int> inter;
  std::set_intersection(detected.begin(), detected.end(), truth.begin(), truth.end(),
                        std::back_inserter(inter));
  const double uni = static_cast<double>(detected.size() + truth.size() - inter.size());
  return static_cast<double>(inter.size()) / uni;
}

DetectionScores detection_prf(const std::vector<std::vector<int>>& candidates,
                              const std::vector<std::vector<int>>& truths) {
  std::vector<std::tuple<double, int, int>> pairs;
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    for (int t = 0; t < static_cast<int>(truths.size()); ++t) {
      if (candidates[c].empty() && truths[t].empty()) continue;
      const double iou = point_iou(candidates[c], truths[t]);
      if (is_true_detection(iou)) pairs.emplace_back(iou, c, t);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
    if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
    return std::make_pair(std::get<1>(x), std::get<2>(x)) <
           std::make_pair(std::get<1>(y), std::get<2>(y));
  });
  std::vector<char> cand_used(candidates.size(), 0), truth_used(truths.size(), 0);
  DetectionScores s;
  for (const auto& [iou, c, t] : pairs) {
    if (cand_used[c] || truth_used[t]) continue;
    cand_used[c] = truth_used[t] = 1;
    ++s.true_positives;
  }
  s.precision = candidates.empty() ? 0.0 : double(s.true_positives) / candidates.size();
  s.recall = truths.empty() ? 0.0 : double(s.true_positives) / truths.size();
  s.f_measure = (s.precision + s.recall) > 0.0
                    ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                    : 0.0;
  return s;
}

}  // namespace scenecarve::eval
