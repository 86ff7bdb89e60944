#include "scenecarve/mrf_seg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Cholesky>

namespace scenecarve::mrf {

std::vector<SupervertexStats> compute_stats(const SceneMesh& mesh,
                                            const SegmentationHierarchy& hierarchy) {
  if (hierarchy.vertex_count() != mesh.vertex_count()) {
    throw PreconditionError("hierarchy does not match mesh vertex count");
  }
  const int s_count = hierarchy.supervertex_count();
  std::vector<SupervertexStats> stats(s_count);
  std::vector<Vector3> color_sum(s_count, Vector3::Zero());
  std::vector<Vector3> normal_sum(s_count, Vector3::Zero());
  const bool has_colors = mesh.colors.rows() == mesh.vertex_count();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const int s = hierarchy.supervertex_of[v];
    ++stats[s].size;
    color_sum[s] += has_colors ? mesh.color(v) : Vector3::Constant(0.5);
    normal_sum[s] += mesh.normal(v);
  }
  for (int s = 0; s < s_count; ++s) {
    if (stats[s].size == 0) continue;
    stats[s].mean_color = color_sum[s] / stats[s].size;
    const double len = normal_sum[s].norm();
    stats[s].mean_normal = len > 1e-12 ? Vector3(normal_sum[s] / len) : Vector3::UnitZ();
  }
  std::set<std::pair<int, int>> adjacent;
  for (const auto& [a, b] : mesh_edges(mesh)) {
    const int sa = hierarchy.supervertex_of[a];
    const int sb = hierarchy.supervertex_of[b];
    if (sa != sb) adjacent.emplace(std::min(sa, sb), std::max(sa, sb));
  }
  for (const auto& [sa, sb] : adjacent) {
    stats[sa].neighbors.push_back(sb);
    stats[sb].neighbors.push_back(sa);
  }
  for (auto& s : stats) std::sort(s.neighbors.begin(), s.neighbors.end());
  return stats;
}

std::vector<SupervertexStats> restrict_stats(const std::vector<SupervertexStats>& stats,
                                             const std::vector<int>& nodes) {
  std::map<int, int> local;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) local[nodes[i]] = i;
  std::vector<SupervertexStats> out;
  out.reserve(nodes.size());
  for (int node : nodes) {
    SupervertexStats s = stats[node];
    s.neighbors.clear();
    for (int nb : stats[node].neighbors) {
      if (auto it = local.find(nb); it != local.end()) s.neighbors.push_back(it->second);
    }
    std::sort(s.neighbors.begin(), s.neighbors.end());
    out.push_back(std::move(s));
  }
  return out;
}

Gaussian3::Gaussian3(const Vector3& mean, const Matrix3& covariance)
    : mean_(mean), covariance_(covariance) {
  Eigen::LLT<Matrix3> llt(covariance_);
  if (llt.info() != Eigen::Success || !covariance_.isApprox(covariance_.transpose())) {
    throw ValidationError("Gaussian covariance must be symmetric positive definite");
  }
  inverse_ = llt.solve(Matrix3::Identity());
  const Matrix3 l = llt.matrixL();
  log_det_ = 2.0 * l.diagonal().array().log().sum();
}

double Gaussian3::neg_log_density(const Vector3& x) const {
  const Vector3 d = x - mean_;
  return 0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + log_det_ + d.dot(inverse_ * d));
}

LabelModel fit_label(const std::vector<SupervertexStats>& stats, const std::vector<int>& members,
                     double covariance_epsilon) {
  double total = 0.0;
  Vector3 mean_c = Vector3::Zero();
  Vector3 mean_n = Vector3::Zero();
  for (int m : members) {
    const double w = std::max(1, stats[m].size);
    total += w;
    mean_c += w * stats[m].mean_color;
    mean_n += w * stats[m].mean_normal;
  }
  mean_c /= total;
  mean_n /= total;
  Matrix3 cov_c = Matrix3::Zero();
  Matrix3 cov_n = Matrix3::Zero();
  for (int m : members) {
    const double w = std::max(1, stats[m].size) / total;
    const Vector3 dc = stats[m].mean_color - mean_c;
    const Vector3 dn = stats[m].mean_normal - mean_n;
    cov_c += w * dc * dc.transpose();
    cov_n += w * dn * dn.transpose();
  }
  const Matrix3 reg = covariance_epsilon * Matrix3::Identity();
  return {Gaussian3(mean_c, cov_c + reg), Gaussian3(mean_n, cov_n + reg)};
}

void MrfParams::validate() const {
  if (!(gamma >= 0.0)) throw ValidationError("mrf gamma must be >= 0");
  if (!(split_penalty > 0.0)) throw ValidationError("split gamma must be > 0");
  if (max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
  if (!(covariance_epsilon > 0.0)) throw ValidationError("covariance epsilon must be > 0");
}

double unary(const SupervertexStats& node, const LabelModel& model) {
  return model.color.neg_log_density(node.mean_color) +
         model.normal.neg_log_density(node.mean_normal);
}

double energy(const std::vector<SupervertexStats>& stats, const std::vector<int>& labels,
              const std::map<int, LabelModel>& models, double gamma,
              const std::optional<PairOverride>& override_pair) {
  double total = 0.0;
  bool override_adjacent = false;
  for (int i = 0; i < static_cast<int>(stats.size()); ++i) {
    const auto it = models.find(labels[i]);
    if (it == models.end()) {
      throw PreconditionError("label " + std::to_string(labels[i]) + " has no model");
    }
    total += unary(stats[i], it->second);
    for (int j : stats[i].neighbors) {
      if (j <= i) continue;
      if (override_pair && std::minmax(i, j) == std::minmax(override_pair->a, override_pair->b)) {
        override_adjacent = true;
        total += gamma * (*override_pair)(labels[i], labels[j]);
      } else {
        total += gamma * pairwise(labels[i], labels[j]);
      }
    }
  }
  if (override_pair && !override_adjacent) {
    total += gamma * (*override_pair)(labels[override_pair->a], labels[override_pair->b]);
  }
  return total;
}

OptimizeResult optimize_labels(const std::vector<SupervertexStats>& stats,
                               std::vector<int> labels, std::map<int, LabelModel> models,
                               double gamma, int max_sweeps, bool refit,
                               double covariance_epsilon,
                               const std::optional<PairOverride>& override_pair) {
  const int n = static_cast<int>(stats.size());
  OptimizeResult result;

  auto partner_of = [&](int i) -> int {
    if (!override_pair) return -1;
    if (i == override_pair->a) return override_pair->b;
    if (i == override_pair->b) return override_pair->a;
    return -1;
  };

  // Energy terms that involve node i when it carries `label`.
  auto local_cost = [&](int i, int label) {
    double cost = unary(stats[i], models.at(label));
    const int partner = partner_of(i);
    for (int j : stats[i].neighbors) {
      if (j == partner) continue;
      cost += gamma * pairwise(label, labels[j]);
    }
    if (partner >= 0) cost += gamma * (*override_pair)(label, labels[partner]);
    return cost;
  };

  result.sweep_energies.push_back(energy(stats, labels, models, gamma, override_pair));
  std::vector<int> candidates;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      candidates.clear();
      for (int j : stats[i].neighbors) candidates.push_back(labels[j]);
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

      int best = labels[i];
      double best_cost = local_cost(i, best);
      for (int label : candidates) {
        if (label == labels[i]) continue;
        const double cost = local_cost(i, label);
        if (cost < best_cost) {
          best_cost = cost;
          best = label;
        }
      }
      if (best != labels[i]) {
        labels[i] = best;
        moved = true;
      }
    }

    std::map<int, std::vector<int>> members;
    for (int i = 0; i < n; ++i) members[labels[i]].push_back(i);
    for (auto it = models.begin(); it != models.end();) {
      it = members.count(it->first) ? std::next(it) : models.erase(it);
    }
    if (refit) {
      for (const auto& [label, nodes] : members) {
        LabelModel candidate = fit_label(stats, nodes, covariance_epsilon);
        double old_total = 0.0;
        double new_total = 0.0;
        for (int i : nodes) {
          old_total += unary(stats[i], models.at(label));
          new_total += unary(stats[i], candidate);
        }
        if (new_total <= old_total) models.at(label) = std::move(candidate);
      }
    }
    result.sweep_energies.push_back(energy(stats, labels, models, gamma, override_pair));
    result.sweeps = sweep + 1;
    if (!moved) break;
  }
  result.labels = std::move(labels);
  result.models = std::move(models);
  return result;
}

namespace {

OptimizeResult optimize_from_singletons(const std::vector<SupervertexStats>& local, double gamma,
                                        const MrfParams& params,
                                        const std::optional<PairOverride>& override_pair) {
  const int n = static_cast<int>(local.size());
  std::vector<int> labels(n);
  std::map<int, LabelModel> models;
  for (int i = 0; i < n; ++i) {
    labels[i] = i;
    models.emplace(i, fit_label(local, {i}, params.covariance_epsilon));
  }
  return optimize_labels(local, std::move(labels), std::move(models), gamma, params.max_sweeps,
                         true, params.covariance_epsilon, override_pair);
}

}  // namespace

SegmentationHierarchy optimize(const SegmentationHierarchy& hierarchy,
                               const std::vector<SupervertexStats>& stats,
                               const MrfParams& params, std::vector<double>* sweep_energies) {
  params.validate();
  if (static_cast<int>(stats.size()) != hierarchy.supervertex_count()) {
    throw PreconditionError("stats do not match the supervertex level");
  }
  SegmentationHierarchy out = hierarchy;
  out.labels.clear();
  if (stats.size() <= 1) {
    out.region_of.assign(stats.size(), 0);
    if (sweep_energies) sweep_energies->clear();
    return out;
  }
  const OptimizeResult result = optimize_from_singletons(stats, params.gamma, params, std::nullopt);
  out.region_of = result.labels;
  out.compact_regions();
  if (sweep_energies) *sweep_energies = result.sweep_energies;
  return out;
}

SplitResult optimize_split(const SegmentationHierarchy& hierarchy,
                           const std::vector<SupervertexStats>& stats, int region,
                           int stroke_start, int stroke_end, const MrfParams& params) {
  params.validate();
  const std::vector<int> nodes = hierarchy.members(region);
  if (nodes.empty()) throw NotFoundError("unknown region " + std::to_string(region));
  auto local_index = [&](int sv) {
    const auto it = std::find(nodes.begin(), nodes.end(), sv);
    if (it == nodes.end()) {
      throw PreconditionError("stroke endpoint supervertex " + std::to_string(sv) +
                              " is not in region " + std::to_string(region));
    }
    return static_cast<int>(it - nodes.begin());
  };
  const int a = local_index(stroke_start);
  const int b = local_index(stroke_end);
  if (a == b) throw PreconditionError("stroke endpoints fall in the same supervertex");

  const auto local = restrict_stats(stats, nodes);
  const OptimizeResult result =
      optimize_from_singletons(local, params.split_penalty, params, PairOverride{a, b});

  // Parts ordered by their smallest member; the first keeps the region id.
  std::map<int, int> region_of_label;
  SplitResult out{hierarchy, {}};
  int next_id = hierarchy.max_region_id() + 1;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    const int label = result.labels[i];
    auto [it, inserted] = region_of_label.try_emplace(label, -1);
    if (inserted) {
      it->second = region_of_label.size() == 1 ? region : next_id++;
      out.regions.push_back(it->second);
    }
    out.hierarchy.region_of[nodes[i]] = it->second;
  }
  return out;
}

}  // namespace scenecarve::mrf
