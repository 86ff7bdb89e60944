#include "scenecarve/shape_search.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "scenecarve/assignment.hpp"
#include "scenecarve/random.hpp"
#include "scenecarve/rigid.hpp"

namespace scenecarve::search {
namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Box3 box_of(const Eigen::Matrix3Xd& points) {
  Box3 box;
  for (Eigen::Index i = 0; i < points.cols(); ++i) box.extend(points.col(i));
  return box;
}

}  // namespace

SceneSamples sample_scene(const SceneMesh& mesh, int count, std::uint64_t seed) {
  if (count < 0) throw ValidationError("sample count must be non-negative");
  SceneSamples out;
  out.points.resize(3, count);
  out.normals.resize(3, count);
  out.vertex.resize(count);
  if (count == 0) return out;
  if (mesh.face_count() == 0) throw PreconditionError("cannot sample a mesh without faces");

  std::vector<double> cumulative(mesh.face_count());
  double total = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vector3 a = mesh.position(mesh.faces(f, 0));
    const Vector3 b = mesh.position(mesh.faces(f, 1));
    const Vector3 c = mesh.position(mesh.faces(f, 2));
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw PreconditionError("cannot sample a mesh with zero surface area");

  Rng rng(seed);
  for (int s = 0; s < count; ++s) {
    const double target = uniform01(rng) * total;
    int f = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), target) -
                             cumulative.begin());
    f = std::min(f, mesh.face_count() - 1);
    const double r1 = std::sqrt(uniform01(rng));
    const double r2 = uniform01(rng);
    const double w[3] = {1.0 - r1, r1 * (1.0 - r2), r1 * r2};
    const Vector3 a = mesh.position(mesh.faces(f, 0));
    const Vector3 b = mesh.position(mesh.faces(f, 1));
    const Vector3 c = mesh.position(mesh.faces(f, 2));
    out.points.col(s) = w[0] * a + w[1] * b + w[2] * c;
    out.normals.col(s) = (b - a).cross(c - a).normalized();
    const int corner = static_cast<int>(std::max_element(w, w + 3) - w);
    out.vertex[s] = mesh.faces(f, corner);
  }
  return out;
}

SampledShape SampledShape::from(Eigen::Matrix3Xd points, Eigen::Matrix3Xd normals,
                                std::vector<int> regions) {
  if (points.cols() != normals.cols()) throw ValidationError("points and normals differ in count");
  SampledShape s;
  s.points = std::move(points);
  s.normals = std::move(normals);
  s.centroid = s.points.cols() > 0 ? Vector3(s.points.rowwise().mean()) : Vector3::Zero();
  s.regions = std::move(regions);
  return s;
}

std::vector<int> farthest_point_indices(const Eigen::Matrix3Xd& points, int count) {
  const int n = static_cast<int>(points.cols());
  count = std::min(count, n);
  std::vector<int> picked;
  if (count <= 0) return picked;
  picked.reserve(count);

  const Vector3 centroid = points.rowwise().mean();
  int first = 0;
  (points.colwise() - centroid).colwise().squaredNorm().minCoeff(&first);
  Eigen::VectorXd dist = (points.colwise() - points.col(first)).colwise().squaredNorm().transpose();
  picked.push_back(first);
  while (static_cast<int>(picked.size()) < count) {
    int next = 0;
    dist.maxCoeff(&next);
    picked.push_back(next);
    dist = dist.cwiseMin((points.colwise() - points.col(next)).colwise().squaredNorm().transpose());
  }
  return picked;
}

SampledShape subsample(const SampledShape& shape, int count) {
  if (count >= shape.size()) return shape;
  std::vector<int> idx = farthest_point_indices(shape.points, count);
  std::sort(idx.begin(), idx.end());
  Eigen::Matrix3Xd p(3, idx.size()), n(3, idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    p.col(i) = shape.points.col(idx[i]);
    n.col(i) = shape.normals.col(idx[i]);
  }
  return SampledShape::from(std::move(p), std::move(n), shape.regions);
}

double mean_pair_distance(const Eigen::Matrix3Xd& points) {
  const Eigen::Index n = points.cols();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) sum += (points.col(i) - points.col(j)).norm();
  }
  return 2.0 * sum / static_cast<double>(n * (n - 1));
}

int radial_bin(double r, const ContextParams& params) {
  if (r < params.r_min) return 0;
  if (r >= params.r_max) return params.radial_bins - 1;
  const int bin = static_cast<int>(std::floor(std::log(r / params.r_min) /
                                              std::log(params.r_max / params.r_min) *
                                              params.radial_bins));
  return std::clamp(bin, 0, params.radial_bins - 1);
}

namespace {

void accumulate_context(const SampledShape& shape, int i, double mean, const ContextParams& params,
                        Eigen::Ref<Eigen::VectorXd> hist) {
  constexpr double kPi = std::numbers::pi;
  const Matrix3 frame = local_frame(shape.points.col(i), shape.normals.col(i), shape.centroid);
  hist.setZero();
  const int n = shape.size();
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const Vector3 u = shape.points.col(i) - shape.points.col(j);
    const Vector3 local = frame.transpose() * u;
    const double len = u.norm();
    const int rb = radial_bin(mean > 0.0 ? len / mean : 0.0, params);
    int tb = 0;
    int pb = 0;
    if (len > 0.0) {
      const double theta = std::acos(std::clamp(local.z() / len, -1.0, 1.0));
      double phi = std::atan2(local.y(), local.x());
      if (phi < 0.0) phi += 2.0 * kPi;
      tb = std::clamp(static_cast<int>(theta / kPi * params.polar_bins), 0, params.polar_bins - 1);
      pb = std::clamp(static_cast<int>(phi / (2.0 * kPi) * params.azimuth_bins), 0,
                      params.azimuth_bins - 1);
    }
    hist[(rb * params.polar_bins + tb) * params.azimuth_bins + pb] += 1.0;
  }
  hist /= static_cast<double>(n - 1);
}

}  // namespace

Eigen::VectorXd shape_context(const SampledShape& shape, int index, const ContextParams& params) {
  if (shape.size() < 2) throw ValidationError("shape context needs at least 2 points");
  if (index < 0 || index >= shape.size()) throw ValidationError("shape context point index out of range");
  Eigen::VectorXd hist(params.dimension());
  accumulate_context(shape, index, mean_pair_distance(shape.points), params, hist);
  return hist;
}

Eigen::MatrixXd shape_contexts(const SampledShape& shape, const ContextParams& params) {
  if (shape.size() < 2) throw ValidationError("shape context needs at least 2 points");
  const double mean = mean_pair_distance(shape.points);
  Eigen::MatrixXd out(params.dimension(), shape.size());
  for (int i = 0; i < shape.size(); ++i) accumulate_context(shape, i, mean, params, out.col(i));
  return out;
}

Matrix4 estimate_rigid(const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst, double inlier_threshold,
                       int iterations, std::uint64_t seed, int* inlier_count) {
  const int k = static_cast<int>(src.cols());
  if (k < 3 || dst.cols() != k) throw PreconditionError("rigid estimation needs 3 or more pairs");
  const double thr2 = inlier_threshold * inlier_threshold;
  const double scale2 = std::max(box_of(src).diagonal().squaredNorm(), 1e-300);

  auto score = [&](const Matrix4& t, std::vector<int>* inliers) {
    const Eigen::VectorXd r2 =
        ((t.block<3, 3>(0, 0) * src).colwise() + t.block<3, 1>(0, 3) - dst).colwise().squaredNorm();
    int count = 0;
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      if (r2[i] < thr2) {
        ++count;
        sum += r2[i];
        if (inliers) inliers->push_back(i);
      }
    }
    return std::make_pair(count, sum);
  };

  Rng rng(seed);
  Matrix4 best = Matrix4::Identity();
  int best_count = -1;
  double best_sum = 0.0;
  Eigen::Matrix3d s3, d3;
  for (int it = 0; it < iterations; ++it) {
    const int a = uniform_index(rng, k);
    int b = uniform_index(rng, k - 1);
    if (b >= a) ++b;
    int c = uniform_index(rng, k - 2);
    if (c >= std::min(a, b)) ++c;
    if (c >= std::max(a, b)) ++c;
    s3 << src.col(a), src.col(b), src.col(c);
    d3 << dst.col(a), dst.col(b), dst.col(c);
    const double area2 = (s3.col(1) - s3.col(0)).cross(s3.col(2) - s3.col(0)).squaredNorm();
    if (area2 <= 1e-12 * scale2 * scale2) continue;
    const Matrix4 t = horn_fit(s3, d3);
    const auto [count, sum] = score(t, nullptr);
    if (count > best_count || (count == best_count && sum < best_sum)) {
      best = t;
      best_count = count;
      best_sum = sum;
    }
  }

  std::vector<int> inliers;
  if (best_count >= 0) score(best, &inliers);
  Matrix4 result;
  if (inliers.size() >= 3) {
    Eigen::Matrix3Xd si(3, inliers.size()), di(3, inliers.size());
    for (std::size_t i = 0; i < inliers.size(); ++i) {
      si.col(i) = src.col(inliers[i]);
      di.col(i) = dst.col(inliers[i]);
    }
    result = horn_fit(si, di);
  } else {
    result = horn_fit(src, dst);
  }
  if (inlier_count) *inlier_count = score(result, nullptr).first;
  return result;
}

MatchResult match_shapes(const SampledShape& v, const SampledShape& y, const MatchParams& params,
                         const Eigen::MatrixXd* y_contexts) {
  if (v.size() < 2 || y.size() < 2) throw ValidationError("shape matching needs at least 2 points per shape");
  const int n = v.size();
  const int m = y.size();
  const Eigen::MatrixXd sv = shape_contexts(v, params.context);
  Eigen::MatrixXd sy_local;
  if (!y_contexts) sy_local = shape_contexts(y, params.context);
  const Eigen::MatrixXd& sy = y_contexts ? *y_contexts : sy_local;
  if (sy.cols() != m || sy.rows() != sv.rows()) throw ValidationError("reference histograms do not fit the shape");

  const int size = std::max(n, m);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(size, size, params.dummy_cost);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) cost(i, j) = chi2(sv.col(i), sy.col(j));
  }
  const Assignment assignment = solve_assignment(cost);

  MatchResult r;
  r.assignment_cost = assignment.total_cost;
  r.v_to_y.assign(n, -1);
  r.y_to_v.assign(m, -1);
  double chi_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = assignment.column_of_row[i];
    if (j < m) {
      r.v_to_y[i] = j;
      r.y_to_v[j] = i;
      chi_sum += cost(i, j);
      ++r.real_pairs;
    }
  }
  r.cost = r.real_pairs > 0 ? chi_sum / r.real_pairs : std::numeric_limits<double>::infinity();

  if (r.real_pairs < 3) {
    r.alignment_error = params.delta;
    return r;
  }

  Eigen::Matrix3Xd src(3, r.real_pairs), dst(3, r.real_pairs);
  for (int i = 0, k = 0; i < n; ++i) {
    if (r.v_to_y[i] < 0) continue;
    src.col(k) = v.points.col(i);
    dst.col(k) = y.points.col(r.v_to_y[i]);
    ++k;
  }
  const double threshold = params.inlier_fraction * box_of(y.points).diagonal().norm();
  r.transform = estimate_rigid(src, dst, threshold, params.ransac_iterations, params.seed, &r.inliers);

  const double penalty = params.delta * params.delta;
  double sum_v = 0.0;
  double sum_y = 0.0;
  for (int i = 0; i < n; ++i) {
    if (r.v_to_y[i] < 0) {
      sum_v += penalty;
      continue;
    }
    const Vector3 moved = apply_rigid(Matrix4(r.transform), v.points.col(i));
    const double e = (y.points.col(r.v_to_y[i]) - moved).squaredNorm();
    sum_v += e;
    sum_y += e;
  }
  sum_y += penalty * (m - r.real_pairs);
  r.alignment_error = std::min(std::sqrt(sum_v / n), std::sqrt(sum_y / m));
  return r;
}

ObjectSearch::ObjectSearch(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy, SearchParams params)
    : mesh_(mesh), hierarchy_(hierarchy), params_(params) {
  if (hierarchy_.vertex_count() != mesh.vertex_count()) {
    throw ValidationError("hierarchy does not cover the mesh vertices");
  }
  samples_ = sample_scene(mesh, params_.scene_samples, params_.sample_seed);
  for (int s = 0; s < samples_.size(); ++s) {
    region_samples_[hierarchy_.region_of_vertex(samples_.vertex[s])].push_back(s);
  }
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const int r = hierarchy_.region_of_vertex(v);
    region_vertices_[r].push_back(v);
    region_boxes_[r].extend(mesh.position(v));
  }
}

void ObjectSearch::set_template(std::vector<int> regions) {
  regions = sorted_unique(std::move(regions));
  if (regions.empty()) throw ValidationError("template has no regions");
  for (int r : regions) {
    if (!region_vertices_.count(r)) throw NotFoundError("template region " + std::to_string(r) + " does not exist");
  }
  Box3 box;
  for (int r : regions) box.extend(region_boxes_.at(r));
  if (!(box.volume() > 0.0)) throw ValidationError("template bounding box has zero volume");

  const std::vector<int> idx = sample_indices(regions);
  if (static_cast<int>(idx.size()) < params_.min_points) {
    throw ValidationError("template has only " + std::to_string(idx.size()) + " samples");
  }
  Eigen::Matrix3Xd p(3, idx.size()), n(3, idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    p.col(i) = samples_.points.col(idx[i]);
    n.col(i) = samples_.normals.col(idx[i]);
  }
  template_regions_ = regions;
  template_box_ = box;
  template_raw_points_ = static_cast<int>(idx.size());
  template_ = subsample(SampledShape::from(std::move(p), std::move(n), regions), params_.template_points);
  template_contexts_ = shape_contexts(template_, params_.match.context);
  memo_.clear();
}

void ObjectSearch::require_template() const {
  if (template_regions_.empty()) throw PreconditionError("no template has been set");
}

std::vector<int> ObjectSearch::sample_indices(const std::vector<int>& regions) const {
  std::vector<int> idx;
  for (int r : regions) {
    auto it = region_samples_.find(r);
    if (it != region_samples_.end()) idx.insert(idx.end(), it->second.begin(), it->second.end());
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::optional<SampledShape> ObjectSearch::shape_of(const std::vector<int>& regions) const {
  require_template();
  const std::vector<int> idx = sample_indices(regions);
  const int raw = static_cast<int>(idx.size());
  if (raw < params_.min_points) return std::nullopt;
  Eigen::Matrix3Xd p(3, raw), n(3, raw);
  for (int i = 0; i < raw; ++i) {
    p.col(i) = samples_.points.col(idx[i]);
    n.col(i) = samples_.normals.col(idx[i]);
  }
  const long target = std::lround(static_cast<double>(raw) * params_.template_points / template_raw_points_);
  const int count = std::min<int>(raw, std::clamp<long>(target, params_.min_points, params_.max_points));
  return subsample(SampledShape::from(std::move(p), std::move(n), regions), count);
}

Evaluation ObjectSearch::evaluate(std::vector<int> regions) {
  require_template();
  regions = sorted_unique(std::move(regions));
  ++requests_;
  if (auto it = memo_.find(regions); it != memo_.end()) return it->second;
  ++runs_;
  Evaluation e;
  if (const auto shape = shape_of(regions)) {
    const MatchResult m = match_shapes(*shape, template_, params_.match, &template_contexts_);
    e.valid = true;
    e.cost = m.cost;
    e.alignment_error = m.alignment_error;
    e.transform = m.transform;
    e.points = shape->size();
  }
  memo_.emplace(std::move(regions), e);
  return e;
}

std::vector<int> ObjectSearch::regions_in_box(const Box3& box) const {
  std::vector<int> out;
  for (const auto& [r, rbox] : region_boxes_) {
    if (!box.intersects(rbox)) continue;
    for (int v : region_vertices_.at(r)) {
      if (box.contains(mesh_.position(v))) {
        out.push_back(r);
        break;
      }
    }
  }
  return out;
}

std::vector<int> ObjectSearch::grow_shrink(std::vector<int> seed, const std::vector<int>& window_regions) {
  seed = sorted_unique(std::move(seed));
  if (seed.empty()) return {};
  const std::vector<int> window = sorted_unique(window_regions);

  auto improves = [&](const Evaluation& e, const Evaluation& best) {
    return e.valid && e.cost < best.cost &&
           (!params_.accept.use_alignment || e.alignment_error < params_.accept.tau_a);
  };

  std::vector<int> a = seed;
  Evaluation best = evaluate(a);
  for (int it = 0; it < params_.iterations; ++it) {
    const std::vector<int> before = a;

    std::vector<int> m = a;
    for (int r : window) {
      if (std::binary_search(m.begin(), m.end(), r)) continue;
      std::vector<int> cand = m;
      cand.insert(std::upper_bound(cand.begin(), cand.end(), r), r);
      const Evaluation e = evaluate(cand);
      if (improves(e, best)) {
        a = std::move(cand);
        best = e;
      }
    }

    m = a;
    for (int r : m) {
      std::vector<int> cand;
      cand.reserve(m.size());
      for (int x : m) {
        if (x != r) cand.push_back(x);
      }
      if (cand.empty()) continue;
      const Evaluation e = evaluate(cand);
      if (improves(e, best)) {
        a = std::move(cand);
        best = e;
      }
    }

    if (a == before) break;  // fixed point: later iterations repeat this one
  }
  return a;
}

std::vector<Box3> ObjectSearch::window_placements() const {
  require_template();
  const Box3 scene = bounding_box(mesh_);
  const Vector3 ext = template_box_.sizes();
  const Vector3 span = scene.sizes();
  int counts[3];
  for (int k = 0; k < 3; ++k) {
    counts[k] = std::max(1, static_cast<int>(std::ceil(span[k] / ext[k] - 1e-9)));
  }
  std::vector<Box3> out;
  for (int iz = 0; iz < counts[2]; ++iz) {
    for (int iy = 0; iy < counts[1]; ++iy) {
      for (int ix = 0; ix < counts[0]; ++ix) {
        const Vector3 lo = scene.min() + Vector3(ix * ext.x(), iy * ext.y(), iz * ext.z());
        out.emplace_back(lo, lo + ext);
      }
    }
  }
  return out;
}

std::vector<Candidate> ObjectSearch::search() {
  require_template();
  std::set<int> claimed(template_regions_.begin(), template_regions_.end());
  std::vector<Candidate> out;
  for (const Box3& window : window_placements()) {
    std::vector<int> regions;
    for (int r : regions_in_box(window)) {
      if (!claimed.count(r)) regions.push_back(r);
    }
    if (regions.empty()) continue;
    std::vector<int> found = grow_shrink(regions, regions);
    if (found.empty()) continue;
    const Evaluation e = evaluate(found);
    if (!e.valid || !accept_match(e.cost, e.alignment_error, params_.accept)) continue;
    claimed.insert(found.begin(), found.end());
    out.push_back({std::move(found), e, true});
  }
  return out;
}

Candidate ObjectSearch::guided_merge(int seed_region) {
  require_template();
  auto it = region_vertices_.find(seed_region);
  if (it == region_vertices_.end()) {
    throw NotFoundError("region " + std::to_string(seed_region) + " does not exist");
  }
  Vector3 centroid = Vector3::Zero();
  for (int v : it->second) centroid += mesh_.position(v);
  centroid /= static_cast<double>(it->second.size());
  const Vector3 half = template_box_.sizes() / 2.0;
  const Box3 window(centroid - half, centroid + half);

  std::vector<int> regions;
  for (int r : regions_in_box(window)) {
    if (!std::binary_search(template_regions_.begin(), template_regions_.end(), r)) regions.push_back(r);
  }
  if (!std::binary_search(regions.begin(), regions.end(), seed_region)) {
    regions.insert(std::upper_bound(regions.begin(), regions.end(), seed_region), seed_region);
  }
  Candidate c;
  c.regions = grow_shrink({seed_region}, regions);
  c.evaluation = evaluate(c.regions);
  c.accepted = c.evaluation.valid && accept_match(c.evaluation.cost, c.evaluation.alignment_error, params_.accept);
  return c;
}

}  // namespace scenecarve::search
