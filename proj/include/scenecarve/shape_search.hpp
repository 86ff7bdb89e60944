#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "scenecarve/hierarchy.hpp"
#include "scenecarve/mesh.hpp"

namespace scenecarve::search {

/// Surface samples; columns are points. `vertex` is the triangle corner
/// closest to each sample and decides its region.
struct SceneSamples {
  Eigen::Matrix3Xd points;
  Eigen::Matrix3Xd normals;
  std::vector<int> vertex;

  int size() const { return static_cast<int>(points.cols()); }
};

/// Area-weighted uniform samples with the triangle's geometric normal.
/// Deterministic for a given seed on every platform.
SceneSamples sample_scene(const SceneMesh& mesh, int count, std::uint64_t seed = 1);

struct SampledShape {
  Eigen::Matrix3Xd points;
  Eigen::Matrix3Xd normals;
  Vector3 centroid = Vector3::Zero();
  std::vector<int> regions;

  int size() const { return static_cast<int>(points.cols()); }

  static SampledShape from(Eigen::Matrix3Xd points, Eigen::Matrix3Xd normals,
                           std::vector<int> regions = {});
};

/// Farthest-point subset of `count` columns, starting from the point closest
/// to the centroid. Returns indices in selection order.
std::vector<int> farthest_point_indices(const Eigen::Matrix3Xd& points, int count);

SampledShape subsample(const SampledShape& shape, int count);

/// Columns are x, y, z of the frame at `point`: z is the normal, x the unit
/// component of (centroid - point) orthogonal to it. When that component
/// vanishes the x axis is built from the coordinate axis least aligned with
/// the normal.
template <typename DerivedP, typename DerivedN, typename DerivedC>
Matrix3T<typename DerivedP::Scalar> local_frame(const Eigen::MatrixBase<DerivedP>& point,
                                                const Eigen::MatrixBase<DerivedN>& normal,
                                                const Eigen::MatrixBase<DerivedC>& centroid) {
  using Scalar = typename DerivedP::Scalar;
  using Vec = Vector3T<Scalar>;
  const Vec z = normal;
  const Vec t = centroid - point;
  Vec x = t - t.dot(z) * z;
  const Scalar t_norm = t.norm();
  if (!(t_norm > Scalar(0)) || x.norm() <= Scalar(1e-6) * t_norm) {
    int axis = 0;
    for (int k = 1; k < 3; ++k) {
      if (std::abs(z[k]) < std::abs(z[axis])) axis = k;
    }
    const Vec e = Vec::Unit(axis);
    x = e - e.dot(z) * z;
  }
  x.normalize();
  Matrix3T<Scalar> frame;
  frame.col(0) = x;
  frame.col(1) = z.cross(x);
  frame.col(2) = z;
  return frame;
}

struct ContextParams {
  int radial_bins = 5;
  int polar_bins = 6;
  int azimuth_bins = 6;
  double r_min = 0.125;
  double r_max = 2.0;

  int dimension() const { return radial_bins * polar_bins * azimuth_bins; }
};

/// Mean length of u_ij over all ordered pairs i != j.
double mean_pair_distance(const Eigen::Matrix3Xd& points);

/// Log-radial bin of a mean-normalized length; underflow goes to bin 0 and
/// overflow to the last bin.
int radial_bin(double r, const ContextParams& params = {});

/// Histogram for one point, normalized to sum 1. Throws ValidationError for
/// shapes with fewer than 2 points.
Eigen::VectorXd shape_context(const SampledShape& shape, int index,
                              const ContextParams& params = {});

/// All histograms as columns (dimension x N).
Eigen::MatrixXd shape_contexts(const SampledShape& shape, const ContextParams& params = {});

/// Half the sum of (s-t)^2/(s+t); bins where s+t == 0 add nothing.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar chi2(const Eigen::MatrixBase<DerivedA>& s,
                               const Eigen::MatrixBase<DerivedB>& t) {
  using Scalar = typename DerivedA::Scalar;
  if (s.size() != t.size()) throw ValidationError("chi2 histogram dimensions differ");
  Scalar sum(0);
  for (Eigen::Index b = 0; b < s.size(); ++b) {
    const Scalar den = s[b] + t[b];
    if (den > Scalar(0)) {
      const Scalar diff = s[b] - t[b];
      sum += diff * diff / den;
    }
  }
  return sum / Scalar(2);
}

struct MatchParams {
  double dummy_cost = 0.35;
  double delta = 2.0;
  int ransac_iterations = 256;
  double inlier_fraction = 0.05;  // of the reference shape's AABB diagonal
  std::uint64_t seed = 1;
  ContextParams context;
};

struct MatchResult {
  std::vector<int> v_to_y;  // -1 marks a dummy partner
  std::vector<int> y_to_v;
  double assignment_cost = 0.0;  // includes dummy entries
  double cost = 0.0;             // C: mean chi2 over real-real pairs
  Matrix4 transform = Matrix4::Identity();
  double alignment_error = 0.0;  // E
  int real_pairs = 0;
  int inliers = 0;
};

/// Matches V against Y and aligns V onto Y. `y_contexts` may be supplied to
/// skip recomputing the reference histograms.
MatchResult match_shapes(const SampledShape& v, const SampledShape& y, const MatchParams& params = {},
                         const Eigen::MatrixXd* y_contexts = nullptr);

/// Rigid transform by RANSAC over minimal triples followed by a refit on the
/// inliers of the best hypothesis.
Matrix4 estimate_rigid(const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst, double inlier_threshold,
                       int iterations, std::uint64_t seed, int* inlier_count = nullptr);

struct AcceptParams {
  double tau_s = 0.7;
  double tau_a = 0.4;
  bool use_alignment = true;
};

inline bool accept_match(double cost, double alignment_error, const AcceptParams& params = {}) {
  return cost < params.tau_s && (!params.use_alignment || alignment_error < params.tau_a);
}
inline bool accept_match(const MatchResult& r, const AcceptParams& params = {}) {
  return accept_match(r.cost, r.alignment_error, params);
}

struct SearchParams {
  int scene_samples = 20000;
  std::uint64_t sample_seed = 1;
  int template_points = 150;
  int max_points = 200;
  int min_points = 20;
  int iterations = 10;
  MatchParams match;
  AcceptParams accept;
};

struct Evaluation {
  bool valid = false;  // false for empty or undersampled region sets
  double cost = std::numeric_limits<double>::infinity();
  double alignment_error = std::numeric_limits<double>::infinity();
  Matrix4 transform = Matrix4::Identity();
  int points = 0;
};

struct Candidate {
  std::vector<int> regions;
  Evaluation evaluation;
  bool accepted = false;
};

/// Object search over one hierarchy snapshot. Evaluations are memoized per
/// region set, so the same union is never matched twice.
class ObjectSearch {
 public:
  ObjectSearch(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy, SearchParams params = {});

  const SearchParams& params() const { return params_; }
  const SceneSamples& samples() const { return samples_; }

  /// Throws NotFoundError for unknown regions, ValidationError for an empty
  /// or zero-volume template.
  void set_template(std::vector<int> regions);
  const SampledShape& template_shape() const { return template_; }
  const Box3& template_box() const { return template_box_; }
  const std::vector<int>& template_regions() const { return template_regions_; }

  /// Sample indices of a region set, ascending.
  std::vector<int> sample_indices(const std::vector<int>& regions) const;
  /// Shape of the union of the regions' samples, resampled in proportion to
  /// the template; nullopt when fewer than min_points samples remain.
  std::optional<SampledShape> shape_of(const std::vector<int>& regions) const;

  Evaluation evaluate(std::vector<int> regions);
  /// Evaluation requests (including memo hits) and actual matches run.
  long long evaluation_requests() const { return requests_; }
  long long evaluation_runs() const { return runs_; }

  /// Regions with at least one vertex inside the box, ascending.
  std::vector<int> regions_in_box(const Box3& box) const;

  /// Greedy add/remove refinement of `seed` within `window_regions`.
  std::vector<int> grow_shrink(std::vector<int> seed, const std::vector<int>& window_regions);

  /// Sliding-window scan; template regions are never returned and regions of
  /// an accepted candidate are withheld from later windows.
  std::vector<Candidate> search();

  /// Grow-shrink from one region inside a template-sized window centered on
  /// it. The result is not filtered by the acceptance test.
  Candidate guided_merge(int seed_region);

  std::vector<Box3> window_placements() const;

 private:
  void require_template() const;

  const SceneMesh& mesh_;
  SegmentationHierarchy hierarchy_;
  SearchParams params_;
  SceneSamples samples_;
  std::map<int, std::vector<int>> region_samples_;
  std::map<int, std::vector<int>> region_vertices_;
  std::map<int, Box3> region_boxes_;

  std::vector<int> template_regions_;
  SampledShape template_;
  Eigen::MatrixXd template_contexts_;
  Box3 template_box_;
  int template_raw_points_ = 0;

  std::map<std::vector<int>, Evaluation> memo_;
  long long requests_ = 0;
  long long runs_ = 0;
};

}  // namespace scenecarve::search
