#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scenecarve/camera.hpp"
#include "scenecarve/hierarchy.hpp"
#include "scenecarve/image.hpp"
#include "scenecarve/mesh.hpp"

namespace scenecarve::proj2d {

struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

using Contour = std::vector<Pixel>;

struct RegionMask {
  int frame_id = 0;
  int region = -1;
  Mask mask;        // height x width
  Contour contour;  // Moore order, clockwise on screen, starting top-left

  bool empty() const { return contour.empty(); }
};

/// Region owning a face: the region of at least two of its corners,
/// otherwise the region of corner 0.
int face_region(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy, int face);

/// Pixels where the region is front-most in the depth buffer, reduced to the
/// largest 8-connected component. An invisible region yields an empty mask.
RegionMask project_region(const DepthBuffer& depth, const SceneMesh& mesh,
                          const SegmentationHierarchy& hierarchy, int region, int frame_id = 0);
RegionMask project_region(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy, int region,
                          const Camera& camera, int frame_id = 0);

/// Largest 8-connected component; ties go to the component found first in
/// raster order.
Mask largest_component(const Mask& mask);

/// Moore-neighbor boundary trace of the component holding the first set
/// pixel in raster order, stopped on re-entering the start pixel in the
/// start direction. Empty for an empty mask.
Contour moore_trace(const Mask& mask);

/// Edge pixels with a per-pixel index for neighborhood queries.
class EdgeMap {
 public:
  EdgeMap() = default;
  /// Any non-zero pixel is an edge.
  explicit EdgeMap(const Mask& mask);

  int width() const { return static_cast<int>(mask_.cols()); }
  int height() const { return static_cast<int>(mask_.rows()); }
  const Mask& mask() const { return mask_; }
  const std::vector<Pixel>& points() const { return points_; }
  bool empty() const { return points_.empty(); }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width() && y < height() && mask_(y, x) != 0;
  }

  /// Up to k edge points strictly closer than `radius`, nearest first; ties
  /// by row, then column.
  std::vector<Pixel> nearest(Pixel p, int k, double radius) const;

 private:
  Mask mask_;
  std::vector<Pixel> points_;
};

struct CannyParams {
  double sigma = 1.4;
  double high_percentile = 0.9;  // of the gradient magnitudes over all pixels
  double low_ratio = 0.1;
};

GrayImage gaussian_blur(const GrayImage& image, double sigma);

/// Canny with Sobel gradients, four-direction non-maximum suppression and
/// 8-connected hysteresis.
Mask canny(const GrayImage& image, const CannyParams& params = {});

/// Runs Canny unless a precomputed edge mask is given, which is used as is.
class EdgeDetector {
 public:
  explicit EdgeDetector(CannyParams params = {}) : params_(params) {}

  EdgeMap detect(const RgbImage& image, const Mask* precomputed = nullptr);
  int canny_calls() const { return canny_calls_; }

 private:
  CannyParams params_;
  int canny_calls_ = 0;
};

constexpr int kHistBins = 16;
using LocalHist = Eigen::Matrix<double, kHistBins, 1>;

/// Half side of the square window at this resolution: 10 (a 21 x 21 window)
/// at 640 x 480, scaled with the larger image dimension ratio.
int hist_half_window(int width, int height);

/// Orientation bin in [0, 16) of an integer offset; exact under 90 degree
/// rotations (which shift the bin by 4). Angles follow atan2(dy, dx).
int orientation_bin(int dx, int dy);

/// Histogram of the orientations from `center` to the set pixels of `set`
/// inside the window, normalized to sum 1; all-zero when the window holds no
/// other set pixel.
LocalHist local_hist(const Mask& set, Pixel center, int half_window);

/// Chi-squared distance between local histograms; 1 when exactly one of them
/// is empty.
double hist_chi2(const LocalHist& a, const LocalHist& b);

struct AlignParams {
  double kappa_continuity = 0.1;
  double kappa_smoothness = 3.0;
  int candidates = 30;
  double radius_fraction = 0.1;  // of max(width, height)
};

enum class AlignMode { kProjection, kLocal, kContinuity, kSmoothness, kFull };

std::string to_string(AlignMode mode);
AlignMode parse_align_mode(const std::string& name);

/// The cue weights a mode keeps; the projection mode is never aligned.
AlignParams params_for(AlignMode mode, AlignParams base = {});

/// Dissimilarity table of one contour: candidate pixels per contour point
/// and the local-shape cost of each.
struct CandidateTable {
  std::vector<std::vector<Pixel>> pixels;
  std::vector<std::vector<double>> local_cost;
  bool no_edges = false;  // no contour point had an edge within reach
};

CandidateTable build_candidates(const Contour& contour, const EdgeMap& edges, const AlignParams& params);

struct AlignResult {
  Contour mapped;
  std::vector<int> choice;  // candidate index per contour point
  double cost = 0.0;
  bool no_edges = false;
};

/// Exact minimizer of local-shape cost plus weighted continuity and
/// smoothness over the candidate table, by dynamic programming over pairs of
/// consecutive choices. The contour is treated as open at its first point.
AlignResult solve_alignment(const CandidateTable& table, const AlignParams& params);

/// Objective of a given choice vector, recomputed term by term.
double alignment_cost(const CandidateTable& table, const std::vector<int>& choice, const AlignParams& params);

/// Requires at least 3 contour points. Returns the contour unchanged with
/// `no_edges` set when no point has an edge candidate.
AlignResult align_contour(const Contour& contour, const EdgeMap& edges, const AlignParams& params = {});

/// Closes the polygon with Bresenham segments and fills everything not
/// 4-connected to the image border.
Mask contour_to_mask(const Contour& contour, int width, int height);

struct AblationResult {
  AlignMode mode = AlignMode::kFull;
  Contour contour;
  Mask mask;
  double oce = 0.0;
};

/// Aligns the projected mask's contour under one cue setting and scores the
/// resulting mask against the truth with the pixel-level OCE.
AblationResult ablate_alignment(const Mask& projected, const EdgeMap& edges, const Mask& truth, AlignMode mode,
                                const AlignParams& base = {});

/// Pixel partition (0 / 1 labels) of a mask.
std::vector<int> mask_labels(const Mask& mask);

}  // namespace scenecarve::proj2d
