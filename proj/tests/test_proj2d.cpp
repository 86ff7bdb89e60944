#include <gtest/gtest.h>

#include "scenecarve/camera.hpp"
#include "scenecarve/proj2d.hpp"
#include "scenecarve/random.hpp"
#include "scenecarve/synth_fixtures.hpp"
#include "support.hpp"

using namespace scenecarve;
using namespace scenecarve::proj2d;

namespace {

Mask rect_mask(int w, int h, int x0, int y0, int rw, int rh) {
  Mask m = Mask::Zero(h, w);
  m.block(y0, x0, rh, rw).setConstant(1);
  return m;
}

// Quarter turn: offsets (dx, dy) become (-dy, dx).
Mask rotate90(const Mask& m) {
  Mask out = Mask::Zero(m.cols(), m.rows());
  for (int y = 0; y < m.rows(); ++y) {
    for (int x = 0; x < m.cols(); ++x) out(x, m.rows() - 1 - y) = m(y, x);
  }
  return out;
}

double brute_force_min(const CandidateTable& t, const AlignParams& p) {
  const int n = static_cast<int>(t.pixels.size());
  std::vector<int> choice(n, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    best = std::min(best, alignment_cost(t, choice, p));
    int i = 0;
    while (i < n && ++choice[i] == static_cast<int>(t.pixels[i].size())) choice[i++] = 0;
    if (i == n) break;
  }
  return best;
}

}  // namespace

TEST(Contour, RectanglePerimeter) {
  for (auto [w, h] : {std::pair{1, 1}, {2, 1}, {1, 5}, {4, 3}, {17, 9}}) {
    const Mask m = rect_mask(30, 20, 3, 2, w, h);
    const Contour c = moore_trace(m);
    const std::size_t expected = (w == 1 && h == 1) ? 1 : (w == 1 || h == 1) ? 2 * (w + h) - 4 : 2 * w + 2 * h - 4;
    EXPECT_EQ(c.size(), expected) << w << "x" << h;
    EXPECT_EQ(c.front(), (Pixel{3, 2}));
    if (w > 1) EXPECT_EQ(c[1], (Pixel{4, 2}));  // clockwise on screen
  }
  EXPECT_TRUE(moore_trace(Mask::Zero(4, 4)).empty());
}

TEST(Contour, LargestComponentTieGoesToRasterFirst) {
  Mask m = Mask::Zero(10, 10);
  m.block(1, 6, 2, 2).setConstant(1);
  m.block(5, 1, 2, 2).setConstant(1);
  m(9, 9) = 1;
  const Mask l = largest_component(m);
  EXPECT_EQ(l.cast<int>().sum(), 4);
  EXPECT_EQ(l(1, 6), 1);
  EXPECT_EQ(l(5, 1), 0);
  Mask diag = Mask::Zero(4, 4);
  diag(0, 0) = diag(1, 1) = diag(2, 2) = 1;
  EXPECT_EQ(largest_component(diag).cast<int>().sum(), 3);  // 8-connected
}

TEST(Contour, ToMaskInvertsTrace) {
  Mask blob = Mask::Zero(40, 50);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 50; ++x) blob(y, x) = (x - 25) * (x - 25) + (y - 20) * (y - 20) <= 144;
  }
  EXPECT_TRUE((contour_to_mask(moore_trace(blob), 50, 40) == blob).all());
  const Mask r = rect_mask(50, 40, 5, 6, 20, 10);
  EXPECT_TRUE((contour_to_mask(moore_trace(r), 50, 40) == r).all());
}

TEST(Canny, ConstantImageHasNoEdges) {
  GrayImage g = GrayImage::Constant(48, 64, 0.4f);
  EXPECT_EQ(canny(g).cast<int>().sum(), 0);
}

TEST(Canny, HalfSplitGivesOneVerticalLine) {
  const int w = 64, h = 48;
  GrayImage g(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) g(y, x) = x < w / 2 ? 0.0f : 1.0f;
  }
  const Mask e = canny(g);
  int rows_with_edge = 0;
  for (int y = 0; y < h; ++y) {
    int count = 0;
    for (int x = 0; x < w; ++x) {
      if (e(y, x)) {
        EXPECT_TRUE(x == w / 2 - 1 || x == w / 2) << "x=" << x << " y=" << y;
        ++count;
      }
    }
    EXPECT_LE(count, 1);
    rows_with_edge += count;
  }
  EXPECT_GE(rows_with_edge, h - 2);
}

TEST(Canny, BlurPreservesConstant) {
  GrayImage g = GrayImage::Constant(10, 12, 0.75f);
  EXPECT_LT((gaussian_blur(g, 1.4) - 0.75f).abs().maxCoeff(), 1e-6);
}

TEST(Canny, DetectorUsesPrecomputedEdges) {
  RgbImage img(8, 6);
  Mask pre = Mask::Zero(6, 8);
  pre(2, 3) = 255;
  EdgeDetector d;
  const EdgeMap m = d.detect(img, &pre);
  EXPECT_EQ(d.canny_calls(), 0);
  ASSERT_EQ(m.points().size(), 1u);
  EXPECT_EQ(m.points()[0], (Pixel{3, 2}));
  d.detect(img);
  EXPECT_EQ(d.canny_calls(), 1);
}

TEST(Edges, NearestStrictRadiusAndTieOrder) {
  Mask m = Mask::Zero(10, 10);
  m(5, 7) = m(3, 5) = m(7, 5) = m(5, 3) = 1;  // all at distance 2 from (5,5)
  m(5, 9) = 1;                                // distance 4
  const EdgeMap e(m);
  const auto near = e.nearest({5, 5}, 10, 4.0);
  ASSERT_EQ(near.size(), 4u);
  EXPECT_EQ(near[0], (Pixel{5, 3}));
  EXPECT_EQ(near[1], (Pixel{3, 5}));
  EXPECT_EQ(near[2], (Pixel{7, 5}));
  EXPECT_EQ(near[3], (Pixel{5, 7}));
  EXPECT_EQ(e.nearest({5, 5}, 2, 4.5).size(), 2u);
  EXPECT_EQ(e.nearest({5, 5}, 10, 4.5).size(), 5u);
  EXPECT_TRUE(e.nearest({5, 5}, 10, 2.0).empty());
}

TEST(LocalShape, HalfWindowScalesWithResolution) {
  EXPECT_EQ(hist_half_window(640, 480), 10);
  EXPECT_EQ(hist_half_window(1280, 960), 20);
  EXPECT_EQ(hist_half_window(320, 240), 5);
  EXPECT_EQ(hist_half_window(640, 960), 20);
}

TEST(LocalShape, OrientationBins) {
  EXPECT_EQ(orientation_bin(1, 0), 0);
  EXPECT_EQ(orientation_bin(0, 1), 4);
  EXPECT_EQ(orientation_bin(-1, 0), 8);
  EXPECT_EQ(orientation_bin(0, -1), 12);
  EXPECT_EQ(orientation_bin(1, 1), 2);
  EXPECT_EQ(orientation_bin(5, 1), 0);   // 11.3 degrees
  EXPECT_EQ(orientation_bin(2, 1), 1);   // 26.6 degrees
  EXPECT_EQ(orientation_bin(1, 5), 3);   // 78.7 degrees
  for (int dx = -10; dx <= 10; ++dx) {
    for (int dy = -10; dy <= 10; ++dy) {
      if (dx == 0 && dy == 0) continue;
      ASSERT_EQ(orientation_bin(-dy, dx), (orientation_bin(dx, dy) + 4) % kHistBins) << dx << "," << dy;
    }
  }
}

TEST(LocalShape, HistogramExamples) {
  Mask m = Mask::Zero(21, 21);
  m(10, 10) = 1;
  EXPECT_EQ(local_hist(m, {10, 10}, 5).sum(), 0.0);
  m(10, 12) = 1;  // right
  m(7, 10) = 1;   // up
  m(13, 13) = 1;  // down-right diagonal
  m(10, 20) = 1;  // outside the window
  const LocalHist h = local_hist(m, {10, 10}, 5);
  EXPECT_NEAR(h[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(h[12], 1.0 / 3, 1e-15);
  EXPECT_NEAR(h[2], 1.0 / 3, 1e-15);
  EXPECT_NEAR(h.sum(), 1.0, 1e-15);
}

TEST(LocalShape, QuarterTurnShiftsBinsByFour) {
  Rng rng(3);
  Mask m = Mask::Zero(31, 41);
  for (int i = 0; i < 120; ++i) m(uniform_index(rng, 31), uniform_index(rng, 41)) = 1;
  const Mask r = rotate90(m);
  for (int trial = 0; trial < 30; ++trial) {
    const int x = uniform_index(rng, 41), y = uniform_index(rng, 31);
    const LocalHist a = local_hist(m, {x, y}, 10);
    const LocalHist b = local_hist(r, {31 - 1 - y, x}, 10);
    for (int k = 0; k < kHistBins; ++k) ASSERT_EQ(b[(k + 4) % kHistBins], a[k]);
  }
}

TEST(LocalShape, Chi2EmptyConventions) {
  const LocalHist z = LocalHist::Zero();
  LocalHist a = LocalHist::Zero();
  a[3] = 1.0;
  EXPECT_EQ(hist_chi2(z, z), 0.0);
  EXPECT_EQ(hist_chi2(z, a), 1.0);
  EXPECT_EQ(hist_chi2(a, z), 1.0);
  EXPECT_EQ(hist_chi2(a, a), 0.0);
}

TEST(Alignment, DynamicProgramMatchesBruteForce) {
  Rng rng(21);
  int instances = 0;
  for (int n = 3; n <= 8; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      CandidateTable t;
      for (int i = 0; i < n; ++i) {
        const int k = 1 + uniform_index(rng, 4);
        std::vector<Pixel> px;
        std::vector<double> cost;
        for (int c = 0; c < k; ++c) {
          px.push_back({uniform_index(rng, 12), uniform_index(rng, 12)});
          cost.push_back(uniform01(rng));
        }
        t.pixels.push_back(px);
        t.local_cost.push_back(cost);
      }
      for (AlignMode mode : {AlignMode::kLocal, AlignMode::kContinuity, AlignMode::kSmoothness, AlignMode::kFull}) {
        const AlignParams p = params_for(mode);
        const AlignResult r = solve_alignment(t, p);
        ASSERT_NEAR(r.cost, alignment_cost(t, r.choice, p), 1e-9);
        ASSERT_NEAR(r.cost, brute_force_min(t, p), 1e-9) << "n=" << n << " trial " << trial;
        ++instances;
      }
    }
  }
  EXPECT_EQ(instances, 6 * 40 * 4);
}

TEST(Alignment, Preconditions) {
  EdgeMap none(Mask::Zero(20, 20));
  const Contour tiny = {{1, 1}, {2, 1}};
  EXPECT_THROW(align_contour(tiny, none), PreconditionError);
  const Contour c = moore_trace(rect_mask(20, 20, 5, 5, 6, 6));
  const AlignResult r = align_contour(c, none);
  EXPECT_TRUE(r.no_edges);
  EXPECT_EQ(r.mapped, c);
  EXPECT_THROW(parse_align_mode("sideways"), ValidationError);
  EXPECT_EQ(parse_align_mode(to_string(AlignMode::kContinuity)), AlignMode::kContinuity);
  const AlignParams local = params_for(AlignMode::kLocal);
  EXPECT_EQ(local.kappa_continuity, 0.0);
  EXPECT_EQ(local.kappa_smoothness, 0.0);
}

TEST(Alignment, SnapsShiftedSquareOntoEdges) {
  const Mask truth = rect_mask(160, 120, 50, 40, 40, 30);
  const Mask projected = rect_mask(160, 120, 54, 44, 40, 30);
  Mask edges = Mask::Zero(120, 160);
  for (const Pixel& p : moore_trace(truth)) edges(p.y, p.x) = 1;
  const EdgeMap e(edges);
  const auto proj = ablate_alignment(projected, e, truth, AlignMode::kProjection);
  const auto full = ablate_alignment(projected, e, truth, AlignMode::kFull);
  EXPECT_GT(proj.oce, 0.0);
  EXPECT_LT(full.oce, proj.oce);
  EXPECT_LT(full.oce, 0.02);
}

TEST(Projection, FaceRegionMajority) {
  scenecarve::testing::MeshBuilder b;
  b.add_quad({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1, {1, 1, 1});
  SceneMesh mesh = b.mesh();
  SegmentationHierarchy h;
  h.supervertex_of = {0, 1, 2, 3};
  h.region_of = {5, 5, 6, 7};
  // Faces (0,1,3) and (0,3,2).
  EXPECT_EQ(face_region(mesh, h, 0), 5);
  EXPECT_EQ(face_region(mesh, h, 1), 5);  // no majority: corner 0
  h.region_of = {5, 6, 6, 6};
  EXPECT_EQ(face_region(mesh, h, 0), 6);
}

TEST(Projection, RegionMasksFromTopView) {
  scenecarve::testing::MeshBuilder b;
  b.add_quad({-0.5, -0.5, 0}, {0.5, 0, 0}, {0, 1, 0}, 4, {1, 0, 0});
  b.end_part();
  b.add_quad({0, -0.5, 0}, {0.5, 0, 0}, {0, 1, 0}, 4, {0, 0, 1});
  b.end_part();
  const SceneMesh mesh = b.mesh();
  const SegmentationHierarchy h = b.hierarchy();
  Camera cam;
  cam.intrinsics = {100, 100, 50, 50};
  cam.width = cam.height = 100;
  cam.pose.block<3, 3>(0, 0) = Eigen::AngleAxisd(std::numbers::pi, Vector3::UnitX()).toRotationMatrix();
  cam.pose(2, 3) = 2.0;
  const RegionMask left = project_region(mesh, h, 0, cam, 3);
  const RegionMask right = project_region(mesh, h, 1, cam, 3);
  EXPECT_EQ(left.frame_id, 3);
  EXPECT_FALSE(left.empty());
  const int a = left.mask.cast<int>().sum(), c = right.mask.cast<int>().sum();
  EXPECT_NEAR(a, 25 * 50, 60);
  EXPECT_NEAR(c, 25 * 50, 60);
  EXPECT_EQ((left.mask * right.mask).cast<int>().sum(), 0);
  EXPECT_THROW(project_region(mesh, h, 9, cam), NotFoundError);
  cam.pose(2, 3) = -2.0;  // looking away
  EXPECT_TRUE(project_region(mesh, h, 0, cam).empty());
}

TEST(Ablation, ShiftedSquareFullBeatsProjection) {
  fixtures::FixtureSpec spec;
  spec.kind = fixtures::Kind::kShiftedSquare;
  spec.seed = 1;
  const auto fx = fixtures::shifted_square(spec);
  EdgeDetector d;
  const EdgeMap e = d.detect(fx.image);
  const auto proj = ablate_alignment(fx.projected, e, fx.truth, AlignMode::kProjection);
  const auto local = ablate_alignment(fx.projected, e, fx.truth, AlignMode::kLocal);
  const auto full = ablate_alignment(fx.projected, e, fx.truth, AlignMode::kFull);
  EXPECT_LT(full.oce, proj.oce);
  EXPECT_LE(full.oce, local.oce);
}
