#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "scenecarve/assignment.hpp"
#include "scenecarve/random.hpp"
#include "scenecarve/rigid.hpp"
#include "scenecarve/shape_search.hpp"
#include "support.hpp"

using namespace scenecarve;
using namespace scenecarve::search;

namespace {

double brute_force_assignment(const Eigen::MatrixXd& cost) {
  std::vector<int> perm(cost.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < cost.rows(); ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Matrix3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(normal(rng, 1), normal(rng, 1), normal(rng, 1), normal(rng, 1));
  return q.normalized().toRotationMatrix();
}

// Points on a unit-ish blob with radial normals.
SampledShape random_shape(Rng& rng, int n) {
  Eigen::Matrix3Xd p(3, n), nr(3, n);
  for (int i = 0; i < n; ++i) {
    Vector3 d(normal(rng, 1), normal(rng, 1), normal(rng, 1));
    d.normalize();
    p.col(i) = d.cwiseProduct(Vector3(1.0, 0.6, 0.4)) * (1.0 + 0.2 * uniform01(rng));
    nr.col(i) = d;
  }
  return SampledShape::from(p, nr);
}

// Seat plus back, as two parts.
void add_chair(scenecarve::testing::MeshBuilder& b, const Matrix4& pose) {
  b.add_box({0, 0, 0.4}, {0.5, 0.5, 0.5}, 3, {0.6, 0.3, 0.2}, pose);
  b.add_box({0, 0.4, 0.5}, {0.5, 0.5, 1.0}, 3, {0.6, 0.3, 0.2}, pose);
}

}  // namespace

TEST(Assignment, MatchesBruteForceUpTo7) {
  Rng rng(7);
  for (int n = 1; n <= 7; ++n) {
    const int trials = n <= 5 ? 200 : 40;
    for (int t = 0; t < trials; ++t) {
      Eigen::MatrixXd c(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) c(i, j) = (t % 3 == 0) ? double(uniform_index(rng, 4)) : uniform(rng, -1, 3);
      }
      const Assignment a = solve_assignment(c);
      std::vector<int> cols = a.column_of_row;
      std::sort(cols.begin(), cols.end());
      for (int i = 0; i < n; ++i) ASSERT_EQ(cols[i], i);
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += c(i, a.column_of_row[i]);
      ASSERT_NEAR(total, a.total_cost, 1e-9);
      ASSERT_NEAR(total, brute_force_assignment(c), 1e-9) << "n=" << n << " trial " << t;
    }
  }
}

TEST(Assignment, RejectsNonSquareOrNonFinite) {
  EXPECT_THROW(solve_assignment(Eigen::MatrixXd::Zero(2, 3)), ValidationError);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  c(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_assignment(c), ValidationError);
  EXPECT_EQ(solve_assignment(Eigen::MatrixXd(0, 0)).column_of_row.size(), 0u);
}

TEST(Rigid, HornRecoversTransform) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    Eigen::Matrix3Xd src(3, 10);
    for (int i = 0; i < 10; ++i) src.col(i) = Vector3(normal(rng, 1), normal(rng, 1), normal(rng, 1));
    const Matrix3 r = random_rotation(rng);
    const Vector3 tr(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    const Eigen::Matrix3Xd dst = (r * src).colwise() + tr;
    const Matrix4 m = horn_fit(src, dst);
    EXPECT_LT((m.block<3, 3>(0, 0) - r).norm(), 1e-9);
    EXPECT_LT((m.block<3, 1>(0, 3) - tr).norm(), 1e-9);
  }
}

TEST(Rigid, RansacIgnoresOutliers) {
  Rng rng(5);
  Eigen::Matrix3Xd src(3, 40), dst(3, 40);
  const Matrix3 r = random_rotation(rng);
  for (int i = 0; i < 40; ++i) {
    src.col(i) = Vector3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    dst.col(i) = r * src.col(i) + Vector3(1, 2, 3);
    if (i % 4 == 0) dst.col(i) += Vector3(uniform(rng, 1, 2), 0, 0);
  }
  int inliers = 0;
  const Matrix4 m = estimate_rigid(src, dst, 0.05, 256, 1, &inliers);
  EXPECT_EQ(inliers, 30);
  EXPECT_LT((m.block<3, 3>(0, 0) - r).norm(), 1e-9);
}

TEST(ShapeContext, RadialBins) {
  const ContextParams p;
  EXPECT_EQ(p.dimension(), 180);
  EXPECT_EQ(radial_bin(0.0), 0);
  EXPECT_EQ(radial_bin(0.1), 0);
  EXPECT_EQ(radial_bin(0.2), 0);
  EXPECT_EQ(radial_bin(0.26), 1);
  EXPECT_EQ(radial_bin(0.6), 2);
  EXPECT_EQ(radial_bin(1.1), 3);
  EXPECT_EQ(radial_bin(1.99), 4);
  EXPECT_EQ(radial_bin(50.0), 4);
}

TEST(ShapeContext, Chi2Examples) {
  Eigen::Vector3d a(1, 0, 0), b(0, 1, 0), c(0.5, 0.5, 0);
  EXPECT_DOUBLE_EQ(chi2(a, a), 0.0);
  EXPECT_DOUBLE_EQ(chi2(a, b), 1.0);
  EXPECT_NEAR(chi2(a, c), 0.5 * (0.25 / 1.5 + 0.25 / 0.5), 1e-15);
  EXPECT_THROW(chi2(a, Eigen::Vector2d(1, 0)), ValidationError);
}

TEST(ShapeContext, HistogramsAreNormalized) {
  Rng rng(1);
  const SampledShape s = random_shape(rng, 60);
  const Eigen::MatrixXd h = shape_contexts(s);
  ASSERT_EQ(h.rows(), 180);
  ASSERT_EQ(h.cols(), 60);
  for (int i = 0; i < 60; ++i) EXPECT_NEAR(h.col(i).sum(), 1.0, 1e-12);
  EXPECT_THROW(shape_context(SampledShape::from(Eigen::Matrix3Xd::Zero(3, 1), Eigen::Matrix3Xd::Zero(3, 1)), 0),
               ValidationError);
}

TEST(ShapeContext, ExactlyScaleInvariant) {
  Rng rng(11);
  for (double scale : {0.5, 2.0, 8.0, 0.001 * 1024}) {
    const SampledShape s = random_shape(rng, 80);
    const SampledShape t = SampledShape::from(s.points * scale, s.normals);
    EXPECT_TRUE((shape_contexts(s).array() == shape_contexts(t).array()).all()) << "scale " << scale;
  }
}

TEST(ShapeContext, RotationInvariantWithExactNormals) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const SampledShape s = random_shape(rng, 80);
    const Matrix3 r = random_rotation(rng);
    const Vector3 t(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3));
    const SampledShape moved = SampledShape::from((r * s.points).colwise() + t, r * s.normals);
    EXPECT_LE((shape_contexts(s) - shape_contexts(moved)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ShapeContext, LocalFrameFallsBackOnDegenerateDirection) {
  const Matrix3 f = local_frame(Vector3(0, 0, 0), Vector3(0, 0, 1), Vector3(0, 0, 5));
  EXPECT_LT((f.transpose() * f - Matrix3::Identity()).norm(), 1e-12);
  EXPECT_NEAR(f.determinant(), 1.0, 1e-12);
  EXPECT_EQ(f.col(2), Vector3(0, 0, 1));
}

TEST(Match, CopyOfShapeMatchesPerfectly) {
  Rng rng(17);
  const SampledShape y = random_shape(rng, 100);
  const Matrix3 r = random_rotation(rng);
  const SampledShape v = SampledShape::from((r * y.points).colwise() + Vector3(4, 0, 1), r * y.normals);
  const MatchResult m = match_shapes(v, y);
  EXPECT_EQ(m.real_pairs, 100);
  EXPECT_LT(m.cost, 1e-9);
  EXPECT_LT(m.alignment_error, 1e-9);
  EXPECT_TRUE(accept_match(m));
}

TEST(Match, DummyPaddingOnSmallerSide) {
  Rng rng(19);
  const SampledShape y = random_shape(rng, 60);
  const SampledShape v = subsample(y, 40);
  const MatchResult m = match_shapes(v, y);
  EXPECT_EQ(m.real_pairs, 40);
  EXPECT_EQ(std::count(m.y_to_v.begin(), m.y_to_v.end(), -1), 20);
  EXPECT_NEAR(m.assignment_cost, m.cost * 40 + 0.35 * 20, 1e-9);
}

TEST(Match, AcceptanceThresholds) {
  EXPECT_TRUE(accept_match(0.69, 0.39));
  EXPECT_FALSE(accept_match(0.7, 0.1));
  EXPECT_FALSE(accept_match(0.1, 0.4));
  EXPECT_TRUE(accept_match(0.1, 5.0, {0.7, 0.4, false}));
}

TEST(Sampling, FarthestPointStartsAtCentroid) {
  Eigen::Matrix3Xd p(3, 5);
  p << 0, 1, -1, 0, 5,
       0, 0, 0, 1, 0,
       0, 0, 0, 0, 0;
  const auto idx = farthest_point_indices(p, 3);
  EXPECT_EQ(idx[0], 1);  // centroid is (1, 0.2, 0)
  EXPECT_EQ(idx[1], 4);
  EXPECT_EQ(idx.size(), 3u);
}

// Two quads of area 1 and 3: the share of samples on the larger one is
// Binomial(n, 3/4).
TEST(Sampling, AreaWeightedWithinBinomialBounds) {
  scenecarve::testing::MeshBuilder b;
  b.add_quad({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1, {1, 1, 1});
  b.add_quad({2, 0, 0}, {3, 0, 0}, {0, 1, 0}, 1, {1, 1, 1});
  const SceneMesh mesh = b.mesh();
  const int n = 20000;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SceneSamples s = sample_scene(mesh, n, seed);
    ASSERT_EQ(s.size(), n);
    int big = 0;
    for (int i = 0; i < n; ++i) big += s.points(0, i) > 1.5;
    const double sd = std::sqrt(n * 0.75 * 0.25);
    EXPECT_NEAR(big, 0.75 * n, 4 * sd);
    for (int i = 0; i < n; ++i) EXPECT_EQ(s.normals.col(i), Vector3::UnitZ());
  }
  const SceneSamples a = sample_scene(mesh, 100, 9), c = sample_scene(mesh, 100, 9);
  EXPECT_TRUE(a.points == c.points);
}

class ChairSearch : public ::testing::Test {
 protected:
  void SetUp() override {
    add_chair(b, Matrix4::Identity());                                  // regions 0, 1
    add_chair(b, scenecarve::testing::pose_of(std::numbers::pi / 2, {3, 0, 0}));   // regions 2, 3
    b.add_box({-3, 0, 0}, {-2, 0.6, 0.7}, 3, {0.2, 0.2, 0.8});          // region 4
    mesh = b.mesh();
    h = b.hierarchy();
  }
  scenecarve::testing::MeshBuilder b;
  SceneMesh mesh;
  SegmentationHierarchy h;
};

TEST_F(ChairSearch, GrowShrinkCompletesTheCopy) {
  ObjectSearch engine(mesh, h);
  engine.set_template({0, 1});
  EXPECT_EQ(engine.grow_shrink({2}, {2, 3}), (std::vector<int>{2, 3}));
  EXPECT_EQ(engine.grow_shrink({2, 3}, {2, 3, 4}), (std::vector<int>{2, 3}));
}

TEST_F(ChairSearch, GuidedMergeFromOnePart) {
  ObjectSearch engine(mesh, h);
  engine.set_template({0, 1});
  const Candidate c = engine.guided_merge(3);
  EXPECT_EQ(c.regions, (std::vector<int>{2, 3}));
  EXPECT_TRUE(c.accepted);
  EXPECT_THROW(engine.guided_merge(99), NotFoundError);
}

TEST_F(ChairSearch, SlidingWindowFindsCopyOnly) {
  ObjectSearch engine(mesh, h);
  engine.set_template({0, 1});
  const auto found = engine.search();
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].regions, (std::vector<int>{2, 3}));
  const Matrix4 t = found[0].evaluation.transform;
  // Candidate aligned onto the template: the copy's pose inverted.
  const Matrix4 expected = scenecarve::testing::pose_of(std::numbers::pi / 2, {3, 0, 0}).inverse();
  EXPECT_LT((t - expected).cwiseAbs().maxCoeff(), 0.1);
  // Memoization: repeated unions are not matched twice.
  EXPECT_LE(engine.evaluation_runs(), engine.evaluation_requests());
}

TEST_F(ChairSearch, TemplateValidation) {
  ObjectSearch engine(mesh, h);
  EXPECT_THROW(engine.set_template({}), ValidationError);
  EXPECT_THROW(engine.set_template({42}), NotFoundError);
  EXPECT_THROW(engine.search(), PreconditionError);
}
