#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "scenecarve/eval_metrics.hpp"
#include "scenecarve/synth_fixtures.hpp"

using namespace scenecarve;
using namespace scenecarve::eval;

TEST(Oce, IdenticalUpToRenamingIsZero) {
  EXPECT_EQ(oce({0, 0, 1, 1, 2}, {0, 0, 1, 1, 2}), 0.0);
  EXPECT_EQ(oce({7, 7, 3, 3, 9}, {0, 0, 1, 1, 2}), 0.0);
}

// S = {0,1,2 | 3}, G = {0,1 | 2,3}.
//   E(S,G): G0 = {0,1}: S0 gives IoU 2/3 * overlap 1 -> 1/3 left, weight 1/2
//           G1 = {2,3}: S0 1/4 * 1/2, S1 1/2 * 1/2 -> 5/8 left, weight 1/2
//           E = 1/6 + 5/16 = 23/48
//   E(G,S): S0 = {0,1,2}: G0 2/3 * 2/3, G1 1/4 * 1/3 -> 17/36 left, weight 3/4
//           S1 = {3}: G1 1/2 * 1 -> 1/2 left, weight 1/4
//           E = 17/48 + 1/8 = 23/48
TEST(Oce, HandComputedTwoSegmentCase) {
  const LabeledPartition s = {0, 0, 0, 1};
  const LabeledPartition g = {0, 0, 1, 1};
  EXPECT_NEAR(directed_consistency_error(s, g), 23.0 / 48.0, 1e-12);
  EXPECT_NEAR(directed_consistency_error(g, s), 23.0 / 48.0, 1e-12);
  EXPECT_NEAR(oce(s, g), 23.0 / 48.0, 1e-9);
  // Unequal directions: S = {0 | 1 | 2,3} against G = {0,1,2,3}.
  EXPECT_NEAR(directed_consistency_error({0, 1, 2, 2}, {0, 0, 0, 0}), 1.0 - (1.0 / 16 + 1.0 / 16 + 1.0 / 4), 1e-12);
  EXPECT_NEAR(directed_consistency_error({0, 0, 0, 0}, {0, 1, 2, 2}), 0.25 * 0.75 * 2 + 0.5 * 0.5, 1e-12);
}

TEST(Oce, SymmetricAndPositiveAfterAnyRelabel) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 40);
    const int k = 1 + static_cast<int>(rng() % 5);
    LabeledPartition a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng() % k);
      b[i] = static_cast<int>(rng() % k);
    }
    EXPECT_NEAR(oce(a, b), oce(b, a), 1e-15);
    EXPECT_GE(oce(a, b), 0.0);
    EXPECT_LE(oce(a, b), 1.0);
    // Any single-element relabel of an identical copy is detected.
    LabeledPartition c = a;
    const int i = static_cast<int>(rng() % n);
    c[i] = (rng() % 2) ? 1000 : (a[i] + 1) % (k + 1);
    if (c[i] == a[i]) c[i] = 1000;
    // Moving a singleton to a fresh id only renames it.
    if (std::count(a.begin(), a.end(), a[i]) == 1 && std::count(a.begin(), a.end(), c[i]) == 0) continue;
    EXPECT_GT(oce(a, c), 0.0) << "trial " << trial;
  }
}

TEST(Oce, RejectsBadInput) {
  EXPECT_THROW(oce({}, {}), ValidationError);
  EXPECT_THROW(oce({0, 1}, {0}), ValidationError);
}

TEST(Iou, StrictHalfThreshold) {
  EXPECT_DOUBLE_EQ(point_iou({0, 1}, {1, 2, 3}), 0.25);
  EXPECT_DOUBLE_EQ(point_iou({0, 1, 2}, {1, 2, 3}), 0.5);
  EXPECT_FALSE(is_true_detection(point_iou({0, 1, 2}, {1, 2, 3})));
  EXPECT_TRUE(is_true_detection(std::nextafter(0.5, 1.0)));
  EXPECT_DOUBLE_EQ(point_iou({3, 1, 1}, {1, 3}), 1.0);
  EXPECT_THROW(point_iou({}, {}), ValidationError);
}

TEST(Detection, PerfectAndEmpty) {
  const std::vector<std::vector<int>> truths = {{0, 1, 2}, {5, 6}};
  const auto perfect = detection_prf(truths, truths);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f_measure, 1.0);
  const auto none = detection_prf({}, truths);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f_measure, 0.0);
  EXPECT_EQ(detection_prf({}, {}).f_measure, 0.0);
}

TEST(Detection, OneToOneMatching) {
  // Two candidates overlap the same truth; only one may claim it.
  const std::vector<std::vector<int>> truths = {{0, 1, 2, 3}};
  const std::vector<std::vector<int>> cands = {{0, 1, 2}, {0, 1, 2, 3}};
  const auto s = detection_prf(cands, truths);
  EXPECT_EQ(s.true_positives, 1);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_NEAR(s.f_measure, 2 * 0.5 / 1.5, 1e-15);
}

TEST(Fixtures, DeterministicPerSeed) {
  for (auto kind : {fixtures::Kind::kTwoPlane, fixtures::Kind::kColoredBoxes, fixtures::Kind::kDuplicatedRoom}) {
    fixtures::FixtureSpec spec;
    spec.kind = kind;
    spec.seed = 9;
    spec.jitter = 0.002;
    auto gen = [&] {
      switch (kind) {
        case fixtures::Kind::kTwoPlane: return fixtures::two_plane(spec);
        case fixtures::Kind::kColoredBoxes: return fixtures::colored_boxes(spec);
        default: return fixtures::duplicated_room(spec);
      }
    };
    const auto a = gen(), b = gen();
    EXPECT_TRUE(a.mesh.vertices == b.mesh.vertices);
    EXPECT_TRUE(a.mesh.faces == b.mesh.faces);
    EXPECT_EQ(a.objects, b.objects);
    EXPECT_EQ(fixtures::ground_truth_json(spec, a).dump(), fixtures::ground_truth_json(spec, b).dump());
  }
}

TEST(Fixtures, TwoPlaneShape) {
  fixtures::FixtureSpec spec;
  const auto fx = fixtures::two_plane(spec);
  EXPECT_EQ(fx.mesh.vertex_count(), spec.grid * (spec.floor_cells + spec.wall_cells + 1));
  EXPECT_EQ(fx.parts.regions().size(), 2u);
  // Crease dihedral: floor normals +z, wall normals horizontal.
  const Vector3 nf = fx.mesh.normal(0);
  const Vector3 nw = fx.mesh.normal(fx.mesh.vertex_count() - 1);
  EXPECT_NEAR(std::abs(nf.dot(nw)), 0.0, 1e-9);
}

TEST(Fixtures, DuplicatedRoomPlacements) {
  fixtures::FixtureSpec spec;
  spec.kind = fixtures::Kind::kDuplicatedRoom;
  spec.seed = 4;
  const auto fx = fixtures::duplicated_room(spec);
  ASSERT_EQ(fx.placements.size(), 5u);
  int dropped = 0;
  for (const auto& p : fx.placements) {
    dropped += p.dropped;
    EXPECT_LT((p.transform.block<3, 3>(0, 0).transpose() * p.transform.block<3, 3>(0, 0) - Matrix3::Identity()).norm(),
              1e-12);
    EXPECT_FALSE(p.regions.empty());
  }
  EXPECT_EQ(dropped, 2);
  EXPECT_FALSE(fx.placements[0].dropped);
  spec.clutter_only = true;
  EXPECT_EQ(fixtures::duplicated_room(spec).placements.size(), 1u);
}

TEST(Fixtures, ShiftedSquareOffset) {
  fixtures::FixtureSpec spec;
  spec.kind = fixtures::Kind::kShiftedSquare;
  const auto fx = fixtures::shifted_square(spec);
  EXPECT_EQ(fx.image.width, 640);
  EXPECT_EQ(fx.image.height, 480);
  for (int y = 0; y + 5 < 480; ++y) {
    for (int x = 0; x + 5 < 640; ++x) ASSERT_EQ(fx.projected(y + 5, x + 5), fx.truth(y, x));
  }
}

TEST(Fixtures, UnknownKindAndBadSpec) {
  EXPECT_THROW(fixtures::parse_kind("pyramid"), ValidationError);
  EXPECT_EQ(fixtures::parse_kind("duplicated-room"), fixtures::Kind::kDuplicatedRoom);
  fixtures::FixtureSpec spec;
  spec.drop_fraction = 1.5;
  EXPECT_THROW(spec.validate(), ValidationError);
}
