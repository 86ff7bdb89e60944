#include <random>

#include <gtest/gtest.h>

#include "scenecarve/geom_seg.hpp"
#include "scenecarve/session.hpp"
#include "scenecarve/synth_fixtures.hpp"
#include "support.hpp"

using namespace scenecarve;

namespace {

AnnotationSession boxes_session(int seed) {
  fixtures::FixtureSpec spec;
  spec.kind = fixtures::Kind::kColoredBoxes;
  spec.seed = seed;
  spec.jitter = 0.001;
  auto fx = fixtures::colored_boxes(spec);
  AnnotationSession s(fx.mesh, {});
  geom::SegParams seg;
  seg.threshold_k = 20;
  seg.min_size = 10;
  s.set_supervertices(geom::segment_graph(s.mesh(), seg));
  return s;
}

// Camera 2 m above the origin looking straight down.
Camera top_camera() {
  Camera c;
  c.intrinsics = {100, 100, 50, 50};
  c.width = 100;
  c.height = 100;
  c.pose = Matrix4::Identity();
  c.pose.block<3, 3>(0, 0) = Eigen::AngleAxisd(std::numbers::pi, Vector3::UnitX()).toRotationMatrix();
  c.pose(2, 3) = 2.0;
  return c;
}

}  // namespace

TEST(Session, MergeKeepsSmallestIdAndLargestLabel) {
  scenecarve::testing::MeshBuilder b;
  for (int i = 0; i < 3; ++i) {
    b.add_quad({double(i), 0, 0}, {1, 0, 0}, {0, 1, 0}, i + 1, {0.5, 0.5, 0.5});
    b.end_part();
  }
  AnnotationSession s(b.mesh(), {});
  s.set_supervertices(b.hierarchy());
  s.annotate(1, "small");
  s.annotate(2, "large");
  const int survivor = s.merge({2, 1});
  EXPECT_EQ(survivor, 1);
  EXPECT_EQ(s.hierarchy().labels.at(1), "large");
  EXPECT_FALSE(s.hierarchy().has_region(2));
  EXPECT_THROW(s.merge({1}), PreconditionError);
  EXPECT_THROW(s.merge({1, 9}), NotFoundError);
  EXPECT_EQ(s.undo_log().size(), 3u);
  ASSERT_TRUE(s.undo());
  EXPECT_EQ(s.hierarchy().labels.at(1), "small");
  EXPECT_EQ(s.hierarchy().region_of[2], 2);
}

TEST(Session, ExtractRestoresCachedSupervertices) {
  AnnotationSession s = boxes_session(1);
  const auto all = s.hierarchy().regions();
  const int merged = s.merge(all);
  s.annotate(merged, "everything");
  const auto members = s.extract(merged);
  EXPECT_EQ(static_cast<int>(members.size()), s.cached_supervertices()->supervertex_count());
  EXPECT_EQ(s.hierarchy().regions().size(), members.size());
  EXPECT_TRUE(s.hierarchy().labels.empty());
}

TEST(Session, UndoOnEmptyLogGivesNotice) {
  AnnotationSession s = boxes_session(1);
  std::string notice;
  EXPECT_FALSE(s.undo(&notice));
  EXPECT_FALSE(notice.empty());
}

TEST(Session, AcceptObjectIsOneEdit) {
  AnnotationSession s = boxes_session(2);
  const auto regions = s.hierarchy().regions();
  const int r = s.accept_object({regions[1], regions[2]}, "box");
  EXPECT_EQ(s.undo_log().size(), 1u);
  EXPECT_EQ(s.hierarchy().labels.at(r), "box");
  ASSERT_TRUE(s.undo());
  EXPECT_TRUE(s.hierarchy().labels.empty());
  EXPECT_EQ(s.hierarchy().regions(), regions);
}

TEST(Session, TemplatesNeedLiveRegions) {
  AnnotationSession s = boxes_session(2);
  EXPECT_EQ(s.add_template({0}), 0);
  EXPECT_THROW(s.add_template({12345}), NotFoundError);
  EXPECT_THROW(s.add_template({}), Error);
}

TEST(Session, StrokeResolvesVerticesUnderPolyline) {
  scenecarve::testing::MeshBuilder b;
  b.add_quad({-0.5, -0.5, 0}, {0.5, 0, 0}, {0, 1, 0}, 4, {1, 0, 0});
  b.end_part();
  b.add_quad({0, -0.5, 0}, {0.5, 0, 0}, {0, 1, 0}, 4, {0, 0, 1});
  b.end_part();
  const SceneMesh mesh = b.mesh();
  Stroke stroke{top_camera(), {{30, 50}, {70, 50}}};
  const auto verts = resolve_stroke(stroke, mesh);
  ASSERT_FALSE(verts.empty());
  const auto h = b.hierarchy();
  std::set<int> regions;
  for (int v : verts) regions.insert(h.region_of_vertex(v));
  EXPECT_EQ(regions, (std::set<int>{0, 1}));
  for (std::size_t i = 1; i < verts.size(); ++i) EXPECT_NE(verts[i], verts[i - 1]);

  Stroke miss{top_camera(), {{0, 0}, {5, 0}}};
  EXPECT_THROW(resolve_stroke(miss, mesh), PreconditionError);
}

TEST(Session, SplitByStrokeEndpoints) {
  AnnotationSession s = boxes_session(3);
  const auto all = s.hierarchy().regions();
  const int merged = s.merge(all);
  const auto members = s.hierarchy().members(merged);
  ASSERT_GE(members.size(), 2u);
  const auto parts = s.split(merged, members.front(), members.back());
  EXPECT_GE(parts.size(), 2u);
  EXPECT_NE(s.hierarchy().region_of[members.front()], s.hierarchy().region_of[members.back()]);
  s.hierarchy().validate();
}

// Random merges, extracts, splits, labels and accepts with undo interleaved;
// the partition stays total after every edit and undoing everything returns
// the starting document byte for byte.
TEST(Session, RandomEditSequencesUndoToStart) {
  std::mt19937 rng(12345);
  int edits = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    static AnnotationSession base = boxes_session(1);
    static AnnotationSession base2 = boxes_session(2);
    AnnotationSession s = (seq % 2 == 0) ? base : base2;
    const std::string start = annotations_to_json(s.hierarchy());
    const int steps = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < steps; ++k) {
      const auto regions = s.hierarchy().regions();
      auto pick = [&] { return regions[rng() % regions.size()]; };
      try {
        switch (rng() % 6) {
          case 0:
            if (regions.size() >= 2) s.merge({pick(), pick(), pick()});
            break;
          case 1: s.extract(pick()); break;
          case 2: {
            const int r = pick();
            const auto m = s.hierarchy().members(r);
            if (m.size() >= 2) s.split(r, m[rng() % m.size()], m[rng() % m.size()]);
            break;
          }
          case 3: s.annotate(pick(), "label" + std::to_string(rng() % 3)); break;
          case 4:
            if (regions.size() >= 2) s.accept_object({pick(), pick()}, "obj");
            break;
          case 5: s.undo(); break;
        }
        ++edits;
      } catch (const PreconditionError&) {
        // Degenerate picks (one distinct region, equal split endpoints).
      }
      ASSERT_NO_THROW(s.hierarchy().validate());
      ASSERT_EQ(s.hierarchy().supervertex_of, s.cached_supervertices()->supervertex_of);
    }
    while (s.undo()) {
    }
    ASSERT_EQ(annotations_to_json(s.hierarchy()), start) << "sequence " << seq;
  }
  EXPECT_GT(edits, 3000);
}
