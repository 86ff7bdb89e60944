#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenecarve/hierarchy.hpp"
#include "scenecarve/image.hpp"
#include "scenecarve/mesh.hpp"

namespace scenecarve::fixtures {

enum class Kind { kTwoPlane, kColoredBoxes, kDuplicatedRoom, kShiftedSquare };

std::string to_string(Kind kind);
/// Throws ValidationError naming the accepted kinds.
Kind parse_kind(const std::string& name);

struct FixtureSpec {
  Kind kind = Kind::kTwoPlane;
  std::uint64_t seed = 0;
  double jitter = 0.0;          // vertex noise sigma, meters
  double drop_fraction = 0.2;   // faces removed from each dropped copy
  int grid = 75;                // two-plane: vertices along the crease
  int floor_cells = 100;        // two-plane: cells across the floor
  int wall_cells = 34;          // two-plane: cells up the wall
  double spacing = 0.02;        // two-plane: grid spacing, meters
  int copies = 5;               // duplicated room: copy 0 is the template
  int dropped_copies = 2;
  int distractors = 4;
  bool clutter_only = false;    // duplicated room without copies 1..n
  int image_width = 640;        // shifted square
  int image_height = 480;
  int shift = 5;                // pixels

  void validate() const;
};

struct Placement {
  int copy = 0;
  Matrix4 transform = Matrix4::Identity();
  bool dropped = false;
  std::vector<int> regions;   // part regions of this copy
  std::vector<int> vertices;  // ascending
};

/// A mesh with two ground-truth partitions: `parts` is a hierarchy with one
/// supervertex and one region per generated part (the input object search
/// works on), `objects` maps every vertex to its object id.
struct SceneFixture {
  SceneMesh mesh;
  SegmentationHierarchy parts;
  std::vector<int> objects;
  std::vector<std::string> object_names;
  std::vector<Placement> placements;  // duplicated room only; [0] is the template
};

struct ImageFixture {
  RgbImage image;
  Mask truth;      // object mask
  Mask projected;  // truth displaced by `shift` pixels in x and y
};

/// A floor grid and a wall grid meeting at a 90 degree crease; the floor
/// owns the crease vertices. grid * (floor_cells + wall_cells + 1) vertices.
SceneFixture two_plane(const FixtureSpec& spec);
/// Floor grid crossed by two cable-cover ridges, with colored boxes standing
/// on it; one object per box, the ridges belong to the floor.
SceneFixture colored_boxes(const FixtureSpec& spec);
/// Room (floor + two walls) with copies of a multi-part armchair at random
/// positions and headings, plus table and cabinet distractors.
SceneFixture duplicated_room(const FixtureSpec& spec);
ImageFixture shifted_square(const FixtureSpec& spec);

/// Ground truth document: kind, seed, object names, per-vertex object ids,
/// part regions and placements.
nlohmann::json ground_truth_json(const FixtureSpec& spec, const SceneFixture& fixture);

/// Writes scene.ply + parts.json + truth.json, or image.png + truth.png +
/// projected.png for the image kind.
void write_fixture(const FixtureSpec& spec, const std::filesystem::path& dir);

}  // namespace scenecarve::fixtures
