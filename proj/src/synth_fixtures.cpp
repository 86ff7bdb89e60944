#include "scenecarve/synth_fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

#include "scenecarve/random.hpp"

namespace scenecarve::fixtures {
namespace {

using Json = nlohmann::json;

Matrix4 pose(double yaw, const Vector3& t) {
  Matrix4 m = Matrix4::Identity();
  m.block<3, 3>(0, 0) = Eigen::AngleAxisd(yaw, Vector3::UnitZ()).toRotationMatrix();
  m.block<3, 1>(0, 3) = t;
  return m;
}

Vector3 transform_point(const Matrix4& m, const Vector3& p) {
  return m.block<3, 3>(0, 0) * p + m.block<3, 1>(0, 3);
}

class MeshBuilder {
 public:
  int add_vertex(const Vector3& p, const Vector3& color, int part, int object) {
    positions_.push_back(p);
    colors_.push_back(color);
    part_.push_back(part);
    object_.push_back(object);
    return static_cast<int>(positions_.size()) - 1;
  }

  void add_triangle(int a, int b, int c) { triangles_.emplace_back(a, b, c); }

  /// nu x nv cells spanning origin + [0,1]*du + [0,1]*dv; normal along du x dv.
  void grid(const Vector3& origin, const Vector3& du, const Vector3& dv, int nu, int nv,
            const Vector3& color, int part, int object) {
    std::vector<int> idx((nu + 1) * (nv + 1));
    for (int j = 0; j <= nv; ++j) {
      for (int i = 0; i <= nu; ++i) {
        idx[j * (nu + 1) + i] =
            add_vertex(origin + du * (double(i) / nu) + dv * (double(j) / nv), color, part, object);
      }
    }
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nu; ++i) {
        const int a = idx[j * (nu + 1) + i], b = idx[j * (nu + 1) + i + 1];
        const int c = idx[(j + 1) * (nu + 1) + i + 1], d = idx[(j + 1) * (nu + 1) + i];
        add_triangle(a, b, c);
        add_triangle(a, c, d);
      }
    }
  }

  /// Closed-top box without a bottom, footprint centered on the local origin
  /// and standing on local z = 0. Faces share their edge vertices.
  void box(const Matrix4& m, const Vector3& size, double cell, const Vector3& color, int part,
           int object) {
    int n[3];
    for (int k = 0; k < 3; ++k) n[k] = std::max(1, static_cast<int>(std::lround(size[k] / cell)));
    std::map<std::tuple<int, int, int>, int> lattice;
    auto vertex = [&](int l[3]) {
      const auto key = std::make_tuple(l[0], l[1], l[2]);
      if (auto it = lattice.find(key); it != lattice.end()) return it->second;
      const Vector3 local(size.x() * (double(l[0]) / n[0] - 0.5), size.y() * (double(l[1]) / n[1] - 0.5),
                          size.z() * double(l[2]) / n[2]);
      const int v = add_vertex(transform_point(m, local), color, part, object);
      lattice.emplace(key, v);
      return v;
    };
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, c = (a + 2) % 3;  // e_b x e_c = e_a
      for (int side : {0, n[a]}) {
        if (a == 2 && side == 0) continue;  // open bottom
        const bool flip = side == 0;
        for (int q = 0; q < n[c]; ++q) {
          for (int p = 0; p < n[b]; ++p) {
            int l00[3], l10[3], l11[3], l01[3];
            l00[a] = l10[a] = l11[a] = l01[a] = side;
            l00[b] = p, l00[c] = q;
            l10[b] = p + 1, l10[c] = q;
            l11[b] = p + 1, l11[c] = q + 1;
            l01[b] = p, l01[c] = q + 1;
            const int v00 = vertex(l00), v10 = vertex(l10), v11 = vertex(l11), v01 = vertex(l01);
            if (flip) {
              add_triangle(v00, v11, v10);
              add_triangle(v00, v01, v11);
            } else {
              add_triangle(v00, v10, v11);
              add_triangle(v00, v11, v01);
            }
          }
        }
      }
    }
  }

  /// Moves every vertex added so far.
  template <typename Fn>
  void displace(Fn fn) {
    for (auto& p : positions_) fn(p);
  }

  /// Removes the faces for which `drop(face)` holds.
  template <typename Pred>
  void drop_faces(Pred drop) {
    std::vector<Eigen::Vector3i> kept;
    for (int f = 0; f < static_cast<int>(triangles_.size()); ++f) {
      if (!drop(f)) kept.push_back(triangles_[f]);
    }
    triangles_ = std::move(kept);
  }

  Vector3 face_centroid(int f) const {
    const auto& t = triangles_[f];
    return (positions_[t[0]] + positions_[t[1]] + positions_[t[2]]) / 3.0;
  }
  int face_object(int f) const { return object_[triangles_[f][0]]; }
  int face_count() const { return static_cast<int>(triangles_.size()); }

  void jitter(Rng& rng, double sigma) {
    jitter(rng, [sigma](const Vector3&) { return sigma; });
  }

  /// Noise whose sigma varies with the undisturbed position.
  template <typename SigmaFn>
  void jitter(Rng& rng, SigmaFn sigma_at) {
    for (auto& p : positions_) {
      const double sigma = sigma_at(p);
      if (sigma <= 0.0) continue;
      for (int k = 0; k < 3; ++k) p[k] += normal(rng, sigma);
    }
  }

  struct Result {
    SceneFixture fixture;
    std::vector<int> part_map;  // old part id -> dense id, or -1 when the part vanished
  };

  /// Drops unreferenced vertices, renumbers parts densely in ascending old id
  /// order and computes normals.
  Result finish(int part_count, std::vector<std::string> object_names) const {
    std::vector<int> remap(positions_.size(), -1);
    for (const auto& t : triangles_) {
      for (int k = 0; k < 3; ++k) remap[t[k]] = 0;
    }
    std::vector<char> part_used(part_count, 0);
    int next = 0;
    for (std::size_t v = 0; v < positions_.size(); ++v) {
      if (remap[v] < 0) continue;
      remap[v] = next++;
      part_used[part_[v]] = 1;
    }
    Result r;
    r.part_map.assign(part_count, -1);
    int dense = 0;
    for (int p = 0; p < part_count; ++p) {
      if (part_used[p]) r.part_map[p] = dense++;
    }

    SceneFixture& fx = r.fixture;
    fx.mesh.vertices.resize(next, 3);
    fx.mesh.colors.resize(next, 3);
    fx.parts.supervertex_of.resize(next);
    fx.objects.resize(next);
    for (std::size_t v = 0; v < positions_.size(); ++v) {
      if (remap[v] < 0) continue;
      fx.mesh.vertices.row(remap[v]) = positions_[v].transpose();
      fx.mesh.colors.row(remap[v]) = colors_[v].transpose();
      fx.parts.supervertex_of[remap[v]] = r.part_map[part_[v]];
      fx.objects[remap[v]] = object_[v];
    }
    fx.parts.region_of.resize(dense);
    for (int s = 0; s < dense; ++s) fx.parts.region_of[s] = s;
    fx.mesh.faces.resize(static_cast<int>(triangles_.size()), 3);
    for (std::size_t f = 0; f < triangles_.size(); ++f) {
      for (int k = 0; k < 3; ++k) fx.mesh.faces(f, k) = remap[triangles_[f][k]];
    }
    compute_normals(fx.mesh);
    fx.object_names = std::move(object_names);
    return r;
  }

 private:
  std::vector<Vector3> positions_;
  std::vector<Vector3> colors_;
  std::vector<int> part_;
  std::vector<int> object_;
  std::vector<Eigen::Vector3i> triangles_;
};

Vector3 noisy_color(Rng& rng, const Vector3& base, double sigma) {
  Vector3 c;
  for (int k = 0; k < 3; ++k) c[k] = std::clamp(base[k] + normal(rng, sigma), 0.0, 1.0);
  return c;
}

}  // namespace

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::kTwoPlane: return "two-plane";
    case Kind::kColoredBoxes: return "colored-boxes";
    case Kind::kDuplicatedRoom: return "duplicated-room";
    case Kind::kShiftedSquare: return "shifted-square";
  }
  return "unknown";
}

Kind parse_kind(const std::string& name) {
  for (Kind k : {Kind::kTwoPlane, Kind::kColoredBoxes, Kind::kDuplicatedRoom, Kind::kShiftedSquare}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown fixture kind '" + name +
                        "' (expected two-plane, colored-boxes, duplicated-room or shifted-square)");
}

void FixtureSpec::validate() const {
  if (jitter < 0.0) throw ValidationError("fixture jitter must be non-negative");
  if (drop_fraction < 0.0 || drop_fraction >= 1.0) throw ValidationError("drop fraction must be in [0, 1)");
  if (grid < 2 || floor_cells < 1 || wall_cells < 1) throw ValidationError("two-plane grid is too small");
  if (!(spacing > 0.0)) throw ValidationError("two-plane spacing must be positive");
  if (copies < 1) throw ValidationError("duplicated room needs at least the template copy");
  if (dropped_copies < 0 || dropped_copies > copies - 1) {
    throw ValidationError("dropped copies must be between 0 and copies - 1");
  }
  if (distractors < 0) throw ValidationError("distractor count must be non-negative");
  if (image_width < 16 || image_height < 16) throw ValidationError("image fixture is too small");
  if (std::abs(shift) * 4 >= std::min(image_width, image_height)) throw ValidationError("shift too large");
}

SceneFixture two_plane(const FixtureSpec& spec) {
  spec.validate();
  const int n = spec.grid;
  const int floor = spec.floor_cells;
  const int wall = spec.wall_cells;
  const int cols = floor + wall + 1;
  const double h = spec.spacing;
  Rng rng(spec.seed);
  MeshBuilder mb;
  // Column i runs from -wall (top of the wall) to floor; i = 0 is the crease
  // and belongs to the floor.
  std::vector<int> idx(cols * n);
  for (int j = 0; j < n; ++j) {
    for (int i = -wall; i <= floor; ++i) {
      const Vector3 p = i >= 0 ? Vector3(i * h, j * h, 0.0) : Vector3(0.0, j * h, -i * h);
      const int object = i >= 0 ? 0 : 1;
      idx[j * cols + (i + wall)] = mb.add_vertex(p, Vector3::Constant(0.6), object, object);
    }
  }
  for (int j = 0; j + 1 < n; ++j) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = idx[j * cols + c], b = idx[j * cols + c + 1];
      const int d = idx[(j + 1) * cols + c], e = idx[(j + 1) * cols + c + 1];
      // Diagonals mirror across the crease so both sides see the same fan.
      if (c >= wall) {
        mb.add_triangle(a, b, e);
        mb.add_triangle(a, e, d);
      } else {
        mb.add_triangle(a, b, d);
        mb.add_triangle(b, e, d);
      }
    }
  }
  mb.jitter(rng, spec.jitter);
  return mb.finish(2, {"floor", "wall"}).fixture;
}

SceneFixture colored_boxes(const FixtureSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  MeshBuilder mb;
  constexpr double kFloor = 3.0;
  constexpr int kFloorCells = 120;
  constexpr double kRidgeHeight = 0.06;
  constexpr double kRidgeHalfWidth = 0.025;
  const Vector3 floor_color(0.55, 0.55, 0.5);
  mb.grid(Vector3(-kFloor / 2, -kFloor / 2, 0.0), Vector3(kFloor, 0, 0), Vector3(0, kFloor, 0), kFloorCells,
          kFloorCells, floor_color, 0, 0);
  // Cable covers: ridges of triangular profile running across the floor.
  // Their mean normal is vertical, like the floor around them.
  mb.displace([&](Vector3& p) {
    auto ridge = [](double t, double at) { return std::max(0.0, 1.0 - std::abs(t - at) / kRidgeHalfWidth); };
    p.z() += kRidgeHeight * std::max(ridge(p.x(), 0.0), ridge(p.y(), 0.0));
  });

  const Vector3 palette[] = {{0.85, 0.15, 0.1}, {0.1, 0.6, 0.2}, {0.15, 0.25, 0.85}, {0.9, 0.8, 0.1},
                             {0.6, 0.1, 0.7},   {0.1, 0.7, 0.75}};
  const Vector3 slots[] = {{-0.75, -0.75, 0}, {0.75, -0.75, 0}, {-0.75, 0.75, 0}, {0.75, 0.75, 0}};
  std::vector<std::string> names = {"floor"};
  for (int b = 0; b < 4; ++b) {
    const Vector3 size(uniform(rng, 0.35, 0.6), uniform(rng, 0.35, 0.6), uniform(rng, 0.3, 0.7));
    const Vector3 offset(uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), 0.0);
    mb.box(pose(uniform(rng, 0.0, std::numbers::pi / 2), slots[b] + offset), size, 0.025, palette[b], b + 1, b + 1);
    names.push_back("box" + std::to_string(b + 1));
  }
  mb.jitter(rng, spec.jitter);
  SceneFixture fx = mb.finish(5, names).fixture;
  for (int v = 0; v < fx.mesh.vertex_count(); ++v) {
    fx.mesh.colors.row(v) = noisy_color(rng, fx.mesh.color(v), 0.02).transpose();
  }
  return fx;
}

namespace {

struct PartBox {
  Vector3 center;  // footprint center, bottom z
  Vector3 size;
};

std::vector<PartBox> armchair() {
  std::vector<PartBox> parts = {
      {{0.0, 0.0, 0.4}, {0.8, 0.7, 0.12}},       // seat
      {{0.0, -0.29, 0.52}, {0.8, 0.12, 0.6}},    // back
      {{-0.35, 0.06, 0.52}, {0.1, 0.58, 0.22}},  // arms
      {{0.35, 0.06, 0.52}, {0.1, 0.58, 0.22}},
  };
  for (double x : {-0.35, 0.35}) {
    for (double y : {-0.3, 0.3}) parts.push_back({{x, y, 0.0}, {0.06, 0.06, 0.4}});
  }
  return parts;
}

std::vector<PartBox> distractor(Rng& rng, int kind) {
  const double s = uniform(rng, 0.85, 1.15);
  switch (kind % 4) {
    case 0: {  // table
      const double w = 1.2 * s, d = 0.8 * uniform(rng, 0.85, 1.15), h = 0.72;
      std::vector<PartBox> p = {{{0, 0, h}, {w, d, 0.05}}};
      for (double x : {-1.0, 1.0}) {
        for (double y : {-1.0, 1.0}) p.push_back({{x * (w / 2 - 0.05), y * (d / 2 - 0.05), 0}, {0.06, 0.06, h}});
      }
      return p;
    }
    case 1:  // cabinet
      return {{{0, 0, 0}, {0.9 * s, 0.45 * s, 1.2 * uniform(rng, 0.85, 1.15)}}};
    case 2: {  // bench
      const double w = 1.4 * s;
      return {{{0, 0, 0.42}, {w, 0.4, 0.08}},
              {{-(w / 2 - 0.05), 0, 0}, {0.06, 0.4, 0.42}},
              {{w / 2 - 0.05, 0, 0}, {0.06, 0.4, 0.42}}};
    }
    default:  // ottoman
      return {{{0, 0, 0}, {0.6 * s, 0.6 * s, 0.45 * s}}};
  }
}

double footprint_radius(const std::vector<PartBox>& parts) {
  double r = 0.0;
  for (const auto& p : parts) {
    r = std::max(r, std::hypot(std::abs(p.center.x()) + p.size.x() / 2, std::abs(p.center.y()) + p.size.y() / 2));
  }
  return r;
}

}  // namespace

SceneFixture duplicated_room(const FixtureSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  MeshBuilder mb;
  constexpr double kRoom = 6.0;
  constexpr double kWall = 2.5;
  constexpr double kCell = 0.05;

  std::vector<std::string> names = {"floor", "wall_x", "wall_y"};
  int part = 0;
  mb.grid(Vector3(0, 0, 0), Vector3(kRoom, 0, 0), Vector3(0, kRoom, 0), 60, 60, Vector3(0.5, 0.5, 0.45), part++, 0);
  // Walls along x = 0 and y = 0, facing into the room.
  mb.grid(Vector3(0, 0, 0), Vector3(0, kRoom, 0), Vector3(0, 0, kWall), 60, 25, Vector3(0.8, 0.8, 0.75), part++, 1);
  mb.grid(Vector3(0, 0, 0), Vector3(0, 0, kWall), Vector3(kRoom, 0, 0), 25, 60, Vector3(0.75, 0.8, 0.8), part++, 2);

  struct Item {
    std::vector<PartBox> parts;
    int copy = -1;  // -1 for distractors
  };
  std::vector<Item> items;
  const int copies = spec.clutter_only ? 1 : spec.copies;
  for (int c = 0; c < copies; ++c) items.push_back({armchair(), c});
  for (int d = 0; d < spec.distractors; ++d) items.push_back({distractor(rng, d), -1});

  // Layout by rejection sampling; a layout that jams is redrawn from scratch.
  std::vector<Vector3> centers;
  for (int layout = 0; centers.size() < items.size(); ++layout) {
    if (layout > 1000) throw ValidationError("duplicated room: could not place all objects");
    centers.clear();
    for (std::size_t it = 0; it < items.size(); ++it) {
      const double radius = footprint_radius(items[it].parts);
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const Vector3 center(uniform(rng, 0.3 + radius, kRoom - 0.3 - radius),
                             uniform(rng, 0.3 + radius, kRoom - 0.3 - radius), 0.0);
        placed = true;
        for (std::size_t o = 0; o < centers.size(); ++o) {
          if ((centers[o] - center).norm() < footprint_radius(items[o].parts) + radius + 0.25) placed = false;
        }
        if (placed) centers.push_back(center);
      }
      if (!placed) break;
    }
  }

  std::vector<std::pair<int, int>> copy_parts;  // [first, last) part ids per copy
  std::vector<Matrix4> copy_pose;
  std::vector<int> copy_object;
  for (std::size_t it = 0; it < items.size(); ++it) {
    const Vector3& center = centers[it];
    const Matrix4 m = pose(uniform(rng, 0.0, 2.0 * std::numbers::pi), center);
    const int object = static_cast<int>(names.size());
    const Vector3 color(uniform(rng, 0.2, 0.9), uniform(rng, 0.2, 0.9), uniform(rng, 0.2, 0.9));
    names.push_back(items[it].copy >= 0 ? "copy" + std::to_string(items[it].copy)
                                        : "distractor" + std::to_string(object));
    const int first = part;
    for (const PartBox& pb : items[it].parts) {
      Matrix4 local = Matrix4::Identity();
      local.block<3, 1>(0, 3) = pb.center;
      mb.box(m * local, pb.size, kCell, color, part++, object);
    }
    if (items[it].copy >= 0) {
      copy_parts.emplace_back(first, part);
      copy_pose.push_back(m);
      copy_object.push_back(object);
    }
  }

  // Contiguous occlusion: drop the faces of a copy lying furthest along a
  // random direction, drop_fraction of its faces in total.
  std::vector<char> dropped(copy_parts.size(), 0);
  if (!spec.clutter_only) {
    for (std::size_t d = 1; d <= static_cast<std::size_t>(spec.dropped_copies) && d < dropped.size(); ++d) {
      dropped[d] = 1;
    }
  }
  for (std::size_t c = 0; c < copy_parts.size(); ++c) {
    if (!dropped[c]) continue;
    const int object = copy_object[c];
    const double az = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double el = uniform(rng, -0.5, 0.5);
    const Vector3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    std::vector<std::pair<double, int>> faces;
    for (int f = 0; f < mb.face_count(); ++f) {
      if (mb.face_object(f) == object) faces.emplace_back(mb.face_centroid(f).dot(dir), f);
    }
    std::sort(faces.begin(), faces.end(), std::greater<>());
    const std::size_t count = static_cast<std::size_t>(std::lround(spec.drop_fraction * faces.size()));
    std::vector<char> drop(mb.face_count(), 0);
    for (std::size_t k = 0; k < count; ++k) drop[faces[k].second] = 1;
    mb.drop_faces([&](int f) { return drop[f] != 0; });
  }

  mb.jitter(rng, spec.jitter);
  auto result = mb.finish(part, names);
  SceneFixture out = std::move(result.fixture);
  for (std::size_t c = 0; c < copy_parts.size(); ++c) {
    Placement p;
    p.copy = static_cast<int>(c);
    p.transform = copy_pose[c];
    p.dropped = dropped[c] != 0;
    for (int q = copy_parts[c].first; q < copy_parts[c].second; ++q) {
      if (result.part_map[q] >= 0) p.regions.push_back(result.part_map[q]);
    }
    for (int v = 0; v < out.mesh.vertex_count(); ++v) {
      if (std::binary_search(p.regions.begin(), p.regions.end(), out.parts.supervertex_of[v])) {
        p.vertices.push_back(v);
      }
    }
    out.placements.push_back(std::move(p));
  }
  return out;
}

ImageFixture shifted_square(const FixtureSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int w = spec.image_width, h = spec.image_height;
  const int side = static_cast<int>(0.4 * h);
  const int x0 = (w - side) / 2 + static_cast<int>(uniform(rng, -0.1, 0.1) * w);
  const int y0 = (h - side) / 2 + static_cast<int>(uniform(rng, -0.1, 0.1) * h);

  ImageFixture fx;
  fx.image = RgbImage(w, h);
  fx.truth = Mask::Zero(h, w);
  fx.projected = Mask::Zero(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool inside = x >= x0 && x < x0 + side && y >= y0 && y < y0 + side;
      const bool shifted = x >= x0 + spec.shift && x < x0 + side + spec.shift && y >= y0 + spec.shift &&
                           y < y0 + side + spec.shift;
      fx.truth(y, x) = inside ? 1 : 0;
      fx.projected(y, x) = shifted ? 1 : 0;
      const double base = inside ? 190.0 : 50.0;
      const double value = std::clamp(base + normal(rng, 3.0), 0.0, 255.0);
      std::uint8_t* px = fx.image.at(x, y);
      px[0] = static_cast<std::uint8_t>(std::lround(value));
      px[1] = static_cast<std::uint8_t>(std::lround(value * 0.9));
      px[2] = static_cast<std::uint8_t>(std::lround(value * 0.8));
    }
  }
  return fx;
}

Json ground_truth_json(const FixtureSpec& spec, const SceneFixture& fixture) {
  Json j;
  j["kind"] = to_string(spec.kind);
  j["seed"] = spec.seed;
  j["jitter"] = spec.jitter;
  j["objects"] = fixture.object_names;
  Json runs = Json::array();
  for (std::size_t v = 0; v < fixture.objects.size();) {
    std::size_t e = v;
    while (e < fixture.objects.size() && fixture.objects[e] == fixture.objects[v]) ++e;
    runs.push_back({fixture.objects[v], e - v});
    v = e;
  }
  j["vertex_object_runs"] = runs;
  Json placements = Json::array();
  for (const Placement& p : fixture.placements) {
    std::vector<double> t;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) t.push_back(p.transform(r, c));
    }
    placements.push_back({{"copy", p.copy},
                          {"transform", t},
                          {"dropped", p.dropped},
                          {"regions", p.regions},
                          {"vertex_count", p.vertices.size()}});
  }
  j["placements"] = placements;
  return j;
}

void write_fixture(const FixtureSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (spec.kind == Kind::kShiftedSquare) {
    const ImageFixture fx = shifted_square(spec);
    write_png(dir / "image.png", fx.image);
    write_mask_png(dir / "truth.png", fx.truth);
    write_mask_png(dir / "projected.png", fx.projected);
    return;
  }
  SceneFixture fx;
  switch (spec.kind) {
    case Kind::kTwoPlane: fx = two_plane(spec); break;
    case Kind::kColoredBoxes: fx = colored_boxes(spec); break;
    default: fx = duplicated_room(spec); break;
  }
  write_ply(dir / "scene.ply", fx.mesh);
  save_annotations(dir / "parts.json", fx.parts);
  std::ofstream out(dir / "truth.json", std::ios::binary);
  out << ground_truth_json(spec, fx).dump(1) << "\n";
  if (!out) throw ValidationError("cannot write " + (dir / "truth.json").string());
}

}  // namespace scenecarve::fixtures
