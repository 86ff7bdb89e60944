#include "scenecarve/proj2d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "scenecarve/eval_metrics.hpp"

namespace scenecarve::proj2d {

namespace {

// Clockwise on screen (y grows downwards), starting east.
constexpr std::array<Pixel, 8> kRing = {{{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

int ring_index(int dx, int dy) {
  for (int d = 0; d < 8; ++d) {
    if (kRing[d].x == dx && kRing[d].y == dy) return d;
  }
  return -1;
}

bool is_set(const Mask& m, int x, int y) {
  return x >= 0 && y >= 0 && x < m.cols() && y < m.rows() && m(y, x) != 0;
}

double cos_angle(double ax, double ay, double bx, double by) {
  const double na = std::hypot(ax, ay);
  const double nb = std::hypot(bx, by);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return (ax * bx + ay * by) / (na * nb);
}

double distance(Pixel a, Pixel b) { return std::hypot(double(a.x - b.x), double(a.y - b.y)); }

double smoothness(Pixel prev2, Pixel prev, Pixel cur) {
  return cos_angle(cur.x - prev.x, cur.y - prev.y, prev2.x - prev.x, prev2.y - prev.y);
}

void draw_line(Mask& m, Pixel a, Pixel b) {
  int x = a.x, y = a.y;
  const int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  const int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (x >= 0 && y >= 0 && x < m.cols() && y < m.rows()) m(y, x) = 1;
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

int face_region(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy, int face) {
  const int r0 = hierarchy.region_of_vertex(mesh.faces(face, 0));
  const int r1 = hierarchy.region_of_vertex(mesh.faces(face, 1));
  const int r2 = hierarchy.region_of_vertex(mesh.faces(face, 2));
  if (r1 == r2) return r1;
  return r0;
}

Mask largest_component(const Mask& mask) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> label;
  label.setConstant(h, w, -1);
  int best = -1;
  std::size_t best_size = 0;
  std::vector<Pixel> stack;
  int next = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x) || label(y, x) >= 0) continue;
      const int id = next++;
      std::size_t size = 0;
      stack.assign(1, {x, y});
      label(y, x) = id;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        ++size;
        for (const Pixel& d : kRing) {
          const int nx = p.x + d.x, ny = p.y + d.y;
          if (is_set(mask, nx, ny) && label(ny, nx) < 0) {
            label(ny, nx) = id;
            stack.push_back({nx, ny});
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best = id;
      }
    }
  }
  Mask out = Mask::Zero(h, w);
  if (best >= 0) out = (label == best).cast<std::uint8_t>();
  return out;
}

Contour moore_trace(const Mask& mask) {
  Contour out;
  Pixel start{-1, -1};
  for (int y = 0; y < mask.rows() && start.x < 0; ++y) {
    for (int x = 0; x < mask.cols(); ++x) {
      if (mask(y, x)) {
        start = {x, y};
        break;
      }
    }
  }
  if (start.x < 0) return out;

  // Neighbor search from the cell we backtracked to, clockwise.
  auto step = [&](Pixel c, int back, Pixel& next, int& next_back) {
    for (int i = 1; i <= 8; ++i) {
      const int d = (back + i) % 8;
      const Pixel n{c.x + kRing[d].x, c.y + kRing[d].y};
      if (is_set(mask, n.x, n.y)) {
        const int pd = (back + i - 1) % 8;
        const Pixel prev{c.x + kRing[pd].x, c.y + kRing[pd].y};
        next = n;
        next_back = ring_index(prev.x - n.x, prev.y - n.y);
        return d;
      }
    }
    return -1;
  };

  out.push_back(start);
  Pixel cur = start;
  int back = 4;  // west of the raster-first pixel is unset
  Pixel next;
  int next_back = 0;
  const int first_move = step(cur, back, next, next_back);
  if (first_move < 0) return out;
  const std::size_t limit = 4 * static_cast<std::size_t>(mask.size()) + 8;
  for (;;) {
    cur = next;
    back = next_back;
    const int move = step(cur, back, next, next_back);
    if (cur == start && move == first_move) break;
    out.push_back(cur);
    if (out.size() > limit) break;
  }
  return out;
}

RegionMask project_region(const DepthBuffer& depth, const SceneMesh& mesh,
                          const SegmentationHierarchy& hierarchy, int region, int frame_id) {
  RegionMask rm;
  rm.frame_id = frame_id;
  rm.region = region;
  Mask raw = Mask::Zero(depth.height(), depth.width());
  std::unordered_map<int, bool> owned;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const int f = depth.face(y, x);
      if (f < 0) continue;
      auto it = owned.find(f);
      if (it == owned.end()) it = owned.emplace(f, face_region(mesh, hierarchy, f) == region).first;
      if (it->second) raw(y, x) = 1;
    }
  }
  rm.mask = largest_component(raw);
  rm.contour = moore_trace(rm.mask);
  return rm;
}

RegionMask project_region(const SceneMesh& mesh, const SegmentationHierarchy& hierarchy, int region,
                          const Camera& camera, int frame_id) {
  if (!hierarchy.has_region(region)) throw NotFoundError("region " + std::to_string(region) + " does not exist");
  return project_region(render_depth(mesh, camera), mesh, hierarchy, region, frame_id);
}

EdgeMap::EdgeMap(const Mask& mask) : mask_((mask != 0).cast<std::uint8_t>()) {
  for (int y = 0; y < mask_.rows(); ++y) {
    for (int x = 0; x < mask_.cols(); ++x) {
      if (mask_(y, x)) points_.push_back({x, y});
    }
  }
}

std::vector<Pixel> EdgeMap::nearest(Pixel p, int k, double radius) const {
  std::vector<std::pair<long long, Pixel>> found;
  const int r = static_cast<int>(std::ceil(radius));
  const double r2 = radius * radius;
  const int y0 = std::max(0, p.y - r), y1 = std::min(height() - 1, p.y + r);
  const int x0 = std::max(0, p.x - r), x1 = std::min(width() - 1, p.x + r);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!mask_(y, x)) continue;
      const long long d2 = static_cast<long long>(x - p.x) * (x - p.x) + static_cast<long long>(y - p.y) * (y - p.y);
      if (static_cast<double>(d2) < r2) found.push_back({d2, {x, y}});
    }
  }
  // Rows were scanned in order, so a stable sort on distance keeps the
  // row-then-column tie order.
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (static_cast<int>(found.size()) > k) found.resize(std::max(0, k));
  std::vector<Pixel> out;
  out.reserve(found.size());
  for (const auto& f : found) out.push_back(f.second);
  return out;
}

GrayImage gaussian_blur(const GrayImage& image, double sigma) {
  const int h = static_cast<int>(image.rows());
  const int w = static_cast<int>(image.cols());
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  GrayImage tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * image(y, std::clamp(x + i, 0, w - 1));
      tmp(y, x) = static_cast<float>(s);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * tmp(std::clamp(y + i, 0, h - 1), x);
      out(y, x) = static_cast<float>(s);
    }
  }
  return out;
}

Mask canny(const GrayImage& image, const CannyParams& params) {
  const int h = static_cast<int>(image.rows());
  const int w = static_cast<int>(image.cols());
  Mask edges = Mask::Zero(h, w);
  if (h == 0 || w == 0) return edges;
  const GrayImage g = gaussian_blur(image, params.sigma);
  auto at = [&](int x, int y) -> double { return g(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };

  GrayImage mag(h, w);
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sector(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      mag(y, x) = static_cast<float>(std::hypot(gx, gy));
      double a = std::atan2(gy, gx);
      if (a < 0) a += std::numbers::pi;
      const double deg = a * 180.0 / std::numbers::pi;
      sector(y, x) = deg < 22.5 || deg >= 157.5 ? 0 : deg < 67.5 ? 1 : deg < 112.5 ? 2 : 3;
    }
  }

  std::vector<float> all(mag.data(), mag.data() + mag.size());
  const std::size_t nth = static_cast<std::size_t>(params.high_percentile * double(all.size() - 1));
  std::nth_element(all.begin(), all.begin() + nth, all.end());
  const double high = all[nth];
  const double low = params.low_ratio * high;

  // Gradient-direction neighbor offsets per sector; a pixel survives when it
  // beats the neighbor behind it and is not beaten by the one ahead.
  constexpr int kOff[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  auto m_at = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag(y, x);
  };
  GrayImage thin = GrayImage::Zero(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(y, x);
      if (m <= 0.0) continue;
      const int s = sector(y, x);
      const double ahead = m_at(x + kOff[s][0], y + kOff[s][1]);
      const double behind = m_at(x - kOff[s][0], y - kOff[s][1]);
      if (m > behind && m >= ahead) thin(y, x) = static_cast<float>(m);
    }
  }

  std::vector<Pixel> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (thin(y, x) > 0 && thin(y, x) >= high && !edges(y, x)) {
        edges(y, x) = 1;
        stack.push_back({x, y});
      }
    }
  }
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    for (const Pixel& d : kRing) {
      const int nx = p.x + d.x, ny = p.y + d.y;
      if (nx < 0 || ny < 0 || nx >= w || ny >= h || edges(ny, nx)) continue;
      if (thin(ny, nx) > 0 && thin(ny, nx) >= low) {
        edges(ny, nx) = 1;
        stack.push_back({nx, ny});
      }
    }
  }
  return edges;
}

EdgeMap EdgeDetector::detect(const RgbImage& image, const Mask* precomputed) {
  if (precomputed) return EdgeMap(*precomputed);
  ++canny_calls_;
  return EdgeMap(canny(to_gray(image), params_));
}

int hist_half_window(int width, int height) {
  const double scale = std::max(width / 640.0, height / 480.0);
  return std::max(1, static_cast<int>(std::lround(10.0 * scale)));
}

int orientation_bin(int dx, int dy) {
  if (dx == 0 && dy == 0) return 0;
  // Rotate into the quadrant a > 0, b >= 0 by quarter turns.
  int q = 0, a = dx, b = dy;
  while (!(a > 0 && b >= 0)) {
    const int t = a;
    a = b;
    b = -t;
    ++q;
  }
  int sub;
  if (b == 0) {
    sub = 0;
  } else if (a == b) {
    sub = 2;
  } else {
    sub = static_cast<int>(std::atan2(double(b), double(a)) / (std::numbers::pi / 8.0));
    sub = std::clamp(sub, 0, 3);
  }
  return 4 * q + sub;
}

LocalHist local_hist(const Mask& set, Pixel center, int half_window) {
  LocalHist hist = LocalHist::Zero();
  const int h = static_cast<int>(set.rows());
  const int w = static_cast<int>(set.cols());
  double total = 0.0;
  for (int y = std::max(0, center.y - half_window); y <= std::min(h - 1, center.y + half_window); ++y) {
    for (int x = std::max(0, center.x - half_window); x <= std::min(w - 1, center.x + half_window); ++x) {
      if (!set(y, x) || (x == center.x && y == center.y)) continue;
      hist[orientation_bin(x - center.x, y - center.y)] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) hist /= total;
  return hist;
}

double hist_chi2(const LocalHist& a, const LocalHist& b) {
  const bool za = (a.array() == 0.0).all();
  const bool zb = (b.array() == 0.0).all();
  if (za != zb) return 1.0;
  double sum = 0.0;
  for (int i = 0; i < kHistBins; ++i) {
    const double den = a[i] + b[i];
    if (den > 0.0) sum += (a[i] - b[i]) * (a[i] - b[i]) / den;
  }
  return 0.5 * sum;
}

std::string to_string(AlignMode mode) {
  switch (mode) {
    case AlignMode::kProjection: return "projection";
    case AlignMode::kLocal: return "local";
    case AlignMode::kContinuity: return "continuity";
    case AlignMode::kSmoothness: return "smoothness";
    case AlignMode::kFull: return "full";
  }
  return "full";
}

AlignMode parse_align_mode(const std::string& name) {
  for (AlignMode m : {AlignMode::kProjection, AlignMode::kLocal, AlignMode::kContinuity, AlignMode::kSmoothness,
                      AlignMode::kFull}) {
    if (to_string(m) == name) return m;
  }
  throw ValidationError("unknown alignment mode '" + name +
                        "' (expected projection, local, continuity, smoothness or full)");
}

AlignParams params_for(AlignMode mode, AlignParams base) {
  switch (mode) {
    case AlignMode::kProjection:
    case AlignMode::kLocal:
      base.kappa_continuity = 0.0;
      base.kappa_smoothness = 0.0;
      break;
    case AlignMode::kContinuity:
      base.kappa_smoothness = 0.0;
      break;
    case AlignMode::kSmoothness:
      base.kappa_continuity = 0.0;
      break;
    case AlignMode::kFull:
      break;
  }
  return base;
}

CandidateTable build_candidates(const Contour& contour, const EdgeMap& edges, const AlignParams& params) {
  const int w = edges.width();
  const int h = edges.height();
  const int half = hist_half_window(w, h);
  const double radius = params.radius_fraction * std::max(w, h);

  Mask on_contour = Mask::Zero(h, w);
  for (const Pixel& p : contour) {
    if (p.x >= 0 && p.y >= 0 && p.x < w && p.y < h) on_contour(p.y, p.x) = 1;
  }

  std::unordered_map<long long, LocalHist> edge_hists;
  auto edge_hist = [&](Pixel p) -> const LocalHist& {
    const long long key = static_cast<long long>(p.y) * w + p.x;
    auto it = edge_hists.find(key);
    if (it == edge_hists.end()) it = edge_hists.emplace(key, local_hist(edges.mask(), p, half)).first;
    return it->second;
  };

  CandidateTable t;
  t.pixels.resize(contour.size());
  t.local_cost.resize(contour.size());
  bool any = false;
  for (std::size_t i = 0; i < contour.size(); ++i) {
    std::vector<Pixel> cand = edges.empty() ? std::vector<Pixel>{} : edges.nearest(contour[i], params.candidates, radius);
    if (cand.empty()) {
      cand.push_back(contour[i]);
    } else {
      any = true;
    }
    const LocalHist hu = local_hist(on_contour, contour[i], half);
    for (const Pixel& c : cand) t.local_cost[i].push_back(hist_chi2(hu, edge_hist(c)));
    t.pixels[i] = std::move(cand);
  }
  t.no_edges = !any;
  return t;
}

AlignResult solve_alignment(const CandidateTable& table, const AlignParams& params) {
  const int n = static_cast<int>(table.pixels.size());
  if (n < 3) throw PreconditionError("contour alignment needs at least 3 contour points");
  const double k1 = params.kappa_continuity;
  const double k2 = params.kappa_smoothness;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  auto size = [&](int i) { return static_cast<int>(table.pixels[i].size()); };

  // cost[b * K_i + c]: best objective of points 0..i with choices b at i-1
  // and c at i.
  std::vector<double> cost(size(0) * size(1));
  for (int a = 0; a < size(0); ++a) {
    for (int b = 0; b < size(1); ++b) {
      cost[a * size(1) + b] = table.local_cost[0][a] + table.local_cost[1][b] +
                              k1 * distance(table.pixels[0][a], table.pixels[1][b]);
    }
  }
  std::vector<std::vector<int>> back(n);
  for (int i = 2; i < n; ++i) {
    const int ka = size(i - 2), kb = size(i - 1), kc = size(i);
    std::vector<double> next(kb * kc, kInf);
    back[i].assign(kb * kc, 0);
    for (int b = 0; b < kb; ++b) {
      const Pixel pb = table.pixels[i - 1][b];
      for (int c = 0; c < kc; ++c) {
        const Pixel pc = table.pixels[i][c];
        const double step = table.local_cost[i][c] + k1 * distance(pb, pc);
        double best = kInf;
        int arg = 0;
        for (int a = 0; a < ka; ++a) {
          double v = cost[a * kb + b];
          if (k2 != 0.0) v += k2 * smoothness(table.pixels[i - 2][a], pb, pc);
          if (v < best) {
            best = v;
            arg = a;
          }
        }
        next[b * kc + c] = best + step;
        back[i][b * kc + c] = arg;
      }
    }
    cost = std::move(next);
  }

  const int kb = size(n - 2), kc = size(n - 1);
  int best_b = 0, best_c = 0;
  double best = kInf;
  for (int b = 0; b < kb; ++b) {
    for (int c = 0; c < kc; ++c) {
      if (cost[b * kc + c] < best) {
        best = cost[b * kc + c];
        best_b = b;
        best_c = c;
      }
    }
  }

  AlignResult r;
  r.choice.assign(n, 0);
  r.choice[n - 1] = best_c;
  r.choice[n - 2] = best_b;
  for (int i = n - 1; i >= 2; --i) {
    r.choice[i - 2] = back[i][r.choice[i - 1] * size(i) + r.choice[i]];
  }
  r.mapped.reserve(n);
  for (int i = 0; i < n; ++i) r.mapped.push_back(table.pixels[i][r.choice[i]]);
  r.cost = alignment_cost(table, r.choice, params);
  r.no_edges = table.no_edges;
  return r;
}

double alignment_cost(const CandidateTable& table, const std::vector<int>& choice, const AlignParams& params) {
  const std::size_t n = table.pixels.size();
  if (choice.size() != n) throw ValidationError("choice vector does not match the contour");
  auto f = [&](std::size_t i) { return table.pixels[i].at(choice[i]); };
  double local = 0.0, cont = 0.0, smooth = 0.0;
  for (std::size_t i = 0; i < n; ++i) local += table.local_cost[i].at(choice[i]);
  for (std::size_t i = 1; i < n; ++i) cont += distance(f(i), f(i - 1));
  for (std::size_t i = 2; i < n; ++i) smooth += smoothness(f(i - 2), f(i - 1), f(i));
  return local + params.kappa_continuity * cont + params.kappa_smoothness * smooth;
}

AlignResult align_contour(const Contour& contour, const EdgeMap& edges, const AlignParams& params) {
  if (contour.size() < 3) throw PreconditionError("contour alignment needs at least 3 contour points");
  const CandidateTable table = build_candidates(contour, edges, params);
  if (table.no_edges) {
    AlignResult r;
    r.mapped = contour;
    r.choice.assign(contour.size(), 0);
    r.cost = alignment_cost(table, r.choice, params);
    r.no_edges = true;
    return r;
  }
  return solve_alignment(table, params);
}

Mask contour_to_mask(const Contour& contour, int width, int height) {
  Mask boundary = Mask::Zero(height, width);
  if (contour.empty()) return boundary;
  for (std::size_t i = 0; i < contour.size(); ++i) {
    draw_line(boundary, contour[i], contour[(i + 1) % contour.size()]);
  }
  Mask outside = Mask::Zero(height, width);
  std::vector<Pixel> stack;
  auto seed = [&](int x, int y) {
    if (!boundary(y, x) && !outside(y, x)) {
      outside(y, x) = 1;
      stack.push_back({x, y});
    }
  };
  for (int x = 0; x < width; ++x) {
    seed(x, 0);
    seed(x, height - 1);
  }
  for (int y = 0; y < height; ++y) {
    seed(0, y);
    seed(width - 1, y);
  }
  constexpr Pixel kFour[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    for (const Pixel& d : kFour) {
      const int nx = p.x + d.x, ny = p.y + d.y;
      if (nx >= 0 && ny >= 0 && nx < width && ny < height) seed(nx, ny);
    }
  }
  return (outside == 0).cast<std::uint8_t>();
}

std::vector<int> mask_labels(const Mask& mask) {
  std::vector<int> out(mask.size());
  for (Eigen::Index i = 0; i < mask.size(); ++i) out[i] = mask.data()[i] != 0 ? 1 : 0;
  return out;
}

AblationResult ablate_alignment(const Mask& projected, const EdgeMap& edges, const Mask& truth, AlignMode mode,
                                const AlignParams& base) {
  if (projected.rows() != truth.rows() || projected.cols() != truth.cols()) {
    throw ValidationError("projected and truth masks differ in size");
  }
  AblationResult r;
  r.mode = mode;
  const Mask component = largest_component(projected);
  r.contour = moore_trace(component);
  if (mode == AlignMode::kProjection) {
    r.mask = projected;
  } else {
    const AlignResult a = align_contour(r.contour, edges, params_for(mode, base));
    r.contour = a.mapped;
    r.mask = contour_to_mask(r.contour, static_cast<int>(projected.cols()), static_cast<int>(projected.rows()));
  }
  r.oce = eval::oce(mask_labels(r.mask), mask_labels(truth));
  return r;
}

}  // namespace scenecarve::proj2d
