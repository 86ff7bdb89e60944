#include "scenecarve/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace scenecarve {

namespace {

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

ScalarType parse_scalar_type(const std::string& name, const std::string& where) {
  if (name == "char" || name == "int8") return ScalarType::kInt8;
  if (name == "uchar" || name == "uint8") return ScalarType::kUInt8;
  if (name == "short" || name == "int16") return ScalarType::kInt16;
  if (name == "ushort" || name == "uint16") return ScalarType::kUInt16;
  if (name == "int" || name == "int32") return ScalarType::kInt32;
  if (name == "uint" || name == "uint32") return ScalarType::kUInt32;
  if (name == "float" || name == "float32") return ScalarType::kFloat32;
  if (name == "double" || name == "float64") return ScalarType::kFloat64;
  throw ParseError(where + ": unknown PLY scalar type '" + name + "'");
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct Element {
  std::string name;
  long long count = 0;
  std::vector<Property> properties;
};

// Binary little-endian cursor with offset-carrying errors.
class BinaryReader {
 public:
  BinaryReader(const std::string& bytes, std::size_t offset, std::string source)
      : bytes_(bytes), offset_(offset), source_(std::move(source)) {}

  double read(ScalarType t) {
    const std::size_t n = scalar_size(t);
    if (offset_ + n > bytes_.size()) {
      throw ParseError(source_ + ": unexpected end of binary data at offset " +
                       std::to_string(offset_));
    }
    const char* p = bytes_.data() + offset_;
    offset_ += n;
    switch (t) {
      case ScalarType::kInt8: return load<std::int8_t>(p);
      case ScalarType::kUInt8: return load<std::uint8_t>(p);
      case ScalarType::kInt16: return load<std::int16_t>(p);
      case ScalarType::kUInt16: return load<std::uint16_t>(p);
      case ScalarType::kInt32: return load<std::int32_t>(p);
      case ScalarType::kUInt32: return load<std::uint32_t>(p);
      case ScalarType::kFloat32: return load<float>(p);
      case ScalarType::kFloat64: return load<double>(p);
    }
    return 0.0;
  }

  std::size_t offset() const { return offset_; }

 private:
  template <typename T>
  static double load(const char* p) {
    T value;
    std::memcpy(&value, p, sizeof(T));
    return static_cast<double>(value);
  }

  const std::string& bytes_;
  std::size_t offset_;
  std::string source_;
};

// ascii body cursor; reports the 1-based file line of each failure.
class AsciiReader {
 public:
  AsciiReader(const std::string& bytes, std::size_t offset, int first_line, std::string source)
      : stream_(bytes.substr(offset)), line_no_(first_line - 1), source_(std::move(source)) {}

  void next_line() {
    std::string line;
    do {
      if (!std::getline(stream_, line)) {
        throw ParseError(source_ + ": unexpected end of file after line " +
                         std::to_string(line_no_));
      }
      ++line_no_;
    } while (line.find_first_not_of(" \t\r") == std::string::npos);
    tokens_.clear();
    std::istringstream ss(line);
    for (std::string tok; ss >> tok;) tokens_.push_back(tok);
    cursor_ = 0;
  }

  double read() {
    if (cursor_ >= tokens_.size()) {
      throw ParseError(source_ + ": line " + std::to_string(line_no_) + ": too few values");
    }
    const std::string& tok = tokens_[cursor_++];
    char* end = nullptr;
    const double value = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      throw ParseError(source_ + ": line " + std::to_string(line_no_) + ": bad number '" +
                       tok + "'");
    }
    return value;
  }

  int line() const { return line_no_; }

 private:
  std::istringstream stream_;
  std::vector<std::string> tokens_;
  std::size_t cursor_ = 0;
  int line_no_;
  std::string source_;
};

int face_index(double raw, long long face, long long vertex_count, const std::string& source) {
  if (raw < 0 || raw >= static_cast<double>(vertex_count) || raw != std::floor(raw)) {
    std::ostringstream ss;
    ss << source << ": face " << face << " references vertex " << raw << " but mesh has "
       << vertex_count << " vertices";
    throw ValidationError(ss.str());
  }
  return static_cast<int>(raw);
}

}  // namespace

void SceneMesh::validate() const {
  const int n = vertex_count();
  for (int f = 0; f < face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int v = faces(f, k);
      if (v < 0 || v >= n) {
        throw ValidationError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(v) + " but mesh has " + std::to_string(n) +
                              " vertices");
      }
    }
    if (faces(f, 0) == faces(f, 1) || faces(f, 1) == faces(f, 2) || faces(f, 0) == faces(f, 2)) {
      throw ValidationError("face " + std::to_string(f) + " is degenerate (repeated index)");
    }
  }
  if (normals.rows() != 0 && normals.rows() != n) {
    throw ValidationError("normal count does not match vertex count");
  }
  if (colors.rows() != 0 && colors.rows() != n) {
    throw ValidationError("color count does not match vertex count");
  }
}

PlyData read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open mesh file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ply(ss.str(), path.string());
}

PlyData parse_ply(const std::string& bytes, const std::string& source) {
  // Header.
  std::size_t pos = 0;
  int line_no = 0;
  auto next_header_line = [&]() {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) {
      throw ParseError(source + ": line " + std::to_string(line_no + 1) +
                       ": header not terminated by end_header");
    }
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    return line;
  };

  if (next_header_line() != "ply") throw ParseError(source + ": line 1: missing 'ply' magic");

  bool binary = false;
  std::vector<Element> elements;
  for (;;) {
    const std::string line = next_header_line();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    const std::string where = source + ": line " + std::to_string(line_no);
    if (keyword == "end_header") break;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw ParseError(where + ": unsupported PLY format '" + fmt + "'");
    } else if (keyword == "element") {
      Element e;
      if (!(ls >> e.name >> e.count) || e.count < 0) {
        throw ParseError(where + ": malformed element line");
      }
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) throw ParseError(where + ": property before any element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar_type(count_type, where);
        p.type = parse_scalar_type(item_type, where);
      } else {
        p.type = parse_scalar_type(type, where);
        ls >> p.name;
      }
      if (p.name.empty()) throw ParseError(where + ": property without a name");
      elements.back().properties.push_back(p);
    } else {
      throw ParseError(where + ": unexpected header keyword '" + keyword + "'");
    }
  }

  PlyData out;
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;
  std::vector<Eigen::Vector3i> triangles;
  long long vertex_count = 0;
  bool saw_vertex = false;

  BinaryReader bin(bytes, pos, source);
  AsciiReader txt(bytes, pos, line_no + 1, source);

  for (const Element& element : elements) {
    const bool is_vertex = element.name == "vertex";
    const bool is_face = element.name == "face";
    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, iface = -1;
    bool color_is_byte = true;
    for (int k = 0; k < static_cast<int>(element.properties.size()); ++k) {
      const Property& p = element.properties[k];
      if (p.name == "x") ix = k;
      else if (p.name == "y") iy = k;
      else if (p.name == "z") iz = k;
      else if (p.name == "red" || p.name == "r") { ir = k; color_is_byte = p.type == ScalarType::kUInt8; }
      else if (p.name == "green" || p.name == "g") ig = k;
      else if (p.name == "blue" || p.name == "b") ib = k;
      else if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) iface = k;
    }
    if (is_vertex) {
      if (ix < 0 || iy < 0 || iz < 0) throw ParseError(source + ": vertex element lacks x/y/z");
      saw_vertex = true;
      vertex_count = element.count;
      out.has_colors = ir >= 0 && ig >= 0 && ib >= 0;
    }
    if (is_face && iface < 0) throw ParseError(source + ": face element lacks vertex_indices");
    if (is_face && !saw_vertex) throw ParseError(source + ": face element precedes vertices");

    std::vector<double> scalars(element.properties.size());
    std::vector<double> list;
    for (long long item = 0; item < element.count; ++item) {
      if (!binary) txt.next_line();
      for (std::size_t k = 0; k < element.properties.size(); ++k) {
        const Property& p = element.properties[k];
        if (p.is_list) {
          const double count = binary ? bin.read(p.count_type) : txt.read();
          if (count < 0) throw ParseError(source + ": negative list length");
          list.assign(static_cast<std::size_t>(count), 0.0);
          for (double& v : list) v = binary ? bin.read(p.type) : txt.read();
          if (is_face && static_cast<int>(k) == iface) {
            if (list.size() < 3) {
              throw ValidationError(source + ": face " + std::to_string(item) +
                                    " has fewer than 3 vertices");
            }
            const int a = face_index(list[0], item, vertex_count, source);
            for (std::size_t t = 1; t + 1 < list.size(); ++t) {
              triangles.emplace_back(a, face_index(list[t], item, vertex_count, source),
                                     face_index(list[t + 1], item, vertex_count, source));
            }
          }
        } else {
          scalars[k] = binary ? bin.read(p.type) : txt.read();
        }
      }
      if (is_vertex) {
        positions.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
        if (out.has_colors) {
          const double scale = color_is_byte ? 1.0 / 255.0 : 1.0;
          colors.emplace_back(scalars[ir] * scale, scalars[ig] * scale, scalars[ib] * scale);
        }
      }
    }
  }
  if (!saw_vertex) throw ParseError(source + ": no vertex element");

  SceneMesh& mesh = out.mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(positions.size()), 3);
  for (std::size_t i = 0; i < positions.size(); ++i) mesh.vertices.row(i) = positions[i].transpose();
  mesh.faces.resize(static_cast<Eigen::Index>(triangles.size()), 3);
  for (std::size_t i = 0; i < triangles.size(); ++i) mesh.faces.row(i) = triangles[i].transpose();
  if (out.has_colors) {
    mesh.colors.resize(static_cast<Eigen::Index>(colors.size()), 3);
    for (std::size_t i = 0; i < colors.size(); ++i) {
      mesh.colors.row(i) = colors[i].cwiseMax(0.0).cwiseMin(1.0).transpose();
    }
  }
  mesh.validate();
  return out;
}

void write_ply(const std::filesystem::path& path, const SceneMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  const bool has_colors = mesh.colors.rows() == mesh.vertices.rows();
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertex_count() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (has_colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.face_count() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  out << std::setprecision(9);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    out << mesh.vertices(v, 0) << ' ' << mesh.vertices(v, 1) << ' ' << mesh.vertices(v, 2);
    if (has_colors) {
      for (int c = 0; c < 3; ++c) {
        out << ' ' << static_cast<int>(std::lround(std::clamp(mesh.colors(v, c), 0.0, 1.0) * 255.0));
      }
    }
    out << '\n';
  }
  for (int f = 0; f < mesh.face_count(); ++f) {
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
  }
}

std::vector<std::pair<int, int>> mesh_edges(const SceneMesh& mesh) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(std::size_t(mesh.face_count()) * 3);
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.faces(f, k);
      const int b = mesh.faces(f, (k + 1) % 3);
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::vector<int>> vertex_neighbors(const SceneMesh& mesh) {
  std::vector<std::vector<int>> ring(mesh.vertex_count());
  for (const auto& [a, b] : mesh_edges(mesh)) {
    ring[a].push_back(b);
    ring[b].push_back(a);
  }
  for (auto& r : ring) std::sort(r.begin(), r.end());
  return ring;
}

void compute_normals(SceneMesh& mesh, std::vector<std::string>* warnings,
                     const NormalOptions& options) {
  const int n = mesh.vertex_count();
  Points accum = Points::Zero(n, 3);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vector3 a = mesh.position(mesh.faces(f, 0));
    const Vector3 b = mesh.position(mesh.faces(f, 1));
    const Vector3 c = mesh.position(mesh.faces(f, 2));
    // |cross| is twice the area: the sum is area-weighted.
    const Vector3 weighted = (b - a).cross(c - a);
    for (int k = 0; k < 3; ++k) accum.row(mesh.faces(f, k)) += weighted.transpose();
  }

  std::vector<char> isolated(n, 0);
  for (int v = 0; v < n; ++v) {
    const double len = accum.row(v).norm();
    if (len > 0.0 && std::isfinite(len)) {
      accum.row(v) /= len;
    } else {
      accum.row(v) = Vector3::UnitZ().transpose();
      isolated[v] = 1;
      if (warnings) {
        warnings->push_back("vertex " + std::to_string(v) +
                            " has no incident face with non-zero area; normal set to +Z");
      }
    }
  }

  if (!options.bilateral || mesh.face_count() == 0) {
    mesh.normals = accum;
    return;
  }

  const auto edges = mesh_edges(mesh);
  double mean_edge = 0.0;
  for (const auto& [a, b] : edges) mean_edge += (mesh.position(a) - mesh.position(b)).norm();
  mean_edge /= static_cast<double>(edges.size());
  const double spatial_denominator = 2.0 * mean_edge * mean_edge;
  const double range_denominator = 2.0 * options.range_sigma * options.range_sigma;

  const auto ring = vertex_neighbors(mesh);
  Points smoothed(n, 3);
  for (int v = 0; v < n; ++v) {
    const Vector3 nv = accum.row(v).transpose();
    if (isolated[v]) {
      smoothed.row(v) = nv.transpose();
      continue;
    }
    Vector3 sum = nv;  // self weight is exp(0) * exp(0)
    for (int u : ring[v]) {
      if (isolated[u]) continue;
      const Vector3 nu = accum.row(u).transpose();
      const double d2 = (mesh.position(u) - mesh.position(v)).squaredNorm();
      const double angle = std::acos(std::clamp(nu.dot(nv), -1.0, 1.0));
      const double w = spatial_denominator > 0.0
                           ? std::exp(-d2 / spatial_denominator - angle * angle / range_denominator)
                           : 0.0;
      sum += w * nu;
    }
    const double len = sum.norm();
    smoothed.row(v) = (len > 0.0 ? (sum / len) : nv).transpose();
  }
  mesh.normals = smoothed;
}

Box3 bounding_box(const SceneMesh& mesh) {
  Box3 box;
  for (int v = 0; v < mesh.vertex_count(); ++v) box.extend(mesh.position(v));
  return box;
}

}  // namespace scenecarve
