#include "carotid/surface.hpp"

#include "carotid/error.hpp"
#include "carotid/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <utility>

namespace carotid {

std::string_view to_string(MeshTag tag) {
  switch (tag) {
    case MeshTag::inner_wall: return "inner_wall";
    case MeshTag::outer_wall: return "outer_wall";
    case MeshTag::pcmra: return "pcmra";
  }
  return "inner_wall";
}

MeshTag mesh_tag_from_string(std::string_view name) {
  if (name == "inner_wall") return MeshTag::inner_wall;
  if (name == "outer_wall") return MeshTag::outer_wall;
  if (name == "pcmra") return MeshTag::pcmra;
  throw Error(ErrorCode::InvalidArgument, "unknown mesh tag: " + std::string(name));
}

namespace {

// ---------------------------------------------------------------------------
// Case table
//
// Built once from the cube faces instead of being typed in. Every face that the
// iso-surface crosses contributes one oriented segment per connected inside
// region (two segments on a saddle face, where inside corners are always kept
// apart). Because that choice only looks at the four corners of the face, the
// two cells sharing it always agree and the surface has no cracks. The
// segments of one cell chain into closed loops, which are fanned into
// triangles.

struct CubeGeometry {
  std::array<std::array<int, 2>, 12> edge_corners{};  // lower corner first
  std::array<int, 12> edge_axis{};
  std::array<std::array<int, 4>, 6> face_corners{};    // cyclic order
  std::array<Vec3, 6> face_normal{};
};

Vec3 corner_position(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

CubeGeometry make_geometry() {
  CubeGeometry g;
  int e = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int c = 0; c < 8; ++c) {
      if (c & (1 << axis)) continue;
      g.edge_corners[e] = {c, c | (1 << axis)};
      g.edge_axis[e] = axis;
      ++e;
    }
  }
  int f = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, w = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const int base = side << axis;
      g.face_corners[f] = {base, base | (1 << u), base | (1 << u) | (1 << w), base | (1 << w)};
      g.face_normal[f] = Vec3::Zero();
      g.face_normal[f][axis] = side ? 1.0 : -1.0;
      ++f;
    }
  }
  return g;
}

const CubeGeometry& geometry() {
  static const CubeGeometry g = make_geometry();
  return g;
}

int edge_between(const CubeGeometry& g, int a, int b) {
  for (int e = 0; e < 12; ++e) {
    const auto& ec = g.edge_corners[e];
    if ((ec[0] == a && ec[1] == b) || (ec[0] == b && ec[1] == a)) return e;
  }
  throw std::logic_error("corners do not share an edge");
}

Vec3 edge_midpoint(const CubeGeometry& g, int e) {
  return 0.5 * (corner_position(g.edge_corners[e][0]) + corner_position(g.edge_corners[e][1]));
}

std::vector<std::array<int, 3>> build_case(const CubeGeometry& g, int config) {
  const auto inside = [config](int c) { return ((config >> c) & 1) != 0; };

  // next[e] = edge the surface boundary moves to after entering at edge e
  std::array<int, 12> next;
  next.fill(-1);
  const auto add_segment = [&](int ea, int eb, int inside_corner, const Vec3& normal) {
    const Vec3 a = edge_midpoint(g, ea);
    const Vec3 d = edge_midpoint(g, eb) - a;
    // keep the inside corner on the right when looking at the face from outside
    if (d.cross(corner_position(inside_corner) - a).dot(normal) > 0.0) std::swap(ea, eb);
    if (next[ea] != -1) throw std::logic_error("marching cubes table: edge used twice");
    next[ea] = eb;
  };

  for (int f = 0; f < 6; ++f) {
    const auto& q = g.face_corners[f];
    std::vector<int> crossing;
    for (int k = 0; k < 4; ++k)
      if (inside(q[k]) != inside(q[(k + 1) % 4])) crossing.push_back(k);
    if (crossing.empty()) continue;
    if (crossing.size() == 2) {
      const int ea = edge_between(g, q[crossing[0]], q[(crossing[0] + 1) % 4]);
      const int eb = edge_between(g, q[crossing[1]], q[(crossing[1] + 1) % 4]);
      const int in = *std::find_if(q.begin(), q.end(), inside);
      add_segment(ea, eb, in, g.face_normal[f]);
      continue;
    }
    // saddle face: cut off each inside corner separately
    for (int m = 0; m < 4; ++m) {
      if (!inside(q[m])) continue;
      const int ea = edge_between(g, q[(m + 3) % 4], q[m]);
      const int eb = edge_between(g, q[m], q[(m + 1) % 4]);
      add_segment(ea, eb, q[m], g.face_normal[f]);
    }
  }

  std::vector<std::array<int, 3>> triangles;
  std::array<bool, 12> used{};
  for (int start = 0; start < 12; ++start) {
    if (next[start] == -1 || used[start]) continue;
    std::vector<int> loop;
    for (int e = start; !used[e]; e = next[e]) {
      if (next[e] == -1) throw std::logic_error("marching cubes table: open loop");
      used[e] = true;
      loop.push_back(e);
    }
    for (std::size_t i = 1; i + 1 < loop.size(); ++i) triangles.push_back({loop[0], loop[i], loop[i + 1]});
  }
  return triangles;
}

const std::array<std::vector<std::array<int, 3>>, 256>& case_table() {
  static const auto table = [] {
    std::array<std::vector<std::array<int, 3>>, 256> t;
    for (int c = 0; c < 256; ++c) t[c] = build_case(geometry(), c);
    return t;
  }();
  return table;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

}  // namespace

const std::vector<std::array<int, 3>>& marching_cubes_case(int config) {
  if (config < 0 || config > 255) throw Error(ErrorCode::InvalidArgument, "configuration out of range");
  return case_table()[config];
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

constexpr double kCornerGuard = 1e-4;

SurfaceMesh extract(const Dims& d, const Affine& affine, const std::vector<double>& values, double iso,
                    MeshTag tag) {
  if (d[0] < 2 || d[1] < 2 || d[2] < 2)
    throw Error(ErrorCode::InvalidArgument, "marching cubes needs at least 2x2x2 samples");
  const auto& g = geometry();
  const auto& table = case_table();
  const auto index = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(d[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(d[1]) * k);
  };

  SurfaceMesh mesh;
  mesh.tag = tag;
  std::unordered_map<std::uint64_t, int> vertex_of_edge;

  const auto vertex = [&](int i, int j, int k, int e) {
    const int lo = g.edge_corners[e][0];
    const int axis = g.edge_axis[e];
    const int li = i + (lo & 1), lj = j + ((lo >> 1) & 1), lk = k + ((lo >> 2) & 1);
    const std::size_t a = index(li, lj, lk);
    const std::uint64_t key = 3 * static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(axis);
    const auto [it, inserted] = vertex_of_edge.try_emplace(key, static_cast<int>(mesh.vertices.size()));
    if (inserted) {
      const std::size_t b = index(li + (axis == 0), lj + (axis == 1), lk + (axis == 2));
      // a corner sitting exactly on iso would merge the vertices of its edges into
      // zero-area triangles; keeping t off the corners preserves the topology
      const double t = std::clamp((iso - values[a]) / (values[b] - values[a]), kCornerGuard, 1.0 - kCornerGuard);
      Vec3 voxel(li, lj, lk);
      voxel[axis] += t;
      mesh.vertices.push_back(affine.voxel_to_world(voxel));
    }
    return it->second;
  };

  for (int k = 0; k + 1 < d[2]; ++k) {
    for (int j = 0; j + 1 < d[1]; ++j) {
      for (int i = 0; i + 1 < d[0]; ++i) {
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          if (values[index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))] > iso) config |= 1 << c;
        }
        for (const auto& tri : table[config]) {
          mesh.triangles.push_back({vertex(i, j, k, tri[0]), vertex(i, j, k, tri[1]), vertex(i, j, k, tri[2])});
        }
      }
    }
  }
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyIsoSurface, "no iso-surface crossing in volume");

  // a left-handed affine mirrors the voxel grid, which flips every triangle
  if (affine.linear().determinant() < 0.0)
    for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
  return mesh;
}

}  // namespace

SurfaceMesh marching_cubes(const ScalarVolume& volume, double iso, MeshTag tag) {
  return extract(volume.dims(), volume.affine(),
                 volume.frame_count() > 1
                     ? std::vector<double>(volume.values().begin(),
                                           volume.values().begin() + static_cast<std::ptrdiff_t>(voxel_count(volume.dims())))
                     : volume.values(),
                 iso, tag);
}

SurfaceMesh marching_cubes(const BinaryMask& mask, double iso, MeshTag tag) {
  // Background border so that foreground touching the grid edge is capped.
  const BinaryMask padded = mask.padded(1);
  std::vector<double> values(padded.bits().begin(), padded.bits().end());
  return extract(padded.dims(), padded.affine(), values, iso, tag);
}

// ---------------------------------------------------------------------------
// Topology and measures

MeshTopology mesh_topology(const SurfaceMesh& mesh) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  MeshTopology topo;
  topo.vertices = mesh.vertices.size();
  topo.faces = mesh.triangles.size();
  topo.edges = uses.size();
  for (const auto& [edge, n] : uses) {
    if (n == 1) ++topo.boundary_edges;
    if (n > 2) ++topo.nonmanifold_edges;
  }
  topo.euler = static_cast<long>(topo.vertices) - static_cast<long>(topo.edges) + static_cast<long>(topo.faces);
  return topo;
}

double mesh_area(const SurfaceMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles) area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  return area;
}

double mesh_volume(const SurfaceMesh& mesh) {
  double v = 0.0;
  for (const auto& t : mesh.triangles) v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  return v / 6.0;
}

// ---------------------------------------------------------------------------
// VWT mapping

namespace {

bool has_valid_ray(const VwtProfile& p) {
  return std::any_of(p.thickness.begin(), p.thickness.end(), [](double t) { return std::isfinite(t); });
}

double angular_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return std::min(d, 2.0 * std::numbers::pi - d);
}

}  // namespace

SurfaceMesh map_vwt_to_mesh(const SurfaceMesh& mesh, const std::vector<CrossSectionPlane>& planes,
                            const std::vector<VwtProfile>& profiles, std::optional<double> spacing) {
  struct Entry {
    const CrossSectionPlane* plane;
    const VwtProfile* profile;
  };
  std::vector<Entry> entries;
  for (const VwtProfile& p : profiles) {
    if (!has_valid_ray(p)) continue;
    const auto it = std::find_if(planes.begin(), planes.end(), [&](const auto& pl) { return pl.id == p.plane_id; });
    if (it != planes.end()) entries.push_back({&*it, &p});
  }
  if (entries.empty()) throw Error(ErrorCode::NoUsableProfiles, "no profile with a valid ray matches a plane");

  double h = 0.0;
  if (spacing) {
    h = *spacing;
  } else {
    std::vector<double> arcs;
    for (const auto& e : entries) arcs.push_back(e.plane->arc_position);
    std::sort(arcs.begin(), arcs.end());
    std::vector<double> gaps;
    for (std::size_t i = 1; i < arcs.size(); ++i)
      if (arcs[i] - arcs[i - 1] > 1e-9) gaps.push_back(arcs[i] - arcs[i - 1]);
    if (gaps.empty()) {
      h = entries.front().plane->in_plane_spacing;
    } else {
      std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
      h = gaps[gaps.size() / 2];
    }
  }
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");

  SurfaceMesh out = mesh;
  out.scalars.assign(mesh.vertices.size(), kNoData);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3& x = mesh.vertices[v];
    const Entry* best = nullptr;
    double best_d = 2.0 * h;
    for (const auto& e : entries) {
      const double d = std::abs(e.plane->signed_distance(x));
      if (d > best_d) continue;
      const Vec2 uv = e.plane->to_plane(x);
      if (std::abs(uv.x()) > 0.5 * e.plane->fov || std::abs(uv.y()) > 0.5 * e.plane->fov) continue;
      if (best && d == best_d) continue;  // first listed plane wins ties
      best = &e;
      best_d = d;
    }
    if (!best) continue;
    const VwtProfile& p = *best->profile;
    const Vec2 r = best->plane->to_plane(x) - p.center;
    const double angle = std::atan2(r.y(), r.x());
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.angles.size(); ++k) {
      if (!std::isfinite(p.thickness[k])) continue;
      const double gap = angular_gap(angle, p.angles[k]);
      if (gap < nearest) {
        nearest = gap;
        out.scalars[v] = p.thickness[k];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PLY

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType ply_type(const std::string& name) {
  static const std::map<std::string, PlyType> types = {
      {"char", PlyType::i8},    {"int8", PlyType::i8},     {"uchar", PlyType::u8},   {"uint8", PlyType::u8},
      {"short", PlyType::i16},  {"int16", PlyType::i16},   {"ushort", PlyType::u16}, {"uint16", PlyType::u16},
      {"int", PlyType::i32},    {"int32", PlyType::i32},   {"uint", PlyType::u32},   {"uint32", PlyType::u32},
      {"float", PlyType::f32},  {"float32", PlyType::f32}, {"double", PlyType::f64}, {"float64", PlyType::f64}};
  const auto it = types.find(name);
  if (it == types.end()) throw Error(ErrorCode::CorruptHeader, "unknown PLY type: " + name);
  return it->second;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

class Reader {
public:
  explicit Reader(std::string_view bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  double read(PlyType t) {
    const std::size_t n = ply_size(t);
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::CorruptHeader, "PLY body truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    switch (t) {
      case PlyType::i8: return load<std::int8_t>(p);
      case PlyType::u8: return load<std::uint8_t>(p);
      case PlyType::i16: return load<std::int16_t>(p);
      case PlyType::u16: return load<std::uint16_t>(p);
      case PlyType::i32: return load<std::int32_t>(p);
      case PlyType::u32: return load<std::uint32_t>(p);
      case PlyType::f32: return load<float>(p);
      case PlyType::f64: return load<double>(p);
    }
    return 0.0;
  }
  [[nodiscard]] std::size_t pos() const { return pos_; }

private:
  template <typename T>
  static T load(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_;
};

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f64;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

}  // namespace

std::string mesh_to_ply(const SurfaceMesh& mesh) {
  const bool with_scalars = !mesh.scalars.empty();
  if (with_scalars && mesh.scalars.size() != mesh.vertices.size())
    throw Error(ErrorCode::InvalidArgument, "scalar count differs from vertex count");
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\ncomment tag " << to_string(mesh.tag) << "\nelement vertex "
         << mesh.vertices.size() << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (with_scalars) header << "property double quality\n";
  header << "element face " << mesh.triangles.size() << "\nproperty list uchar int vertex_indices\nend_header\n";

  std::string out = header.str();
  out.reserve(out.size() + mesh.vertices.size() * 32 + mesh.triangles.size() * 13);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    for (int a = 0; a < 3; ++a) put<double>(out, mesh.vertices[v][a]);
    if (with_scalars) put<double>(out, mesh.scalars[v]);
  }
  for (const auto& t : mesh.triangles) {
    put<std::uint8_t>(out, 3);
    for (int idx : t) put<std::int32_t>(out, idx);
  }
  return out;
}

SurfaceMesh mesh_from_ply(std::string_view bytes) {
  const std::size_t end = bytes.find("end_header\n");
  if (bytes.substr(0, 4) != "ply\n" || end == std::string_view::npos)
    throw Error(ErrorCode::UnsupportedFormat, "not a PLY file");
  std::istringstream header{std::string(bytes.substr(0, end))};
  std::string line;
  std::vector<PlyElement> elements;
  SurfaceMesh mesh;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw Error(ErrorCode::UnsupportedFormat, "only binary_little_endian PLY is read");
    } else if (word == "comment") {
      std::string key, value;
      if (ls >> key >> value && key == "tag") mesh.tag = mesh_tag_from_string(value);
    } else if (word == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count)) throw Error(ErrorCode::CorruptHeader, "bad element line");
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw Error(ErrorCode::CorruptHeader, "property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type;
        p.is_list = true;
        p.count_type = ply_type(count_type);
        p.type = ply_type(item_type);
      } else {
        p.type = ply_type(type);
      }
      if (!(ls >> p.name)) throw Error(ErrorCode::CorruptHeader, "bad property line");
      elements.back().properties.push_back(p);
    }
  }

  Reader r(bytes, end + std::string_view("end_header\n").size());
  bool has_quality = false;
  for (const PlyElement& e : elements) {
    if (e.name == "vertex") {
      has_quality = std::any_of(e.properties.begin(), e.properties.end(), [](const auto& p) { return p.name == "quality"; });
      mesh.vertices.reserve(e.count);
      for (std::size_t i = 0; i < e.count; ++i) {
        Vec3 x = Vec3::Zero();
        double q = 0.0;
        for (const PlyProperty& p : e.properties) {
          if (p.is_list) throw Error(ErrorCode::UnsupportedFormat, "list property on vertices");
          const double value = r.read(p.type);
          if (p.name == "x") x.x() = value;
          else if (p.name == "y") x.y() = value;
          else if (p.name == "z") x.z() = value;
          else if (p.name == "quality") q = value;
        }
        mesh.vertices.push_back(x);
        if (has_quality) mesh.scalars.push_back(q);
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const PlyProperty& p : e.properties) {
          if (!p.is_list) {
            r.read(p.type);
            continue;
          }
          const auto n = static_cast<std::size_t>(r.read(p.count_type));
          std::vector<int> idx(n);
          for (auto& v : idx) v = static_cast<int>(r.read(p.type));
          if (e.name != "face") continue;
          // polygons are fanned so foreign files still load
          for (std::size_t k = 1; k + 1 < n; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
        }
      }
    }
  }
  const int nv = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles)
    for (int v : t)
      if (v < 0 || v >= nv) throw Error(ErrorCode::CorruptHeader, "face index out of range");
  return mesh;
}

void export_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path) {
  write_file_atomic(path, mesh_to_ply(mesh));
}

SurfaceMesh import_mesh(const std::filesystem::path& path) { return mesh_from_ply(read_file(path)); }

// ---------------------------------------------------------------------------
// JSON

Json to_json(const SurfaceMesh& mesh) {
  Json positions = Json::array(), indices = Json::array();
  for (const Vec3& v : mesh.vertices) {
    positions.push_back(v.x());
    positions.push_back(v.y());
    positions.push_back(v.z());
  }
  for (const auto& t : mesh.triangles)
    for (int i : t) indices.push_back(i);
  return Json{{"tag", to_string(mesh.tag)},
              {"positions", positions},
              {"indices", indices},
              {"scalars", mesh.scalars.empty() ? Json(nullptr) : Json(mesh.scalars)},
              {"scalar_units", mesh.scalars.empty() ? Json(nullptr) : Json("mm")},
              {"no_data", kNoData}};
}

SurfaceMesh mesh_from_json(const Json& j) {
  SurfaceMesh mesh;
  mesh.tag = mesh_tag_from_string(j.at("tag").get<std::string>());
  const auto positions = j.at("positions").get<std::vector<double>>();
  const auto indices = j.at("indices").get<std::vector<int>>();
  if (positions.size() % 3 != 0 || indices.size() % 3 != 0)
    throw Error(ErrorCode::InvalidArgument, "flat mesh arrays must hold triples");
  for (std::size_t i = 0; i < positions.size(); i += 3) mesh.vertices.emplace_back(positions[i], positions[i + 1], positions[i + 2]);
  for (std::size_t i = 0; i < indices.size(); i += 3) mesh.triangles.push_back({indices[i], indices[i + 1], indices[i + 2]});
  if (j.contains("scalars") && !j.at("scalars").is_null()) mesh.scalars = j.at("scalars").get<std::vector<double>>();
  return mesh;
}

}  // namespace carotid
