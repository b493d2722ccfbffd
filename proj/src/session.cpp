#include "carotid/session.hpp"

#include "carotid/error.hpp"
#include "carotid/io.hpp"
#include "carotid/volume_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <set>

namespace carotid {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoFailure, "SHA-256 failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof(b), "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::InvalidArgument, "base64 length is not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "invalid base64");
  // EVP_DecodeBlock counts padding as zero bytes
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

namespace {

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json vec_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Vec3 vec3_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidArgument, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 vec2_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::InvalidArgument, "expected [u, v]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json refs_json(const std::vector<VolumeRef>& refs) {
  Json out = Json::array();
  for (const auto& r : refs) out.push_back({{"role", r.role}, {"path", r.path}, {"sha256", r.sha256}});
  return out;
}

std::vector<VolumeRef> refs_from(const Json& j) {
  std::vector<VolumeRef> out;
  for (const Json& r : j) out.push_back({r.at("role").get<std::string>(), r.at("path").get<std::string>(), r.at("sha256").get<std::string>()});
  return out;
}

void check_version(const Json& j, int supported, const char* what) {
  const int v = j.at("version").get<int>();
  if (v != supported)
    throw Error(ErrorCode::SchemaVersionUnsupported,
                std::string(what) + " version " + std::to_string(v) + " is not supported (expected " + std::to_string(supported) + ")");
}

// nlohmann's type errors become our InvalidArgument so callers see one error type
template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed JSON document: ") + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Study

void save_study(Study& study, const std::filesystem::path& manifest) {
  if (!study.bb && !study.tof && !study.flow && !study.pcmra_mask && !study.seg3d_mask)
    throw Error(ErrorCode::InvalidArgument, "a study needs at least one volume");
  const std::filesystem::path dir = manifest.parent_path();
  study.files.clear();
  const auto record = [&](const std::string& role, const std::string& name) {
    study.files.push_back({role, name, sha256_file(dir / name)});
  };
  for (const auto& [role, vol] : {std::pair{"bb", &study.bb}, std::pair{"tof", &study.tof}}) {
    if (!*vol) continue;
    save_volume(**vol, dir / (std::string(role) + ".nii.gz"));
    record(role, std::string(role) + ".nii.gz");
  }
  for (const auto& [role, mask] : {std::pair{"pcmra_mask", &study.pcmra_mask}, std::pair{"seg3d_mask", &study.seg3d_mask}}) {
    if (!*mask) continue;
    save_mask(**mask, dir / (std::string(role) + ".nii.gz"));
    record(role, std::string(role) + ".nii.gz");
  }
  if (study.flow) {
    save_flow(*study.flow, dir / "flow_vx.nii.gz", dir / "flow_vy.nii.gz", dir / "flow_vz.nii.gz");
    for (const char* c : {"flow_vx", "flow_vy", "flow_vz"}) record(c, std::string(c) + ".nii.gz");
    study.flow_info = FlowInfo{study.flow->venc(), study.flow->cycle_length(), 1.0};
  }
  Json j{{"version", kStudyVersion}, {"id", study.id}, {"volumes", refs_json(study.files)}, {"extras", study.extras}};
  j["flow"] = study.flow_info ? Json{{"venc", study.flow_info->venc},
                                     {"cycle_length", study.flow_info->cycle_length},
                                     {"scale", study.flow_info->scale}}
                              : Json(nullptr);
  write_file_atomic(manifest, canonical_dump(j));
}

Study load_study(const std::filesystem::path& manifest) {
  Json j;
  try {
    j = Json::parse(read_file(manifest));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::CorruptHeader, std::string("study manifest is not JSON: ") + e.what());
  }
  return guarded([&] {
    check_version(j, kStudyVersion, "study manifest");
    const std::filesystem::path dir = manifest.parent_path();
    Study s;
    s.id = j.at("id").get<std::string>();
    s.files = refs_from(j.at("volumes"));
    if (j.contains("extras")) s.extras = j.at("extras");
    const auto path_of = [&](const std::string& role) -> std::optional<std::filesystem::path> {
      for (const auto& r : s.files)
        if (r.role == role) return dir / r.path;
      return std::nullopt;
    };
    if (auto p = path_of("bb")) s.bb = load_volume(*p);
    if (auto p = path_of("tof")) s.tof = load_volume(*p);
    if (auto p = path_of("pcmra_mask")) s.pcmra_mask = load_mask(*p);
    if (auto p = path_of("seg3d_mask")) s.seg3d_mask = load_mask(*p);
    const auto vx = path_of("flow_vx"), vy = path_of("flow_vy"), vz = path_of("flow_vz");
    if (vx || vy || vz) {
      if (!(vx && vy && vz)) throw Error(ErrorCode::ShapeMismatch, "flow needs all three components");
      const Json& f = j.at("flow");
      s.flow_info = FlowInfo{f.at("venc").get<double>(), f.at("cycle_length").get<double>(), f.value("scale", 1.0)};
      s.flow = load_flow(*vx, *vy, *vz, s.flow_info->venc, s.flow_info->cycle_length, s.flow_info->scale);
    }
    if (!s.bb && !s.tof && !s.flow && !s.pcmra_mask && !s.seg3d_mask)
      throw Error(ErrorCode::InvalidArgument, "study manifest lists no volume");
    return s;
  });
}

// ---------------------------------------------------------------------------
// Session JSON

Json to_json(const Centerline& c) {
  Json pts = Json::array();
  for (const Vec3& p : c.points()) pts.push_back(vec_json(p));
  return {{"branch", to_string(c.branch())}, {"points", pts}};
}

Centerline centerline_from_json(const Json& j) {
  return guarded([&] {
    Polyline3 pts;
    for (const Json& p : j.at("points")) pts.push_back(vec3_from(p));
    return Centerline(std::move(pts), branch_from_string(j.at("branch").get<std::string>()));
  });
}

Json to_json(const CrossSectionPlane& p) {
  return {{"id", p.id},
          {"center", vec_json(p.center)},
          {"tangent", vec_json(p.frame.tangent)},
          {"normal", vec_json(p.frame.normal)},
          {"binormal", vec_json(p.frame.binormal)},
          {"arc_position", p.arc_position},
          {"fov", p.fov},
          {"in_plane_spacing", p.in_plane_spacing}};
}

CrossSectionPlane plane_from_json(const Json& j) {
  return guarded([&] {
    CrossSectionPlane p;
    p.id = j.at("id").get<int>();
    p.center = vec3_from(j.at("center"));
    p.frame = {vec3_from(j.at("tangent")), vec3_from(j.at("normal")), vec3_from(j.at("binormal"))};
    p.arc_position = j.at("arc_position").get<double>();
    p.fov = j.at("fov").get<double>();
    p.in_plane_spacing = j.at("in_plane_spacing").get<double>();
    return p;
  });
}

Json to_json(const ClosedSplineContour& c) {
  Json seeds = Json::array();
  for (const Vec2& s : c.seeds) seeds.push_back(vec_json(s));
  return {{"role", to_string(c.role)}, {"seeds", seeds}};
}

ClosedSplineContour contour_from_json(const Json& j) {
  return guarded([&] {
    ClosedSplineContour c;
    c.role = contour_role_from_string(j.at("role").get<std::string>());
    for (const Json& s : j.at("seeds")) c.seeds.push_back(vec2_from(s));
    return c;
  });
}

Json to_json(const SliceAnnotation& a) {
  return {{"plane_id", a.plane_id},
          {"timepoint", a.timepoint ? Json(*a.timepoint) : Json(nullptr)},
          {"lumen", a.lumen ? to_json(*a.lumen) : Json(nullptr)},
          {"outer_wall", a.wall ? to_json(*a.wall) : Json(nullptr)},
          {"usable", a.usable},
          {"source", to_string(a.source)}};
}

SliceAnnotation annotation_from_json(const Json& j) {
  return guarded([&] {
    SliceAnnotation a;
    a.plane_id = j.at("plane_id").get<int>();
    if (j.contains("timepoint") && !j.at("timepoint").is_null()) a.timepoint = j.at("timepoint").get<double>();
    if (j.contains("lumen") && !j.at("lumen").is_null()) a.lumen = contour_from_json(j.at("lumen"));
    if (j.contains("outer_wall") && !j.at("outer_wall").is_null()) a.wall = contour_from_json(j.at("outer_wall"));
    a.usable = j.value("usable", true);
    a.source = annotation_source_from_string(j.value("source", std::string("manual")));
    return a;
  });
}

Json to_json(const SessionParameters& p) {
  return {{"plane_spacing", p.plane_spacing}, {"fov", p.fov},   {"in_plane_spacing", p.in_plane_spacing},
          {"mu", p.mu},                       {"n_rays", p.n_rays}, {"v_threshold", p.v_threshold},
          {"reference_window_mm", p.reference_window_mm}};
}

SessionParameters session_parameters_from_json(const Json& j) {
  return guarded([&] {
    SessionParameters p;
    p.plane_spacing = j.value("plane_spacing", p.plane_spacing);
    p.fov = j.value("fov", p.fov);
    p.in_plane_spacing = j.value("in_plane_spacing", p.in_plane_spacing);
    p.mu = j.value("mu", p.mu);
    p.n_rays = j.value("n_rays", p.n_rays);
    p.v_threshold = j.value("v_threshold", p.v_threshold);
    p.reference_window_mm = j.value("reference_window_mm", p.reference_window_mm);
    return p;
  });
}

Json to_json(const Session& s) {
  Json centerlines = Json::array(), planes = Json::array(), annotations = Json::array();
  for (const auto& c : s.centerlines) centerlines.push_back(to_json(c));
  for (const auto& p : s.planes) planes.push_back(to_json(p));
  for (const auto& a : s.annotations) annotations.push_back(to_json(a));
  return {{"version", s.version},   {"study_id", s.study_id},        {"centerlines", centerlines},
          {"planes", planes},       {"annotations", annotations},    {"parameters", to_json(s.parameters)},
          {"volumes", refs_json(s.volumes)}};
}

Session session_from_json(const Json& j) {
  return guarded([&] {
    check_version(j, kSessionVersion, "session");
    Session s;
    s.study_id = j.at("study_id").get<std::string>();
    for (const Json& c : j.at("centerlines")) s.centerlines.push_back(centerline_from_json(c));
    for (const Json& p : j.at("planes")) s.planes.push_back(plane_from_json(p));
    for (const Json& a : j.at("annotations")) s.annotations.push_back(annotation_from_json(a));
    if (j.contains("parameters")) s.parameters = session_parameters_from_json(j.at("parameters"));
    if (j.contains("volumes")) s.volumes = refs_from(j.at("volumes"));

    std::set<int> ids;
    for (const auto& p : s.planes)
      if (!ids.insert(p.id).second) throw Error(ErrorCode::ValidationFailed, "duplicate plane id " + std::to_string(p.id));
    for (const auto& a : s.annotations) {
      if (!ids.count(a.plane_id))
        throw Error(ErrorCode::ValidationFailed, "annotation references unknown plane_id " + std::to_string(a.plane_id));
      const auto violations = validate_annotation(a);
      if (!violations.empty())
        throw Error(ErrorCode::ValidationFailed, "plane " + std::to_string(a.plane_id) + ", " + violations.front().role +
                                                     ": " + violations.front().message);
    }
    return s;
  });
}

std::string session_to_string(const Session& s) { return canonical_dump(to_json(s)); }

void save_session(const Session& s, const std::filesystem::path& path) {
  if (s.version != kSessionVersion)
    throw Error(ErrorCode::SchemaVersionUnsupported, "cannot write session version " + std::to_string(s.version));
  write_file_atomic(path, session_to_string(s));
}

Session load_session(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::CorruptHeader, std::string("session is not JSON: ") + e.what());
  }
  return session_from_json(j);
}

std::vector<std::string> stale_volumes(const Session& s, const std::filesystem::path& base_dir) {
  std::vector<std::string> stale;
  for (const auto& r : s.volumes) {
    const auto p = base_dir / r.path;
    if (!std::filesystem::exists(p) || sha256_file(p) != r.sha256) stale.push_back(r.role);
  }
  return stale;
}

}  // namespace carotid
