#include "carotid/api.hpp"

#include "carotid/biomarkers.hpp"
#include "carotid/error.hpp"
#include "carotid/pathlines.hpp"
#include "carotid/pipeline.hpp"
#include "carotid/surface.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace carotid::api {

// ---------------------------------------------------------------------------
// Slice images

SliceImage cross_section_image(const ScalarVolume& volume, const CrossSectionPlane& plane,
                               std::string_view modality, double t_ms) {
  int frame = 0;
  const auto& times = volume.time_axis();
  for (std::size_t f = 1; f < times.size(); ++f)
    if (std::abs(times[f] - t_ms) < std::abs(times[static_cast<std::size_t>(frame)] - t_ms)) frame = static_cast<int>(f);

  const Image2D img = resample_plane(volume, plane.center, plane.frame.normal, plane.frame.binormal, plane.grid(),
                                     Interpolation::trilinear, frame);
  SliceImage out;
  out.plane_id = plane.id;
  out.modality = std::string(modality);
  out.width = img.grid.nx;
  out.height = img.grid.ny;
  out.spacing = img.grid.spacing;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t p = 0; p < img.values.size(); ++p) {
    if (!img.inside[p]) continue;
    lo = std::min(lo, img.values[p]);
    hi = std::max(hi, img.values[p]);
  }
  if (lo > hi) lo = hi = 0.0;
  out.window_min = lo;
  out.window_max = hi;

  out.pixels.assign(img.values.size(), 0);
  if (hi > lo) {
    for (std::size_t p = 0; p < img.values.size(); ++p) {
      if (!img.inside[p]) continue;
      const double q = std::round((img.values[p] - lo) / (hi - lo) * 65535.0);
      out.pixels[p] = static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
    }
  }
  return out;
}

Json to_json(const SliceImage& image) {
  std::string bytes(image.pixels.size() * 2, '\0');
  for (std::size_t p = 0; p < image.pixels.size(); ++p) {
    bytes[2 * p] = static_cast<char>(image.pixels[p] & 0xff);
    bytes[2 * p + 1] = static_cast<char>(image.pixels[p] >> 8);
  }
  return {{"plane_id", image.plane_id},   {"modality", image.modality},   {"width", image.width},
          {"height", image.height},       {"spacing", image.spacing},     {"window_min", image.window_min},
          {"window_max", image.window_max}, {"pixels", base64_encode(bytes)}};
}

std::vector<std::uint16_t> decode_pixels(const Json& payload) {
  const std::string bytes = base64_decode(payload.at("pixels").get<std::string>());
  std::vector<std::uint16_t> px(bytes.size() / 2);
  for (std::size_t p = 0; p < px.size(); ++p)
    px[p] = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * p]) |
                                       (static_cast<unsigned char>(bytes[2 * p + 1]) << 8));
  return px;
}

// ---------------------------------------------------------------------------
// Service

struct Service::Entry {
  Study study;
  std::optional<std::filesystem::path> session_file;

  std::mutex mutex;  // guards session and revisions; held for every write
  Session session;
  std::map<int, std::uint64_t> revisions;
};

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
  Json details = Json::object();
};

Response json_response(const Json& j, int status = 200) {
  return {status, "application/json", canonical_dump(j)};
}

Response error_response(const HttpError& e) {
  return json_response({{"code", e.code}, {"message", e.message}, {"details", e.details}}, e.status);
}

HttpError from_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::IoFailure:
      return {500, "IoFailure", e.what()};
    case ErrorCode::ValidationFailed:
    case ErrorCode::SchemaVersionUnsupported:
    case ErrorCode::EmptyMask:
    case ErrorCode::ComponentTooSmall:
    case ErrorCode::EmptyIsoSurface:
    case ErrorCode::SeedOutsideMask:
    case ErrorCode::Disconnected:
      return {422, std::string(to_string(e.code())), e.what()};
    default:
      return {422, "BadParams", e.what(), {{"error", std::string(to_string(e.code()))}}};
  }
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) throw HttpError{400, "BadRequest", "request body must be a JSON object"};
    return j;
  } catch (const Json::parse_error& e) {
    throw HttpError{400, "BadRequest", std::string("malformed JSON: ") + e.what()};
  }
}

// Typed access to optional body fields; a wrong type is a 422.
template <typename T>
std::optional<T> field(const Json& body, const char* name) {
  if (!body.contains(name) || body.at(name).is_null()) return std::nullopt;
  try {
    return body.at(name).get<T>();
  } catch (const Json::exception&) {
    throw HttpError{422, "BadParams", std::string("field '") + name + "' has the wrong type"};
  }
}

template <typename T>
T required(const Json& body, const char* name) {
  auto v = field<T>(body, name);
  if (!v) throw HttpError{422, "BadParams", std::string("missing field '") + name + "'"};
  return *v;
}

Vec3 vec3_field(const Json& body, const char* name) {
  const auto v = required<std::vector<double>>(body, name);
  if (v.size() != 3) throw HttpError{422, "BadParams", std::string("field '") + name + "' needs 3 numbers"};
  return {v[0], v[1], v[2]};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/'))
    if (!part.empty()) parts.push_back(part);
  return parts;
}

std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> modalities(const Study& s) {
  std::vector<std::string> m;
  if (s.bb) m.emplace_back("bb");
  if (s.tof) m.emplace_back("tof");
  if (s.flow) m.emplace_back("flow");
  if (s.pcmra_mask) m.emplace_back("pcmra_mask");
  if (s.seg3d_mask) m.emplace_back("seg3d_mask");
  return m;
}

Json grid_json(const Dims& dims, const Affine& affine) {
  const Vec3 sp = affine.spacing();
  return {{"dims", {dims[0], dims[1], dims[2]}}, {"spacing", {sp.x(), sp.y(), sp.z()}}};
}

const CrossSectionPlane* find_plane(const Session& s, int id) {
  for (const auto& p : s.planes)
    if (p.id == id) return &p;
  return nullptr;
}

const SliceAnnotation* find_annotation(const Session& s, int plane_id) {
  for (const auto& a : s.annotations)
    if (a.plane_id == plane_id) return &a;
  return nullptr;
}

void store_annotation(Session& s, SliceAnnotation a) {
  std::erase_if(s.annotations, [&](const SliceAnnotation& x) { return x.plane_id == a.plane_id; });
  s.annotations.push_back(std::move(a));
  std::stable_sort(s.annotations.begin(), s.annotations.end(),
                   [](const SliceAnnotation& x, const SliceAnnotation& y) { return x.plane_id < y.plane_id; });
}

// Stored annotations carry exactly what the session file can hold.
SliceAnnotation canonical(const SliceAnnotation& a) { return annotation_from_json(round_numbers(to_json(a))); }

Json violations_json(const std::vector<Violation>& vs) {
  Json out = Json::array();
  for (const auto& v : vs) out.push_back({{"role", v.role}, {"message", v.message}});
  return out;
}

std::string violations_message(const std::vector<Violation>& vs) {
  std::string msg;
  for (const auto& v : vs) msg += (msg.empty() ? "" : "; ") + v.role + ": " + v.message;
  return msg;
}

HttpError missing_inputs(const std::string& what) {
  return {409, "MissingInputs", what + " not loaded for this study", {{"missing", Json::array({what})}}};
}

}  // namespace

void Service::add_study(Study study, std::optional<Session> session,
                        std::optional<std::filesystem::path> session_file) {
  if (study.id.empty()) throw Error(ErrorCode::InvalidArgument, "study id is empty");
  auto e = std::make_shared<Entry>();
  if (session) {
    if (session->study_id != study.id)
      throw Error(ErrorCode::ValidationFailed,
                  "session belongs to study '" + session->study_id + "', not '" + study.id + "'");
    e->session = std::move(*session);
  } else {
    e->session.study_id = study.id;
    e->session.volumes = study.files;
  }
  for (const auto& a : e->session.annotations) e->revisions[a.plane_id] = 1;
  e->study = std::move(study);
  e->session_file = std::move(session_file);
  std::unique_lock lock(registry_mutex_);
  const std::string id = e->study.id;
  if (!studies_.emplace(id, std::move(e)).second)
    throw Error(ErrorCode::InvalidArgument, "study '" + id + "' is already registered");
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
  std::shared_lock lock(registry_mutex_);
  const auto it = studies_.find(id);
  if (it == studies_.end()) throw HttpError{404, "UnknownStudy", "no study '" + id + "'"};
  return it->second;
}

Response Service::handle(const Request& request) {
  try {
    return route(request);
  } catch (const HttpError& e) {
    return error_response(e);
  } catch (const Error& e) {
    return error_response(from_error(e));
  } catch (const Json::exception& e) {
    return error_response({422, "BadParams", e.what()});
  } catch (const std::exception& e) {
    return error_response({500, "Internal", e.what()});
  }
}

Response Service::route(const Request& r) {
  const auto parts = split_path(r.path);
  const auto method_not_allowed = [&] {
    return error_response({405, "MethodNotAllowed", r.method + " not allowed on " + r.path});
  };
  const auto not_found = [&] { return error_response({404, "NotFound", "no route " + r.path}); };
  const bool get = r.method == "GET", put = r.method == "PUT", post = r.method == "POST";

  if (parts.empty()) return not_found();
  if (parts[0] == "sessions") {
    if (parts.size() != 2) return not_found();
    auto e = find(parts[1]);
    if (get) return get_session(*e);
    if (put) return put_session(*e, r);
    return method_not_allowed();
  }
  if (parts[0] != "studies") return not_found();
  if (parts.size() == 1) return get ? list_studies() : method_not_allowed();

  auto e = find(parts[1]);
  if (parts.size() == 2) return get ? describe_study(*e) : method_not_allowed();
  if (parts.size() == 3 && parts[2] == "centerlines") return post ? post_centerline(*e, r) : method_not_allowed();
  if (parts.size() == 3 && parts[2] == "planes") return get ? list_planes(*e) : method_not_allowed();
  if (parts.size() == 4 && parts[2] == "compute") return post ? post_compute(*e, parts[3], r) : method_not_allowed();
  if (parts.size() == 5 && parts[2] == "planes") {
    const auto pid = parse_int(parts[3]);
    const std::string& leaf = parts[4];
    if (leaf != "image" && leaf != "annotation" && leaf != "autofit") return not_found();
    if (!pid) throw HttpError{404, "UnknownPlane", "plane id '" + parts[3] + "' is not an integer"};
    if (leaf == "image") return get ? get_image(*e, *pid, r) : method_not_allowed();
    if (leaf == "autofit") return post ? post_autofit(*e, *pid, r) : method_not_allowed();
    if (get) return get_annotation(*e, *pid);
    if (put) return put_annotation(*e, *pid, r);
    return method_not_allowed();
  }
  return not_found();
}

Response Service::list_studies() {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [id, e] : studies_) entries.push_back(e);
  }
  Json list = Json::array();
  for (const auto& e : entries) {
    std::lock_guard lock(e->mutex);
    list.push_back({{"id", e->study.id}, {"modalities", modalities(e->study)}, {"planes", e->session.planes.size()}});
  }
  return json_response({{"studies", list}});
}

Response Service::describe_study(Entry& e) {
  const Study& s = e.study;
  Json volumes = Json::object();
  if (s.bb) volumes["bb"] = grid_json(s.bb->dims(), s.bb->affine());
  if (s.tof) volumes["tof"] = grid_json(s.tof->dims(), s.tof->affine());
  if (s.pcmra_mask) volumes["pcmra_mask"] = grid_json(s.pcmra_mask->dims(), s.pcmra_mask->affine());
  if (s.seg3d_mask) volumes["seg3d_mask"] = grid_json(s.seg3d_mask->dims(), s.seg3d_mask->affine());
  Json flow = nullptr;
  if (s.flow) {
    flow = grid_json(s.flow->dims(), s.flow->affine());
    flow["venc"] = s.flow->venc();
    flow["cycle_length"] = s.flow->cycle_length();
    flow["timepoints"] = s.flow->timepoints();
  }
  std::lock_guard lock(e.mutex);
  return json_response({{"id", s.id},
                        {"modalities", modalities(s)},
                        {"volumes", volumes},
                        {"flow", flow},
                        {"centerlines", e.session.centerlines.size()},
                        {"planes", e.session.planes.size()},
                        {"annotations", e.session.annotations.size()},
                        {"extras", s.extras}});
}

Response Service::post_centerline(Entry& e, const Request& r) {
  const Json body = parse_body(r.body);
  const Branch branch = branch_from_string(field<std::string>(body, "branch").value_or("ICA"));
  Centerline c;
  if (body.contains("points")) {
    Json j = {{"points", body.at("points")}, {"branch", std::string(to_string(branch))}};
    c = centerline_from_json(j);
    if (c.size() < 2 || c.length() <= 0.0) throw HttpError{422, "BadParams", "centerline needs two distinct points"};
  } else {
    const Vec3 start = vec3_field(body, "start");
    const Vec3 end = vec3_field(body, "end");
    const std::string source = field<std::string>(body, "mask").value_or(e.study.pcmra_mask ? "pcmra_mask" : "seg3d_mask");
    std::optional<BinaryMask> lumen;
    if (source == "pcmra_mask") {
      if (!e.study.pcmra_mask) throw missing_inputs("pcmra_mask");
      lumen = *e.study.pcmra_mask;
    } else if (source == "seg3d_mask") {
      if (!e.study.seg3d_mask) throw missing_inputs("seg3d_mask");
      lumen = lumen_from_wall(*e.study.seg3d_mask);
    } else {
      throw HttpError{422, "BadParams", "mask must be pcmra_mask or seg3d_mask"};
    }
    c = extract_centerline(*lumen, start, end, branch);
  }
  const bool replace = field<bool>(body, "replace").value_or(false);

  std::lock_guard lock(e.mutex);
  Session& s = e.session;
  if (replace) {
    for (const auto& a : s.annotations) ++e.revisions[a.plane_id];
    s.centerlines.clear();
    s.planes.clear();
    s.annotations.clear();
  }
  int next_id = 0;
  for (const auto& p : s.planes) next_id = std::max(next_id, p.id + 1);
  // Revisions of removed planes stay so that ids are never reused with a lower count.
  for (const auto& [id, rev] : e.revisions) next_id = std::max(next_id, id + 1);
  const SessionParameters& prm = s.parameters;
  auto planes = cross_sections(c, prm.plane_spacing, prm.fov, prm.in_plane_spacing, next_id);
  s.centerlines.push_back(c);
  s.planes.insert(s.planes.end(), planes.begin(), planes.end());
  if (e.session_file) save_session(s, *e.session_file);

  Json pj = Json::array();
  for (const auto& p : planes) pj.push_back(to_json(p));
  return json_response({{"centerline", to_json(c)}, {"planes", pj}});
}

Response Service::list_planes(Entry& e) {
  std::lock_guard lock(e.mutex);
  Json pj = Json::array();
  for (const auto& p : e.session.planes) pj.push_back(to_json(p));
  return json_response({{"planes", pj}});
}

Response Service::get_image(Entry& e, int plane_id, const Request& r) {
  std::optional<CrossSectionPlane> plane;
  {
    std::lock_guard lock(e.mutex);
    if (const auto* p = find_plane(e.session, plane_id)) plane = *p;
  }
  if (!plane) throw HttpError{404, "UnknownPlane", "no plane " + std::to_string(plane_id)};
  const auto mit = r.query.find("modality");
  const std::string modality = mit == r.query.end() ? "bb" : mit->second;
  const ScalarVolume* vol = nullptr;
  if (modality == "bb") vol = e.study.bb ? &*e.study.bb : nullptr;
  else if (modality == "tof") vol = e.study.tof ? &*e.study.tof : nullptr;
  else throw HttpError{422, "BadParams", "modality must be bb or tof"};
  if (!vol) throw HttpError{409, "ModalityMissing", modality + " volume not loaded", {{"modality", modality}}};
  double t = 0.0;
  if (const auto tit = r.query.find("t"); tit != r.query.end()) {
    try {
      std::size_t used = 0;
      t = std::stod(tit->second, &used);
      if (used != tit->second.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw HttpError{422, "BadParams", "t must be a number"};
    }
  }
  return json_response(to_json(cross_section_image(*vol, *plane, modality, t)));
}

Response Service::get_annotation(Entry& e, int plane_id) {
  std::lock_guard lock(e.mutex);
  if (!find_plane(e.session, plane_id)) throw HttpError{404, "UnknownPlane", "no plane " + std::to_string(plane_id)};
  const auto* a = find_annotation(e.session, plane_id);
  const auto rit = e.revisions.find(plane_id);
  return json_response({{"annotation", a ? to_json(*a) : Json(nullptr)},
                        {"revision", rit == e.revisions.end() ? 0 : rit->second}});
}

Response Service::put_annotation(Entry& e, int plane_id, const Request& r) {
  const Json body = parse_body(r.body);
  Json aj = body.contains("annotation") ? body.at("annotation") : body;
  if (!aj.is_object()) throw HttpError{422, "BadParams", "annotation must be an object"};
  aj.erase("base_revision");
  if (!aj.contains("plane_id")) aj["plane_id"] = plane_id;
  const auto base = field<std::uint64_t>(body, "base_revision");

  SliceAnnotation a;
  try {
    a = annotation_from_json(aj);
  } catch (const Error& err) {
    throw HttpError{422, "BadParams", err.what()};
  }
  if (a.plane_id != plane_id)
    throw HttpError{422, "ValidationFailed", "annotation plane_id does not match the route",
                    {{"violations", Json::array({{{"role", "annotation"}, {"message", "plane_id mismatch"}}})}}};
  const auto violations = validate_annotation(a);
  if (!violations.empty())
    throw HttpError{422, "ValidationFailed", violations_message(violations), {{"violations", violations_json(violations)}}};

  a = canonical(a);
  std::lock_guard lock(e.mutex);
  if (!find_plane(e.session, plane_id)) throw HttpError{404, "UnknownPlane", "no plane " + std::to_string(plane_id)};
  std::uint64_t& rev = e.revisions[plane_id];
  if (base && *base != rev)
    throw HttpError{409, "StaleRevision", "annotation changed since revision " + std::to_string(*base),
                    {{"current_revision", rev}, {"base_revision", *base}}};
  store_annotation(e.session, a);
  ++rev;
  if (e.session_file) save_session(e.session, *e.session_file);
  return json_response({{"annotation", to_json(a)}, {"revision", rev}});
}

Response Service::post_autofit(Entry& e, int plane_id, const Request& r) {
  std::optional<CrossSectionPlane> plane;
  {
    std::lock_guard lock(e.mutex);
    if (const auto* p = find_plane(e.session, plane_id)) plane = *p;
  }
  if (!plane) throw HttpError{404, "UnknownPlane", "no plane " + std::to_string(plane_id)};
  const Json body = parse_body(r.body);
  const std::string source = field<std::string>(body, "source").value_or("seg3d_slice");

  SliceAnnotation a;
  if (source == "seg3d_slice") {
    if (!e.study.seg3d_mask) throw HttpError{409, "NoMaskSource", "study has no seg3d_mask", {{"source", source}}};
    a = autofit_plane(*e.study.seg3d_mask, *plane);
  } else if (source == "imported_mask") {
    if (!body.contains("mask") || !body.at("mask").is_object())
      throw HttpError{409, "NoMaskSource", "imported_mask requires a 'mask' object", {{"source", source}}};
    const Json& mj = body.at("mask");
    const PlaneGrid grid = plane->grid();
    if (required<int>(mj, "width") != grid.nx || required<int>(mj, "height") != grid.ny)
      throw HttpError{422, "BadParams", "mask must be " + std::to_string(grid.nx) + "x" + std::to_string(grid.ny),
                      {{"width", grid.nx}, {"height", grid.ny}}};
    Mask2D wall(grid);
    if (mj.contains("data")) {
      const auto data = required<std::vector<int>>(mj, "data");
      if (data.size() != wall.bits.size()) throw HttpError{422, "BadParams", "mask data has the wrong length"};
      for (std::size_t p = 0; p < data.size(); ++p) wall.bits[p] = data[p] != 0;
    } else {
      const std::string bytes = base64_decode(required<std::string>(mj, "bits"));
      if (bytes.size() != wall.bits.size()) throw HttpError{422, "BadParams", "mask bits have the wrong length"};
      for (std::size_t p = 0; p < bytes.size(); ++p) wall.bits[p] = bytes[p] != 0;
    }
    a = annotation_from_wall_slice(wall, plane_id);
  } else {
    throw HttpError{422, "BadParams", "source must be seg3d_slice or imported_mask"};
  }
  a.timepoint = field<double>(body, "timepoint");
  return json_response({{"annotation", to_json(a)}});
}

Response Service::post_compute(Entry& e, const std::string& what, const Request& r) {
  if (what != "biomarkers" && what != "pathlines" && what != "mesh")
    return error_response({404, "NotFound", "unknown computation '" + what + "'"});
  const Json body = parse_body(r.body);
  Session s;
  {
    std::lock_guard lock(e.mutex);
    s = e.session;
  }
  const Study& st = e.study;
  const std::string format = field<std::string>(body, "format").value_or("json");

  if (what == "biomarkers") {
    BiomarkerParams bp = biomarker_params(s.parameters);
    bp.n_rays = field<int>(body, "n_rays").value_or(bp.n_rays);
    bp.mu = field<double>(body, "mu").value_or(bp.mu);
    bp.reference_window_mm = field<double>(body, "reference_window_mm").value_or(bp.reference_window_mm);
    bp.reference_diameter = field<double>(body, "reference_diameter");
    bp.flow_time = field<double>(body, "flow_time");
    if (bp.n_rays < 3) throw HttpError{422, "BadParams", "n_rays must be at least 3"};
    if (!(bp.mu > 0.0)) throw HttpError{422, "BadParams", "mu must be positive"};
    if (format != "json" && format != "csv") throw HttpError{422, "BadParams", "format must be json or csv"};
    const BiomarkerReport report = compute_biomarkers(s.planes, s.annotations, st.flow ? &*st.flow : nullptr, bp);
    if (format == "csv") return {200, "text/csv", report_to_csv(report)};
    return {200, "application/json", report_to_json(report)};
  }

  if (what == "pathlines") {
    if (!st.flow) throw missing_inputs("flow");
    const VelocityField& flow = *st.flow;
    EmitterSpec em;
    em.plane_id = required<int>(body, "plane_id");
    em.seed_count = field<int>(body, "seed_count").value_or(16);
    em.start_times = field<std::vector<double>>(body, "start_times").value_or(std::vector<double>{0.0});
    const double duration = field<double>(body, "duration").value_or(flow.cycle_length());
    const double dt = field<double>(body, "dt").value_or(default_dt(flow));
    const double v_threshold = field<double>(body, "v_threshold").value_or(s.parameters.v_threshold);
    const auto gate = field<bool>(body, "gate");
    if (em.seed_count < 1) throw HttpError{422, "BadParams", "seed_count must be positive"};
    if (em.start_times.empty()) throw HttpError{422, "BadParams", "start_times is empty"};
    if (!(duration > 0.0)) throw HttpError{422, "BadParams", "duration must be positive"};
    if (format != "json" && format != "binary") throw HttpError{422, "BadParams", "format must be json or binary"};
    if (gate.value_or(false) && !st.pcmra_mask) throw missing_inputs("pcmra_mask");
    const BinaryMask* mask = gate.value_or(true) && st.pcmra_mask ? &*st.pcmra_mask : nullptr;

    const CrossSectionPlane* plane = find_plane(s, em.plane_id);
    if (!plane) throw HttpError{422, "BadParams", "unknown plane_id " + std::to_string(em.plane_id)};
    const SliceAnnotation* a = find_annotation(s, em.plane_id);
    const ClosedSplineContour* lumen = a && a->usable && a->lumen ? &*a->lumen : nullptr;

    TraceParams tp;
    tp.threads = threads_;
    const PathlineSet set =
        trace_emitter(flow, seed_from_cross_section(*plane, lumen, em.seed_count), em, duration, dt, mask, tp);
    if (format == "binary") return {200, "application/octet-stream", pathlines_to_binary(set)};
    return json_response({{"pathlines", to_json(set)}, {"stats", to_json(pathline_stats(set, v_threshold))}});
  }

  // mesh
  const std::string surface = field<std::string>(body, "surface").value_or("wall");
  if (format != "json" && format != "ply") throw HttpError{422, "BadParams", "format must be json or ply"};
  if (surface == "pcmra") {
    if (!st.pcmra_mask) throw missing_inputs("pcmra_mask");
    const SurfaceMesh m = marching_cubes(*st.pcmra_mask, 0.5, MeshTag::pcmra);
    if (format == "ply") return {200, "application/octet-stream", mesh_to_ply(m)};
    return json_response({{"pcmra", to_json(m)}});
  }
  if (surface != "wall") throw HttpError{422, "BadParams", "surface must be wall or pcmra"};
  if (!st.seg3d_mask) throw missing_inputs("seg3d_mask");
  const auto spacing = field<double>(body, "spacing");
  if (spacing && !(*spacing > 0.0)) throw HttpError{422, "BadParams", "spacing must be positive"};
  const BiomarkerReport report = compute_biomarkers(s.planes, s.annotations, nullptr, biomarker_params(s.parameters));
  WallMeshes m;
  try {
    m = wall_meshes(*st.seg3d_mask, s.planes, report.profiles, spacing);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::NoUsableProfiles) throw;
    m = wall_meshes(*st.seg3d_mask, s.planes, {}, spacing);
  }
  if (format == "ply") return {200, "application/octet-stream", mesh_to_ply(m.inner)};
  return json_response({{"inner", to_json(m.inner)}, {"outer", to_json(m.outer)}});
}

Response Service::get_session(Entry& e) {
  std::lock_guard lock(e.mutex);
  return {200, "application/json", session_to_string(e.session)};
}

Response Service::put_session(Entry& e, const Request& r) {
  const Json body = parse_body(r.body);
  Session s = session_from_json(round_numbers(body));
  if (s.study_id != e.study.id)
    throw HttpError{422, "ValidationFailed", "session study_id does not match the route",
                    {{"violations", Json::array({{{"role", "annotation"}, {"message", "study_id mismatch"}}})}}};
  std::lock_guard lock(e.mutex);
  std::set<int> touched;
  for (const auto& a : e.session.annotations) touched.insert(a.plane_id);
  for (const auto& a : s.annotations) touched.insert(a.plane_id);
  for (int id : touched) {
    const auto* before = find_annotation(e.session, id);
    const auto* after = find_annotation(s, id);
    if (!before || !after || !(*before == *after)) ++e.revisions[id];
  }
  e.session = std::move(s);
  if (e.session_file) save_session(e.session, *e.session_file);
  return {200, "application/json", session_to_string(e.session)};
}

// ---------------------------------------------------------------------------
// HTTP listener

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) {
    const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      Request r{req.method, req.path, {}, req.body};
      for (const auto& [k, v] : req.params) r.query.emplace(k, v);  // first value wins
      const Response out = service.handle(r);
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    server.Get(".*", forward);
    server.Put(".*", forward);
    server.Post(".*", forward);
    server.Delete(".*", forward);
    server.Patch(".*", forward);
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace carotid::api
