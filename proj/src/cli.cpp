#include "carotid/cli.hpp"

#include "carotid/api.hpp"
#include "carotid/biomarkers.hpp"
#include "carotid/error.hpp"
#include "carotid/io.hpp"
#include "carotid/pathlines.hpp"
#include "carotid/phantom.hpp"
#include "carotid/pipeline.hpp"
#include "carotid/session.hpp"
#include "carotid/surface.hpp"
#include "carotid/volume_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>

namespace carotid::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string config;
};

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

Vec3 to_vec3(const std::vector<double>& v, const char* flag) {
  if (v.size() != 3) throw UsageError(std::string(flag) + " needs x,y,z");
  return {v[0], v[1], v[2]};
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, canonical_dump(j));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::CorruptHeader, path.string() + " is not JSON: " + e.what());
  }
}

// Parses an enumerated flag value; an unknown name is a usage error.
template <typename F>
auto flag_value(const char* flag, F parse) {
  try {
    return parse();
  } catch (const Error& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

fs::path with_extension(fs::path p, const char* ext) { return p.replace_extension(ext); }

// Volume references rewritten relative to the directory of another file.
std::vector<VolumeRef> rebase(const std::vector<VolumeRef>& refs, const fs::path& from_dir, const fs::path& to_dir) {
  std::vector<VolumeRef> out = refs;
  const fs::path target = fs::absolute(to_dir.empty() ? fs::path(".") : to_dir);
  for (auto& r : out) r.path = fs::absolute(from_dir / r.path).lexically_relative(target).generic_string();
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands. Each registers its flags and returns the action run after parsing.

using Action = std::function<void(std::ostream&)>;

Action add_phantom(CLI::App& app, const Globals& g) {
  auto* sub = app.add_subcommand("phantom", "Write a synthetic study (NIfTI volumes, manifest, truth)");
  auto spec = std::make_shared<PhantomSpec>();
  auto out = std::make_shared<std::string>();
  auto id = std::make_shared<std::string>();
  auto kind = std::make_shared<std::string>("stenotic_tube");
  auto waveform = std::make_shared<std::string>("half_sine");
  auto noise = std::make_shared<double>(0.0);
  sub->add_option("--out", *out, "Output directory")->type_name("DIR");
  sub->add_option("--id", *id, "Study id (default: phantom-<kind>)");
  sub->add_option("--kind", *kind, "straight_tube | stenotic_tube | bifurcation")->capture_default_str();
  sub->add_option("--radius", spec->lumen_radius, "Nominal lumen radius, mm")->capture_default_str();
  sub->add_option("--min-radius", spec->min_radius, "Stenosis throat radius, mm")->capture_default_str();
  sub->add_option("--stenosis-length", spec->stenosis_length, "Length of the narrowing, mm")->capture_default_str();
  sub->add_option("--wall", spec->wall_thickness, "Wall thickness, mm")->capture_default_str();
  sub->add_option("--length", spec->length, "Vessel length, mm")->capture_default_str();
  sub->add_option("--voxel", spec->voxel_spacing, "Isotropic voxel size, mm")->capture_default_str();
  sub->add_option("--margin", spec->margin, "Background around the wall, mm")->capture_default_str();
  sub->add_option("--v-max", spec->v_max, "Peak axial velocity, m/s")->capture_default_str();
  sub->add_option("--timepoints", spec->timepoints, "Flow frames per cycle")->capture_default_str();
  sub->add_option("--waveform", *waveform, "flat | half_sine")->capture_default_str();
  sub->add_option("--cycle", spec->cycle_length, "Cardiac cycle, ms")->capture_default_str();
  sub->add_option("--pwv", spec->pwv, "Pulse wave velocity, m/s (0: none)")->capture_default_str();
  sub->add_option("--noise", *noise, "Gaussian noise sigma added to the BB volume")->capture_default_str();

  return [=, &g](std::ostream& log) {
    need(*out, "--out");
    spec->kind = flag_value("--kind", [&] { return phantom_kind_from_string(*kind); });
    spec->waveform = flag_value("--waveform", [&] { return waveform_kind_from_string(*waveform); });
    validate(*spec);
    if (*noise < 0.0) throw UsageError("--noise must be non-negative");

    Phantom p = generate_phantom(*spec);
    ScalarVolume bb = p.bb;
    if (*noise > 0.0) {
      std::mt19937_64 rng(g.seed);
      std::normal_distribution<double> n(0.0, *noise);
      std::vector<double> v = bb.values();
      for (double& x : v) x += n(rng);
      bb = ScalarVolume(bb.dims(), bb.affine(), std::move(v));
    }
    Study study;
    study.id = id->empty() ? "phantom-" + *kind : *id;
    study.bb = std::move(bb);
    study.seg3d_mask = p.wall_mask;
    study.pcmra_mask = p.lumen_mask;
    study.flow = generate_flow(*spec);
    study.extras = {{"phantom", to_json(*spec)}, {"truth", to_json(p.truth)}, {"noise", *noise}, {"seed", g.seed}};

    const fs::path dir(*out);
    fs::create_directories(dir);
    save_study(study, dir / "study.json");
    write_json(dir / "truth.json", {{"phantom", to_json(*spec)}, {"truth", to_json(p.truth)}});
    log << "wrote " << (dir / "study.json").string() << '\n';
  };
}

Action add_centerline(CLI::App& app, const Globals&) {
  auto* sub = app.add_subcommand("centerline", "Extract a centerline between two seeds inside a lumen mask");
  auto study = std::make_shared<std::string>();
  auto mask_role = std::make_shared<std::string>();
  auto start = std::make_shared<std::vector<double>>();
  auto end = std::make_shared<std::vector<double>>();
  auto branch = std::make_shared<std::string>("ICA");
  auto out = std::make_shared<std::string>();
  sub->add_option("--study", *study, "Study manifest")->type_name("FILE");
  sub->add_option("--mask", *mask_role, "pcmra_mask | seg3d_mask (default: pcmra_mask when present)");
  sub->add_option("--start", *start, "Start seed x,y,z (mm)")->delimiter(',');
  sub->add_option("--end", *end, "End seed x,y,z (mm)")->delimiter(',');
  sub->add_option("--branch", *branch, "CCA | ICA | ECA")->capture_default_str();
  sub->add_option("--out", *out, "Centerline JSON")->type_name("FILE");

  return [=](std::ostream& log) {
    need(*study, "--study");
    need(*out, "--out");
    const Vec3 a = to_vec3(*start, "--start"), b = to_vec3(*end, "--end");
    const Branch br = flag_value("--branch", [&] { return branch_from_string(*branch); });
    const Study s = load_study(*study);
    std::string role = *mask_role;
    if (role.empty()) role = s.pcmra_mask ? "pcmra_mask" : "seg3d_mask";
    std::optional<BinaryMask> lumen;
    if (role == "pcmra_mask" && s.pcmra_mask) lumen = *s.pcmra_mask;
    else if (role == "seg3d_mask" && s.seg3d_mask) lumen = lumen_from_wall(*s.seg3d_mask);
    else if (role != "pcmra_mask" && role != "seg3d_mask") throw UsageError("--mask must be pcmra_mask or seg3d_mask");
    else throw Error(ErrorCode::IoFailure, "study has no " + role);
    const Centerline c = extract_centerline(*lumen, a, b, br);
    write_json(*out, to_json(c));
    log << "centerline " << c.size() << " points, " << c.length() << " mm\n";
  };
}

Action add_planes(CLI::App& app, const Globals&) {
  auto* sub = app.add_subcommand("planes", "Cross-sections along centerlines; writes a new session");
  auto centerlines = std::make_shared<std::vector<std::string>>();
  auto study = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto p = std::make_shared<SessionParameters>();
  sub->add_option("--centerline", *centerlines, "Centerline JSON (repeatable)")->type_name("FILE");
  sub->add_option("--study", *study, "Study manifest (id and volume references)")->type_name("FILE");
  sub->add_option("--spacing", p->plane_spacing, "Plane spacing along the centerline, mm")->capture_default_str();
  sub->add_option("--fov", p->fov, "Plane field of view, mm")->capture_default_str();
  sub->add_option("--in-plane-spacing", p->in_plane_spacing, "Pixel size, mm")->capture_default_str();
  sub->add_option("--mu", p->mu, "Blood viscosity, Pa s")->capture_default_str();
  sub->add_option("--rays", p->n_rays, "VWT rays per plane")->capture_default_str();
  sub->add_option("--v-threshold", p->v_threshold, "Pathline speed threshold, m/s")->capture_default_str();
  sub->add_option("--reference-window", p->reference_window_mm, "Distal NASCET window, mm")->capture_default_str();
  sub->add_option("--out", *out, "Session JSON")->type_name("FILE");

  return [=](std::ostream& log) {
    need(*study, "--study");
    need(*out, "--out");
    if (centerlines->empty()) throw UsageError("--centerline is required");
    if (!(p->plane_spacing > 0.0) || !(p->fov > 0.0) || !(p->in_plane_spacing > 0.0) || p->n_rays < 3)
      throw UsageError("spacing, fov and in-plane spacing must be positive, rays at least 3");
    const Study s = load_study(*study);
    Session session;
    session.study_id = s.id;
    session.parameters = *p;
    for (const auto& c : *centerlines) session.centerlines.push_back(centerline_from_json(read_json(c)));
    session.planes = planes_for(session.centerlines, session.parameters);
    const fs::path out_path(*out);
    session.volumes = rebase(s.files, fs::path(*study).parent_path(), out_path.parent_path());
    save_session(session, out_path);
    log << session.planes.size() << " planes\n";
  };
}

Action add_autofit(CLI::App& app, const Globals& g) {
  auto* sub = app.add_subcommand("autofit", "Fit lumen and outer-wall contours on every plane from a wall mask");
  auto session_path = std::make_shared<std::string>();
  auto study = std::make_shared<std::string>();
  auto mask = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto overwrite = std::make_shared<bool>(false);
  auto fit = std::make_shared<FitParams>();
  sub->add_option("--session", *session_path, "Session JSON")->type_name("FILE");
  sub->add_option("--study", *study, "Study manifest providing seg3d_mask")->type_name("FILE");
  sub->add_option("--mask", *mask, "Wall mask volume instead of the study's seg3d_mask")->type_name("FILE");
  sub->add_option("--out", *out, "Output session (default: overwrite --session)")->type_name("FILE");
  sub->add_flag("--overwrite", *overwrite, "Replace manual and corrected annotations too");
  sub->add_option("--fit-seeds", fit->n_seeds, "Seeds per fitted contour")->capture_default_str();
  sub->add_option("--sigma", fit->smoothing_sigma, "Boundary smoothing, samples")->capture_default_str();

  return [=, &g](std::ostream& log) {
    need(*session_path, "--session");
    if (study->empty() == mask->empty()) throw UsageError("give exactly one of --study and --mask");
    if (fit->n_seeds < 3) throw UsageError("--fit-seeds must be at least 3");
    Session session = load_session(*session_path);
    std::optional<BinaryMask> wall;
    if (!mask->empty()) {
      wall = load_mask(*mask);
    } else {
      Study s = load_study(*study);
      if (!s.seg3d_mask) throw Error(ErrorCode::IoFailure, "study has no seg3d_mask");
      wall = std::move(s.seg3d_mask);
    }
    const AutofitResult r = autofit_planes(*wall, session.planes, *fit, g.threads);
    std::map<int, SliceAnnotation> merged;
    for (const auto& a : session.annotations) merged.emplace(a.plane_id, a);
    int kept = 0;
    for (const auto& a : r.annotations) {
      const auto it = merged.find(a.plane_id);
      if (it != merged.end() && it->second.source != AnnotationSource::automatic && !*overwrite) {
        ++kept;
        continue;
      }
      merged[a.plane_id] = a;
    }
    session.annotations.clear();
    for (auto& [id, a] : merged) session.annotations.push_back(std::move(a));
    for (const auto& f : r.failures) log << "plane " << f.plane_id << ": " << f.reason << '\n';
    if (r.annotations.empty() && !session.planes.empty()) throw Error(ErrorCode::EmptyMask, "no plane could be fitted");
    save_session(session, out->empty() ? fs::path(*session_path) : fs::path(*out));
    log << "fitted " << r.annotations.size() << " of " << session.planes.size() << " planes";
    if (kept) log << ", kept " << kept << " edited";
    log << '\n';
  };
}

Action add_biomarkers(CLI::App& app, const Globals&) {
  auto* sub = app.add_subcommand("biomarkers", "Per-plane biomarkers, stenosis and PWV as CSV and JSON");
  auto session_path = std::make_shared<std::string>();
  auto study = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto json_out = std::make_shared<std::string>();
  auto reference = std::make_shared<double>(0.0);
  auto flow_time = std::make_shared<double>(-1.0);
  sub->add_option("--session", *session_path, "Session JSON")->type_name("FILE");
  sub->add_option("--study", *study, "Study manifest; its flow enables flow rate, WSS and PWV")->type_name("FILE");
  sub->add_option("--out", *out, "CSV report")->type_name("FILE");
  sub->add_option("--json", *json_out, "JSON report (default: --out with .json)")->type_name("FILE");
  sub->add_option("--reference-diameter", *reference, "NASCET reference diameter, mm (default: distal window)");
  sub->add_option("--flow-time", *flow_time, "Frame time for flow and WSS, ms (default: peak frame)");

  return [=](std::ostream& log) {
    need(*session_path, "--session");
    need(*out, "--out");
    const Session session = load_session(*session_path);
    std::optional<Study> s;
    if (!study->empty()) s = load_study(*study);
    BiomarkerParams bp = biomarker_params(session.parameters);
    if (*reference > 0.0) bp.reference_diameter = *reference;
    if (*flow_time >= 0.0) bp.flow_time = *flow_time;
    const VelocityField* flow = s && s->flow ? &*s->flow : nullptr;
    const BiomarkerReport report = compute_biomarkers(session.planes, session.annotations, flow, bp);
    write_text(*out, report_to_csv(report));
    write_text(json_out->empty() ? with_extension(*out, ".json") : fs::path(*json_out), report_to_json(report));
    log << report.rows.size() << " rows";
    if (report.stenosis) log << ", stenosis " << report.stenosis->percent << " %";
    log << '\n';
  };
}

Action add_pathlines(CLI::App& app, const Globals& g) {
  auto* sub = app.add_subcommand("pathlines", "Trace pathlines from a cross-section emitter");
  auto study = std::make_shared<std::string>();
  auto session_path = std::make_shared<std::string>();
  auto plane = std::make_shared<int>(-1);
  auto seeds = std::make_shared<int>(16);
  auto starts = std::make_shared<std::vector<double>>(std::vector<double>{0.0});
  auto duration = std::make_shared<double>(0.0);
  auto dt = std::make_shared<double>(0.0);
  auto no_gate = std::make_shared<bool>(false);
  auto out = std::make_shared<std::string>();
  auto stats_out = std::make_shared<std::string>();
  sub->add_option("--study", *study, "Study manifest with flow")->type_name("FILE");
  sub->add_option("--session", *session_path, "Session JSON with the emitter plane")->type_name("FILE");
  sub->add_option("--plane", *plane, "Emitter plane id");
  sub->add_option("--seeds", *seeds, "Seeds per start time")->capture_default_str();
  sub->add_option("--start-times", *starts, "Release times, ms")->delimiter(',');
  sub->add_option("--duration", *duration, "Trace duration, ms (default: one cycle)");
  sub->add_option("--dt", *dt, "RK4 step, ms (default: from venc and voxel size)");
  sub->add_flag("--no-gate", *no_gate, "Ignore the PC-MRA mask");
  sub->add_option("--out", *out, "Output: .json for JSON, anything else binary")->type_name("FILE");
  sub->add_option("--stats", *stats_out, "Speed statistics JSON")->type_name("FILE");

  return [=, &g](std::ostream& log) {
    need(*study, "--study");
    need(*session_path, "--session");
    need(*out, "--out");
    if (*plane < 0) throw UsageError("--plane is required");
    if (*seeds < 1) throw UsageError("--seeds must be positive");
    if (starts->empty()) throw UsageError("--start-times is empty");
    const Study s = load_study(*study);
    if (!s.flow) throw Error(ErrorCode::IoFailure, "study has no flow");
    const Session session = load_session(*session_path);
    const CrossSectionPlane* emitter = nullptr;
    for (const auto& p : session.planes)
      if (p.id == *plane) emitter = &p;
    if (!emitter) throw Error(ErrorCode::InvalidArgument, "no plane " + std::to_string(*plane));
    const ClosedSplineContour* lumen = nullptr;
    for (const auto& a : session.annotations)
      if (a.plane_id == *plane && a.usable && a.lumen) lumen = &*a.lumen;

    EmitterSpec em;
    em.plane_id = *plane;
    em.seed_count = *seeds;
    em.start_times = *starts;
    TraceParams tp;
    tp.threads = g.threads;
    const BinaryMask* gate = !*no_gate && s.pcmra_mask ? &*s.pcmra_mask : nullptr;
    const PathlineSet set = trace_emitter(*s.flow, seed_from_cross_section(*emitter, lumen, *seeds), em,
                                          *duration > 0.0 ? *duration : s.flow->cycle_length(),
                                          *dt > 0.0 ? *dt : default_dt(*s.flow), gate, tp);
    const PathlineStats stats = pathline_stats(set, session.parameters.v_threshold);
    if (fs::path(*out).extension() == ".json") write_json(*out, {{"pathlines", to_json(set)}, {"stats", to_json(stats)}});
    else write_text(*out, pathlines_to_binary(set));
    if (!stats_out->empty()) write_json(*stats_out, to_json(stats));
    log << set.lines.size() << " pathlines, max speed " << stats.max_speed << " m/s\n";
  };
}

Action add_mesh(CLI::App& app, const Globals&) {
  auto* sub = app.add_subcommand("mesh", "Marching-cubes surfaces as PLY, VWT on the inner wall");
  auto study = std::make_shared<std::string>();
  auto mask = std::make_shared<std::string>();
  auto session_path = std::make_shared<std::string>();
  auto surface = std::make_shared<std::string>("wall");
  auto out = std::make_shared<std::string>();
  auto outer = std::make_shared<std::string>();
  auto json_out = std::make_shared<std::string>();
  sub->add_option("--study", *study, "Study manifest")->type_name("FILE");
  sub->add_option("--mask", *mask, "Mask volume instead of the study's")->type_name("FILE");
  sub->add_option("--session", *session_path, "Session whose usable annotations give VWT scalars")->type_name("FILE");
  sub->add_option("--surface", *surface, "wall (seg3d_mask) | pcmra")->capture_default_str();
  sub->add_option("--out", *out, "PLY of the inner wall (or the PC-MRA surface)")->type_name("FILE");
  sub->add_option("--outer", *outer, "PLY of the outer wall")->type_name("FILE");
  sub->add_option("--json", *json_out, "Mesh JSON as served to the viewer")->type_name("FILE");

  return [=](std::ostream& log) {
    need(*out, "--out");
    if (study->empty() == mask->empty()) throw UsageError("give exactly one of --study and --mask");
    if (*surface != "wall" && *surface != "pcmra") throw UsageError("--surface must be wall or pcmra");
    std::optional<BinaryMask> m;
    if (!mask->empty()) {
      m = load_mask(*mask);
    } else {
      Study s = load_study(*study);
      auto& src = *surface == "wall" ? s.seg3d_mask : s.pcmra_mask;
      if (!src) throw Error(ErrorCode::IoFailure, std::string("study has no ") + (*surface == "wall" ? "seg3d_mask" : "pcmra_mask"));
      m = std::move(src);
    }
    if (*surface == "pcmra") {
      const SurfaceMesh mesh = marching_cubes(*m, 0.5, MeshTag::pcmra);
      export_mesh(mesh, *out);
      if (!json_out->empty()) write_json(*json_out, {{"pcmra", to_json(mesh)}});
      log << mesh.triangles.size() << " triangles\n";
      return;
    }
    std::vector<CrossSectionPlane> planes;
    std::vector<VwtProfile> profiles;
    if (!session_path->empty()) {
      const Session session = load_session(*session_path);
      planes = session.planes;
      profiles = compute_biomarkers(session.planes, session.annotations, nullptr, biomarker_params(session.parameters)).profiles;
    }
    WallMeshes w;
    try {
      w = wall_meshes(*m, planes, profiles);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoUsableProfiles) throw;
      w = wall_meshes(*m, planes, {});
    }
    export_mesh(w.inner, *out);
    if (!outer->empty()) export_mesh(w.outer, *outer);
    if (!json_out->empty()) write_json(*json_out, {{"inner", to_json(w.inner)}, {"outer", to_json(w.outer)}});
    std::size_t with_vwt = 0;
    for (double v : w.inner.scalars) with_vwt += v != kNoData;
    log << w.inner.triangles.size() << " triangles, VWT on " << with_vwt << " of " << w.inner.vertices.size()
        << " vertices\n";
  };
}

Action add_serve(CLI::App& app, const Globals& g) {
  auto* sub = app.add_subcommand("serve", "Start the REST service");
  auto studies = std::make_shared<std::vector<std::string>>();
  auto session_dir = std::make_shared<std::string>();
  auto bind = std::make_shared<std::string>(api::kDefaultBind);
  auto port = std::make_shared<int>(api::kDefaultPort);
  sub->add_option("--study", *studies, "Study manifest (repeatable)")->type_name("FILE");
  sub->add_option("--session-dir", *session_dir, "Directory of <study id>.json sessions, updated on writes")
      ->type_name("DIR");
  sub->add_option("--bind", *bind, "Listen address")->capture_default_str();
  sub->add_option("--port", *port, "Listen port")->capture_default_str();

  return [=, &g](std::ostream& log) {
    if (studies->empty()) throw UsageError("--study is required");
    if (*port < 0 || *port > 65535) throw UsageError("--port out of range");
    api::Service service;
    service.set_threads(g.threads);
    if (!session_dir->empty()) fs::create_directories(*session_dir);
    for (const auto& path : *studies) {
      Study s = load_study(path);
      std::optional<Session> session;
      std::optional<fs::path> file;
      if (!session_dir->empty()) {
        file = fs::path(*session_dir) / (s.id + ".json");
        if (fs::exists(*file)) session = load_session(*file);
      }
      service.add_study(std::move(s), std::move(session), file);
    }
    api::HttpServer server(service);
    const int bound = server.bind(*bind, *port);
    log << "listening on http://" << *bind << ':' << bound << '\n' << std::flush;
    server.listen();
  };
}

// Config values are applied to options the command line left unset.
void apply_config(const Json& config, CLI::App& root, CLI::App& sub) {
  if (!config.is_object()) throw UsageError("--config must hold a JSON object");
  const auto set = [](CLI::Option* opt, const std::string& key, const Json& v) {
    if (opt->count() > 0) return;  // flags win
    const auto text = [&](const Json& x) {
      if (x.is_string()) return x.get<std::string>();
      if (x.is_boolean()) return std::string(x.get<bool>() ? "true" : "false");
      if (x.is_number()) return x.dump();
      throw UsageError("config key '" + key + "' has an unsupported value");
    };
    if (v.is_array())
      for (const Json& x : v) opt->add_result(text(x));
    else
      opt->add_result(text(v));
    opt->run_callback();
  };
  const auto apply = [&](const Json& section, bool top) {
    for (auto it = section.begin(); it != section.end(); ++it) {
      const std::string& key = it.key();
      if (top && it->is_object()) continue;  // per-subcommand section
      CLI::Option* opt = sub.get_option_no_throw("--" + key);
      if (!opt) opt = root.get_option_no_throw("--" + key);
      if (!opt || key == "help" || key == "config") throw UsageError("unknown config key '" + key + "' for " + sub.get_name());
      set(opt, key, *it);
    }
  };
  apply(config, true);
  if (config.contains(sub.get_name()) && config.at(sub.get_name()).is_object()) apply(config.at(sub.get_name()), false);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Carotid stenosis workbench: phantoms, centerlines, contours, biomarkers, pathlines, meshes",
               "carotid");
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)")->capture_default_str();
  app.add_option("--config", g.config, "JSON file mirroring the flags; flags win")->type_name("FILE");

  std::map<std::string, Action> actions;
  actions["phantom"] = add_phantom(app, g);
  actions["centerline"] = add_centerline(app, g);
  actions["planes"] = add_planes(app, g);
  actions["autofit"] = add_autofit(app, g);
  actions["biomarkers"] = add_biomarkers(app, g);
  actions["pathlines"] = add_pathlines(app, g);
  actions["mesh"] = add_mesh(app, g);
  actions["serve"] = add_serve(app, g);

  const auto usage = [&](const std::string& message) {
    CLI::App* shown = &app;
    for (CLI::App* s : app.get_subcommands()) shown = s;
    err << "error: " << message << "\n\n" << shown->help();
    return kExitUsage;
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return usage(e.what());
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!g.config.empty()) apply_config(read_json(g.config), app, *sub);
    if (g.threads < 0) throw UsageError("--threads must be non-negative");
    actions.at(sub->get_name())(out);
    return kExitOk;
  } catch (const UsageError& e) {
    return usage(e.what());
  } catch (const CLI::ParseError& e) {
    return usage(e.what());
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace carotid::cli
