#include "carotid/phantom.hpp"

#include "carotid/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace carotid {

std::string_view to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::straight_tube: return "straight_tube";
    case PhantomKind::stenotic_tube: return "stenotic_tube";
    case PhantomKind::bifurcation: return "bifurcation";
  }
  return "straight_tube";
}

std::string_view to_string(WaveformKind kind) {
  return kind == WaveformKind::flat ? "flat" : "half_sine";
}

PhantomKind phantom_kind_from_string(std::string_view name) {
  if (name == "straight_tube" || name == "straight") return PhantomKind::straight_tube;
  if (name == "stenotic_tube" || name == "stenotic") return PhantomKind::stenotic_tube;
  if (name == "bifurcation") return PhantomKind::bifurcation;
  throw Error(ErrorCode::SpecInvalid, "unknown phantom kind '" + std::string(name) + "'");
}

WaveformKind waveform_kind_from_string(std::string_view name) {
  if (name == "flat") return WaveformKind::flat;
  if (name == "half_sine" || name == "half-sine") return WaveformKind::half_sine;
  throw Error(ErrorCode::SpecInvalid, "unknown waveform '" + std::string(name) + "'");
}

void validate(const PhantomSpec& s) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::SpecInvalid, std::string(name) + " must be positive");
    }
  };
  positive(s.lumen_radius, "lumen_radius");
  positive(s.wall_thickness, "wall_thickness");
  positive(s.length, "length");
  positive(s.voxel_spacing, "voxel_spacing");
  positive(s.cycle_length, "cycle_length");
  if (s.kind == PhantomKind::stenotic_tube) {
    positive(s.min_radius, "min_radius");
    positive(s.stenosis_length, "stenosis_length");
    if (s.min_radius > s.lumen_radius) {
      throw Error(ErrorCode::SpecInvalid, "min_radius must not exceed lumen_radius");
    }
  }
  if (s.kind == PhantomKind::bifurcation) {
    positive(s.ica_radius, "ica_radius");
    positive(s.eca_radius, "eca_radius");
    if (!(s.branch_angle_deg > 0.0 && s.branch_angle_deg < 80.0)) {
      throw Error(ErrorCode::SpecInvalid, "branch_angle_deg must lie in (0, 80)");
    }
  }
  if (!(s.margin >= 0.0)) throw Error(ErrorCode::SpecInvalid, "margin must be >= 0");
  if (!(s.v_max >= 0.0)) throw Error(ErrorCode::SpecInvalid, "v_max must be >= 0");
  if (s.timepoints < 2) throw Error(ErrorCode::SpecInvalid, "timepoints must be at least 2");
  if (!(s.pwv >= 0.0)) throw Error(ErrorCode::SpecInvalid, "pwv must be >= 0");
}

double lumen_radius_at(const PhantomSpec& s, double z) {
  if (s.kind != PhantomKind::stenotic_tube) return s.lumen_radius;
  const double zc = 0.5 * s.length;
  const double u = (z - zc) / s.stenosis_length;
  if (std::abs(u) >= 0.5) return s.lumen_radius;
  const double bump = 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * u));
  return s.lumen_radius - (s.lumen_radius - s.min_radius) * bump;
}

double waveform_value(const PhantomSpec& s, double t_ms, double arc_mm) {
  if (s.waveform == WaveformKind::flat) return 1.0;
  const double delay = s.pwv > 0.0 ? arc_mm / s.pwv : 0.0;
  return std::max(0.0, std::sin(2.0 * std::numbers::pi * (t_ms - delay) / s.cycle_length));
}

double systole_time(const PhantomSpec& s) {
  return s.waveform == WaveformKind::flat ? 0.0 : 0.25 * s.cycle_length;
}

namespace {

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius;
  double v_axis;  // centerline speed at systole
  double arc0;    // arc position of a along the pulse path
};

struct Geometry {
  const PhantomSpec& spec;
  std::vector<Capsule> capsules;  // bifurcation only
  double outer_radius;

  explicit Geometry(const PhantomSpec& s) : spec(s), outer_radius(s.lumen_radius + s.wall_thickness) {
    if (s.kind != PhantomKind::bifurcation) return;
    const double zb = 0.5 * s.length;
    const double lb = 0.5 * s.length;
    const double th = s.branch_angle_deg * std::numbers::pi / 180.0;
    const Vec3 bif(0, 0, zb);
    const double r2 = s.lumen_radius * s.lumen_radius;
    const double branch_v = s.v_max * r2 / (s.ica_radius * s.ica_radius + s.eca_radius * s.eca_radius);
    capsules.push_back({Vec3(0, 0, -s.length), bif, s.lumen_radius, s.v_max, -s.length});
    capsules.push_back({bif, bif + lb * Vec3(std::sin(th), 0, std::cos(th)), s.ica_radius, branch_v, zb});
    capsules.push_back({bif, bif + lb * Vec3(-std::sin(th), 0, std::cos(th)), s.eca_radius, branch_v, zb});
  }

  // Distance to a capsule axis and the axial parameter (mm from a).
  static std::pair<double, double> axis_distance(const Capsule& c, const Vec3& p) {
    const Vec3 ab = c.b - c.a;
    const double len = ab.norm();
    const double t = std::clamp((p - c.a).dot(ab) / len, 0.0, len);
    return {(c.a + ab * (t / len) - p).norm(), t};
  }

  [[nodiscard]] double lumen_sd(const Vec3& p) const {
    if (capsules.empty()) return std::hypot(p.x(), p.y()) - lumen_radius_at(spec, p.z());
    double d = std::numeric_limits<double>::infinity();
    for (const auto& c : capsules) d = std::min(d, axis_distance(c, p).first - c.radius);
    return d;
  }

  [[nodiscard]] double outer_sd(const Vec3& p) const {
    if (capsules.empty()) return std::hypot(p.x(), p.y()) - outer_radius;
    double d = std::numeric_limits<double>::infinity();
    for (const auto& c : capsules) {
      d = std::min(d, axis_distance(c, p).first - c.radius - spec.wall_thickness);
    }
    return d;
  }

  // Systolic velocity (before temporal modulation) and the arc position for the pulse delay.
  [[nodiscard]] std::pair<Vec3, double> velocity(const Vec3& p) const {
    if (capsules.empty()) {
      const double R = lumen_radius_at(spec, p.z());
      const double r2 = p.x() * p.x() + p.y() * p.y();
      if (r2 >= R * R) return {Vec3::Zero(), p.z()};
      const double ratio = spec.lumen_radius / R;
      const double axis = spec.v_max * ratio * ratio;
      return {Vec3(0, 0, axis * (1.0 - r2 / (R * R))), p.z()};
    }
    // the capsule in which the point lies deepest, relative to its radius
    const Capsule* best = nullptr;
    double best_depth = 0.0, best_dist = 0.0, best_t = 0.0;
    for (const auto& c : capsules) {
      const auto [dist, t] = axis_distance(c, p);
      if (dist >= c.radius) continue;
      const double depth = 1.0 - dist / c.radius;
      if (!best || depth > best_depth) {
        best = &c;
        best_depth = depth;
        best_dist = dist;
        best_t = t;
      }
    }
    if (!best) return {Vec3::Zero(), p.z()};
    const Vec3 dir = (best->b - best->a).normalized();
    const double q = best_dist / best->radius;
    return {dir * (best->v_axis * (1.0 - q * q)), best->arc0 + best_t};
  }
};

template <class F>
void for_each_voxel(const Dims& dims, const Affine& affine, F&& f) {
  std::size_t idx = 0;
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i, ++idx) f(idx, affine.voxel_to_world(Vec3(i, j, k)));
}

}  // namespace

Affine phantom_affine(const PhantomSpec& s, Dims& dims) {
  validate(s);
  const double h = s.voxel_spacing;
  auto count = [h](double extent) { return static_cast<int>(std::floor(extent / h + 1e-9)) + 1; };
  // odd count with a voxel center on the axis
  auto centered = [h](double half) { return 2 * static_cast<int>(std::ceil(half / h - 1e-9)) + 1; };
  if (s.kind != PhantomKind::bifurcation) {
    const double half = s.lumen_radius + s.wall_thickness + s.margin;
    dims = {centered(half), centered(half), count(s.length)};
  } else {
    const double th = s.branch_angle_deg * std::numbers::pi / 180.0;
    const double rmax = std::max({s.lumen_radius, s.ica_radius, s.eca_radius});
    const double pad = rmax + s.wall_thickness + s.margin;
    const double half_x = 0.5 * s.length * std::sin(th) + pad;
    const double top = 0.5 * s.length * (1.0 + std::cos(th)) + pad;
    dims = {centered(half_x), centered(pad), count(top)};
  }
  // x and y centered on the axis so voxel centers are symmetric about it
  const Vec3 origin(-(dims[0] - 1) * h / 2.0, -(dims[1] - 1) * h / 2.0, 0.0);
  return Affine::from_spacing(Vec3(h, h, h), origin);
}

Phantom generate_phantom(const PhantomSpec& s) {
  Dims dims{};
  const Affine affine = phantom_affine(s, dims);
  const Geometry geo(s);
  const std::size_t n = voxel_count(dims);
  std::vector<double> values(n);
  std::vector<std::uint8_t> lumen_bits(n, 0), wall_bits(n, 0);
  const double h = s.voxel_spacing;
  for_each_voxel(dims, affine, [&](std::size_t idx, const Vec3& p) {
    const double dl = geo.lumen_sd(p);
    const double dw = geo.outer_sd(p);
    const double fl = std::clamp(0.5 - dl / h, 0.0, 1.0);
    const double fw = std::max(fl, std::clamp(0.5 - dw / h, 0.0, 1.0));
    values[idx] = kLumenIntensity * fl + kWallIntensity * (fw - fl) + kBackgroundIntensity * (1.0 - fw);
    lumen_bits[idx] = dl <= 0.0 ? 1 : 0;
    wall_bits[idx] = (dl > 0.0 && dw <= 0.0) ? 1 : 0;
  });

  PhantomTruth truth;
  const double step = 0.5;
  if (s.kind != PhantomKind::bifurcation) {
    truth.centerlines.emplace_back(Polyline3{Vec3(0, 0, 0), Vec3(0, 0, s.length)}, Branch::ICA);
    for (double z = 0.0; z <= s.length + 1e-9; z += step) {
      const double r = lumen_radius_at(s, z);
      truth.arc.push_back(z);
      truth.lumen_radius.push_back(r);
      truth.wall_thickness.push_back(geo.outer_radius - r);
    }
    truth.reference_radius = s.lumen_radius;
    truth.min_radius = s.kind == PhantomKind::stenotic_tube ? s.min_radius : s.lumen_radius;
  } else {
    const Capsule& cca = geo.capsules[0];
    const Capsule& ica = geo.capsules[1];
    const Capsule& eca = geo.capsules[2];
    truth.centerlines.emplace_back(Polyline3{Vec3(0, 0, 0), cca.b, ica.b}, Branch::ICA);
    truth.centerlines.emplace_back(Polyline3{Vec3(0, 0, 0), cca.b, eca.b}, Branch::ECA);
    const Centerline& c = truth.centerlines.front();
    for (double a = 0.0; a <= c.length() + 1e-9; a += step) {
      const double r = a <= cca.b.z() ? cca.radius : ica.radius;
      truth.arc.push_back(a);
      truth.lumen_radius.push_back(r);
      truth.wall_thickness.push_back(s.wall_thickness);
    }
    truth.reference_radius = s.ica_radius;
    truth.min_radius = s.ica_radius;
  }
  truth.stenosis_percent = 100.0 * (1.0 - truth.min_radius / truth.reference_radius);

  return Phantom{ScalarVolume(dims, affine, std::move(values)), BinaryMask(dims, affine, std::move(lumen_bits)),
                 BinaryMask(dims, affine, std::move(wall_bits)), std::move(truth)};
}

VelocityField generate_flow(const PhantomSpec& s) {
  Dims dims{};
  const Affine affine = phantom_affine(s, dims);
  const Geometry geo(s);
  const std::size_t n = voxel_count(dims);
  const int nt = s.timepoints;
  std::vector<double> times(static_cast<std::size_t>(nt));
  for (int f = 0; f < nt; ++f) times[static_cast<std::size_t>(f)] = s.cycle_length * f / nt;
  std::array<std::vector<double>, 3> comps;
  for (auto& c : comps) c.assign(n * static_cast<std::size_t>(nt), 0.0);
  for_each_voxel(dims, affine, [&](std::size_t idx, const Vec3& p) {
    const auto [v, arc] = geo.velocity(p);
    if (v.isZero(0.0)) return;
    for (int f = 0; f < nt; ++f) {
      const double w = waveform_value(s, times[static_cast<std::size_t>(f)], arc);
      const std::size_t o = static_cast<std::size_t>(f) * n + idx;
      for (int a = 0; a < 3; ++a) comps[a][o] = v[a] * w;
    }
  });
  return VelocityField(dims, affine, std::move(times), s.cycle_length, std::move(comps), 1.5 * s.v_max);
}

Json to_json(const PhantomSpec& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"lumen_radius", s.lumen_radius},
          {"min_radius", s.min_radius},
          {"stenosis_length", s.stenosis_length},
          {"ica_radius", s.ica_radius},
          {"eca_radius", s.eca_radius},
          {"branch_angle_deg", s.branch_angle_deg},
          {"wall_thickness", s.wall_thickness},
          {"length", s.length},
          {"voxel_spacing", s.voxel_spacing},
          {"margin", s.margin},
          {"v_max", s.v_max},
          {"timepoints", s.timepoints},
          {"waveform", std::string(to_string(s.waveform))},
          {"cycle_length", s.cycle_length},
          {"pwv", s.pwv}};
}

PhantomSpec phantom_spec_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SpecInvalid, "phantom spec must be a JSON object");
  PhantomSpec s;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const Json& v = it.value();
      if (k == "kind") s.kind = phantom_kind_from_string(v.get<std::string>());
      else if (k == "waveform") s.waveform = waveform_kind_from_string(v.get<std::string>());
      else if (k == "timepoints") s.timepoints = v.get<int>();
      else if (k == "lumen_radius") s.lumen_radius = v.get<double>();
      else if (k == "min_radius") s.min_radius = v.get<double>();
      else if (k == "stenosis_length") s.stenosis_length = v.get<double>();
      else if (k == "ica_radius") s.ica_radius = v.get<double>();
      else if (k == "eca_radius") s.eca_radius = v.get<double>();
      else if (k == "branch_angle_deg") s.branch_angle_deg = v.get<double>();
      else if (k == "wall_thickness") s.wall_thickness = v.get<double>();
      else if (k == "length") s.length = v.get<double>();
      else if (k == "voxel_spacing") s.voxel_spacing = v.get<double>();
      else if (k == "margin") s.margin = v.get<double>();
      else if (k == "v_max") s.v_max = v.get<double>();
      else if (k == "cycle_length") s.cycle_length = v.get<double>();
      else if (k == "pwv") s.pwv = v.get<double>();
      else throw Error(ErrorCode::SpecInvalid, "unknown phantom field '" + k + "'");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SpecInvalid, std::string("bad phantom field type: ") + e.what());
  }
  validate(s);
  return s;
}

Json to_json(const PhantomTruth& t) {
  Json lines = Json::array();
  for (const auto& c : t.centerlines) {
    Json pts = Json::array();
    for (const Vec3& p : c.points()) pts.push_back({p.x(), p.y(), p.z()});
    lines.push_back({{"branch", std::string(to_string(c.branch()))}, {"points", pts}});
  }
  return {{"centerlines", lines},
          {"arc", t.arc},
          {"lumen_radius", t.lumen_radius},
          {"wall_thickness", t.wall_thickness},
          {"reference_radius", t.reference_radius},
          {"min_radius", t.min_radius},
          {"stenosis_percent", t.stenosis_percent}};
}

}  // namespace carotid
