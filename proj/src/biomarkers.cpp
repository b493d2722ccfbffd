#include "carotid/biomarkers.hpp"

#include "carotid/error.hpp"
#include "carotid/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace carotid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Smallest positive ray parameter where o + t·d crosses the closed polygon.
std::optional<double> first_hit(const Polyline2& poly, const Vec2& o, const Vec2& d) {
  std::optional<double> best;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 e = poly[(i + 1) % n] - a;
    const double den = d.x() * e.y() - d.y() * e.x();
    if (std::abs(den) < 1e-300) continue;
    const Vec2 w = a - o;
    const double t = (w.x() * e.y() - w.y() * e.x()) / den;
    const double s = (w.x() * d.y() - w.y() * d.x()) / den;
    if (t > 1e-12 && s >= 0.0 && s <= 1.0 && (!best || t < *best)) best = t;
  }
  return best;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Polyline2 convex_hull(Polyline2 pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  Polyline2 hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  return hull;
}

}  // namespace

VwtProfile vwt_profile(const ClosedSplineContour& lumen, const ClosedSplineContour& wall, int n_rays,
                       int plane_id) {
  if (n_rays < 8) throw Error(ErrorCode::InvalidArgument, "n_rays must be at least 8");
  SliceAnnotation probe;
  probe.lumen = lumen;
  probe.wall = wall;
  if (const auto report = validate_annotation(probe); !report.empty()) {
    throw Error(ErrorCode::ValidationFailed, report.front().role + ": " + report.front().message);
  }
  const Polyline2 lp = evaluate_contour(lumen, kDenseSamples);
  const Polyline2 wp = evaluate_contour(wall, kDenseSamples);

  VwtProfile out;
  out.plane_id = plane_id;
  out.center = polygon_centroid(lp);
  double sum = 0.0;
  int valid = 0;
  for (int k = 0; k < n_rays; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / n_rays;
    const Vec2 dir(std::cos(angle), std::sin(angle));
    const auto tl = first_hit(lp, out.center, dir);
    const auto tw = first_hit(wp, out.center, dir);
    out.angles.push_back(angle);
    if (!tl || !tw || *tw < *tl) {
      out.thickness.push_back(kNaN);
      ++out.invalid_rays;
      continue;
    }
    const double t = *tw - *tl;
    out.thickness.push_back(t);
    sum += t;
    out.max = valid == 0 ? t : std::max(out.max, t);
    ++valid;
  }
  if (valid == 0) throw Error(ErrorCode::RayMiss, "no ray hits both lumen and wall");
  out.mean = sum / valid;
  return out;
}

double stenosis_degree(double d_stenosis, double d_reference) {
  if (!(d_reference > 0.0)) {
    throw Error(ErrorCode::NonpositiveReference, "reference diameter must be positive");
  }
  if (!(d_stenosis >= 0.0)) throw Error(ErrorCode::InvalidArgument, "stenosis diameter must be >= 0");
  return std::clamp(100.0 * (1.0 - d_stenosis / d_reference), 0.0, 100.0);
}

double equivalent_diameter(const ClosedSplineContour& contour) {
  return 2.0 * std::sqrt(contour_area(contour) / std::numbers::pi);
}

double minimal_caliper_diameter(const ClosedSplineContour& contour) {
  const Polyline2 hull = convex_hull(evaluate_contour(contour, kDenseSamples));
  if (hull.size() < 3) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 a = hull[i];
    const Vec2 e = hull[(i + 1) % hull.size()] - a;
    const double len = e.norm();
    if (len <= 0.0) continue;
    double width = 0.0;
    for (const Vec2& p : hull) width = std::max(width, std::abs(e.x() * (p - a).y() - e.y() * (p - a).x()) / len);
    best = std::min(best, width);
  }
  return best;
}

double flow_rate(const CrossSectionPlane& plane, const ClosedSplineContour& lumen,
                 const VelocityField& field, double t_ms) {
  const PlaneGrid grid = plane.grid();
  const Mask2D mask = contour_to_mask(lumen, grid);
  double q = 0.0;
  std::size_t sampled = 0;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (!mask.at(i, j)) continue;
      const auto v = field.sample(plane.to_world(grid.pixel_center(i, j)), t_ms);
      if (!v) continue;
      q += v->dot(plane.frame.tangent);
      ++sampled;
    }
  if (sampled == 0) throw Error(ErrorCode::NoOverlap, "lumen pixels do not overlap the velocity field");
  return q * grid.pixel_area();
}

WssResult wss(const CrossSectionPlane& plane, const ClosedSplineContour& lumen,
              const VelocityField& field, double t_ms, double mu, std::optional<double> h) {
  if (!(mu > 0.0)) throw Error(ErrorCode::InvalidArgument, "viscosity must be positive");
  const double step = h.value_or(plane.in_plane_spacing);
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "wall offset must be positive");
  Polyline2 boundary = evaluate_contour(lumen, kDenseSamples);
  const bool ccw = polygon_signed_area(boundary) > 0.0;
  const std::size_t n = boundary.size();

  WssResult out;
  out.points = boundary;
  out.values.assign(n, kNaN);
  double sum = 0.0;
  int valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 t = boundary[(i + 1) % n] - boundary[(i + n - 1) % n];
    Vec2 inward(-t.y(), t.x());
    if (!ccw) inward = -inward;
    if (inward.norm() <= 0.0) {
      ++out.invalid_points;
      continue;
    }
    inward.normalize();
    const auto v1 = field.sample(plane.to_world(boundary[i] + inward * step), t_ms);
    const auto v2 = field.sample(plane.to_world(boundary[i] + inward * 2.0 * step), t_ms);
    if (!v1 || !v2) {
      ++out.invalid_points;
      continue;
    }
    const double a1 = v1->dot(plane.frame.tangent);
    const double a2 = v2->dot(plane.frame.tangent);
    // slope at the wall of the quadratic through (0,0), (h,a1), (2h,a2); (m/s)/mm -> 1/s
    const double gradient = (4.0 * a1 - a2) / (2.0 * step) * 1000.0;
    const double value = mu * gradient;
    out.values[i] = value;
    sum += value;
    out.max = valid == 0 ? value : std::max(out.max, value);
    ++valid;
  }
  out.mean = valid > 0 ? sum / valid : kNaN;
  return out;
}

double foot_time(const FlowWaveform& w) {
  const std::size_t n = w.flow.size();
  if (n < 3 || w.times.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "waveform needs at least 3 matching (t, Q) samples");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(w.times[i] > w.times[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "waveform times must be strictly increasing");
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(w.flow.begin(), w.flow.end());
  const double base = *lo_it, peak = *hi_it;
  if (!(peak - base > 1e-12 * std::max(1.0, std::abs(peak)))) {
    throw Error(ErrorCode::FlatWaveform, "waveform has no upstroke");
  }
  const bool periodic = w.cycle_length > 0.0;
  const double l20 = base + 0.2 * (peak - base);
  const double l80 = base + 0.8 * (peak - base);

  // Walk backwards from the peak, unwrapping time across the cycle boundary.
  const long ipeak = static_cast<long>(hi_it - w.flow.begin());
  auto sample = [&](long k) {
    const long m = static_cast<long>(n);
    const long idx = ((k % m) + m) % m;
    const double shift = periodic ? std::floor(static_cast<double>(k) / m) * w.cycle_length : 0.0;
    return std::pair<double, double>{w.times[static_cast<std::size_t>(idx)] + shift,
                                     w.flow[static_cast<std::size_t>(idx)]};
  };
  const long limit = periodic ? ipeak - static_cast<long>(n) : 0;
  std::optional<double> t80, t20;
  std::vector<std::pair<double, double>> interior;
  for (long k = ipeak; k > limit; --k) {
    const auto [tb, qb] = sample(k);
    const auto [ta, qa] = sample(k - 1);
    if (!t80 && qa < l80) t80 = ta + (l80 - qa) / (qb - qa) * (tb - ta);
    if (t80 && qa < l20) {
      t20 = ta + (l20 - qa) / (qb - qa) * (tb - ta);
      break;
    }
    if (t80 && qa <= l80) interior.emplace_back(ta, qa);
  }
  if (!t20 || !t80) throw Error(ErrorCode::FlatWaveform, "no complete 20-80% upstroke found");

  std::vector<std::pair<double, double>> pts{{*t20, l20}, {*t80, l80}};
  pts.insert(pts.end(), interior.begin(), interior.end());
  double st = 0, sq = 0, stt = 0, stq = 0;
  for (const auto& [t, q] : pts) {
    st += t;
    sq += q;
    stt += t * t;
    stq += t * q;
  }
  const double m = static_cast<double>(pts.size());
  const double denom = m * stt - st * st;
  if (std::abs(denom) < 1e-300) throw Error(ErrorCode::FlatWaveform, "degenerate upstroke");
  const double slope = (m * stq - st * sq) / denom;
  const double intercept = (sq - slope * st) / m;
  if (!(slope > 0.0)) throw Error(ErrorCode::FlatWaveform, "upstroke is not rising");
  return (base - intercept) / slope;
}

PwvResult pwv(const std::vector<FlowWaveform>& waveforms) {
  if (waveforms.size() < 3) throw Error(ErrorCode::InvalidArgument, "pwv needs at least 3 waveforms");
  PwvResult out;
  for (const auto& w : waveforms) out.foot_times.push_back(foot_time(w));
  // Keep periodic feet on the same cycle as the first one.
  const double cycle = waveforms.front().cycle_length;
  if (cycle > 0.0) {
    for (double& f : out.foot_times) f -= cycle * std::round((f - out.foot_times.front()) / cycle);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(waveforms.size());
  for (std::size_t i = 0; i < waveforms.size(); ++i) {
    const double x = waveforms[i].arc_position, y = out.foot_times[i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = m * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) throw Error(ErrorCode::InvalidArgument, "arc positions must be distinct");
  const double slope = (m * sxy - sx * sy) / denom;  // ms per mm
  // Tolerance relative to the spread of the inputs so a pure time shift stays exact.
  double tscale = 0.0;
  for (double f : out.foot_times) tscale = std::max(tscale, std::abs(f));
  const double xspan = std::sqrt(denom) / m;
  if (std::abs(slope) * xspan <= 1e-9 * std::max(1.0, tscale)) {
    out.value = std::numeric_limits<double>::infinity();
    out.measurable = false;
    return out;
  }
  out.value = 1.0 / slope;  // mm/ms == m/s
  out.measurable = true;
  return out;
}

FlowWaveform flow_waveform(const CrossSectionPlane& plane, const ClosedSplineContour& lumen,
                           const VelocityField& field) {
  FlowWaveform w;
  w.arc_position = plane.arc_position;
  w.cycle_length = field.cycle_length();
  const PlaneGrid grid = plane.grid();
  const Mask2D mask = contour_to_mask(lumen, grid);
  std::vector<Vec3> points;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      if (mask.at(i, j)) points.push_back(plane.to_world(grid.pixel_center(i, j)));
  for (double t : field.timepoints()) {
    double q = 0.0;
    std::size_t sampled = 0;
    for (const Vec3& p : points) {
      if (const auto v = field.sample(p, t)) {
        q += v->dot(plane.frame.tangent);
        ++sampled;
      }
    }
    if (sampled == 0) throw Error(ErrorCode::NoOverlap, "lumen pixels do not overlap the velocity field");
    w.times.push_back(t);
    w.flow.push_back(q * grid.pixel_area());
  }
  return w;
}

double peak_frame_time(const VelocityField& field) {
  const std::size_t n = voxel_count(field.dims());
  int best = 0;
  double best_sum = -1.0;
  for (int f = 0; f < field.frame_count(); ++f) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += field.at(i, f).norm();
    if (sum > best_sum) {
      best_sum = sum;
      best = f;
    }
  }
  return field.timepoints()[static_cast<std::size_t>(best)];
}

BiomarkerReport compute_biomarkers(const std::vector<CrossSectionPlane>& planes,
                                   const std::vector<SliceAnnotation>& annotations,
                                   const VelocityField* flow, const BiomarkerParams& params) {
  std::map<int, const CrossSectionPlane*> by_id;
  for (const auto& p : planes) by_id[p.id] = &p;

  BiomarkerReport report;
  if (flow) report.flow_time = params.flow_time ? *params.flow_time : peak_frame_time(*flow);

  struct Diameters {
    int plane_id;
    double arc;
    double caliper;
    double equivalent;
  };
  std::vector<Diameters> diameters;
  std::map<int, std::pair<const CrossSectionPlane*, const ClosedSplineContour*>> lumen_by_plane;

  for (const auto& a : annotations) {
    if (!a.usable) continue;
    const auto it = by_id.find(a.plane_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::ValidationFailed,
                  "annotation references unknown plane " + std::to_string(a.plane_id));
    }
    const CrossSectionPlane& plane = *it->second;
    BiomarkerRow row;
    row.plane_id = a.plane_id;
    row.arc_position = plane.arc_position;
    row.timepoint = a.timepoint;
    if (a.lumen) {
      row.lumen_area = contour_area(*a.lumen);
      diameters.push_back({a.plane_id, plane.arc_position, minimal_caliper_diameter(*a.lumen),
                           equivalent_diameter(*a.lumen)});
      lumen_by_plane.try_emplace(a.plane_id, &plane, &*a.lumen);
    }
    if (a.lumen && a.wall) {
      try {
        VwtProfile prof = vwt_profile(*a.lumen, *a.wall, params.n_rays, a.plane_id);
        row.vwt_mean = prof.mean;
        row.vwt_max = prof.max;
        report.profiles.push_back(std::move(prof));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::RayMiss) throw;
      }
    }
    if (flow && a.lumen) {
      const double t = a.timepoint.value_or(*report.flow_time);
      try {
        row.flow_rate = flow_rate(plane, *a.lumen, *flow, t);
        const WssResult w = wss(plane, *a.lumen, *flow, t, params.mu);
        if (std::isfinite(w.mean)) {
          row.wss_mean = w.mean;
          row.wss_max = w.max;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoOverlap) throw;
      }
    }
    report.rows.push_back(row);
  }

  if (!diameters.empty()) {
    const auto narrow = std::min_element(diameters.begin(), diameters.end(),
                                         [](const Diameters& a, const Diameters& b) {
                                           return a.caliper < b.caliper;
                                         });
    StenosisSummary s;
    s.plane_id = narrow->plane_id;
    s.arc_position = narrow->arc;
    s.d_stenosis = narrow->caliper;
    s.d_stenosis_equivalent = narrow->equivalent;
    if (params.reference_diameter) {
      s.d_reference = s.d_reference_equivalent = *params.reference_diameter;
    } else {
      double far = diameters.front().arc;
      for (const auto& d : diameters) far = std::max(far, d.arc);
      std::vector<double> cal, eq;
      for (const auto& d : diameters) {
        if (d.arc >= far - params.reference_window_mm) {
          cal.push_back(d.caliper);
          eq.push_back(d.equivalent);
        }
      }
      s.d_reference = median(cal);
      s.d_reference_equivalent = median(eq);
    }
    if (s.d_reference > 0.0 && s.d_reference_equivalent > 0.0) {
      s.percent = stenosis_degree(s.d_stenosis, s.d_reference);
      s.percent_equivalent = stenosis_degree(s.d_stenosis_equivalent, s.d_reference_equivalent);
      report.stenosis = s;
    }
  }

  if (flow && lumen_by_plane.size() >= 3) {
    std::vector<FlowWaveform> waves;
    for (const auto& [id, entry] : lumen_by_plane) {
      try {
        waves.push_back(flow_waveform(*entry.first, *entry.second, *flow));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoOverlap) throw;
      }
    }
    if (waves.size() >= 3) {
      try {
        report.pwv = pwv(waves);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::FlatWaveform && e.code() != ErrorCode::InvalidArgument) throw;
      }
    }
  }
  return report;
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

Json opt(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

}  // namespace

std::string report_to_csv(const BiomarkerReport& report) {
  std::ostringstream os;
  os << "plane_id,arc_position,timepoint,lumen_area,vwt_mean,vwt_max,flow_rate,wss_mean,wss_max\n";
  for (const auto& r : report.rows) {
    os << r.plane_id << ',' << cell(r.arc_position) << ',' << cell(r.timepoint) << ','
       << cell(r.lumen_area) << ',' << cell(r.vwt_mean) << ',' << cell(r.vwt_max) << ','
       << cell(r.flow_rate) << ',' << cell(r.wss_mean) << ',' << cell(r.wss_max) << '\n';
  }
  return os.str();
}

std::string report_to_json(const BiomarkerReport& report) {
  Json j;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"plane_id", r.plane_id},
                    {"arc_position", r.arc_position},
                    {"timepoint", opt(r.timepoint)},
                    {"lumen_area", opt(r.lumen_area)},
                    {"vwt_mean", opt(r.vwt_mean)},
                    {"vwt_max", opt(r.vwt_max)},
                    {"flow_rate", opt(r.flow_rate)},
                    {"wss_mean", opt(r.wss_mean)},
                    {"wss_max", opt(r.wss_max)}});
  }
  j["rows"] = rows;
  Json profiles = Json::array();
  for (const auto& p : report.profiles) {
    Json thickness = Json::array();
    for (double t : p.thickness) thickness.push_back(std::isfinite(t) ? Json(t) : Json(nullptr));
    profiles.push_back({{"plane_id", p.plane_id},
                        {"center", {p.center.x(), p.center.y()}},
                        {"angles", p.angles},
                        {"thickness", thickness},
                        {"mean", p.mean},
                        {"max", p.max},
                        {"invalid_rays", p.invalid_rays}});
  }
  j["vwt_profiles"] = profiles;
  if (report.stenosis) {
    const auto& s = *report.stenosis;
    j["stenosis"] = {{"plane_id", s.plane_id},
                     {"arc_position", s.arc_position},
                     {"d_stenosis", s.d_stenosis},
                     {"d_stenosis_equivalent", s.d_stenosis_equivalent},
                     {"d_reference", s.d_reference},
                     {"d_reference_equivalent", s.d_reference_equivalent},
                     {"percent", s.percent},
                     {"percent_equivalent", s.percent_equivalent},
                     {"convention", "NASCET"}};
  } else {
    j["stenosis"] = nullptr;
  }
  if (report.pwv) {
    j["pwv"] = {{"value", report.pwv->measurable ? Json(report.pwv->value) : Json(nullptr)},
                {"measurable", report.pwv->measurable},
                {"status", report.pwv->measurable ? "ok" : "NotMeasurable"},
                {"foot_times", report.pwv->foot_times},
                {"method", report.pwv->method}};
  } else {
    j["pwv"] = nullptr;
  }
  j["flow_time"] = opt(report.flow_time);
  return canonical_dump(j);
}

}  // namespace carotid
