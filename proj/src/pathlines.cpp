#include "carotid/pathlines.hpp"

#include "carotid/error.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <thread>

namespace carotid {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::mask_exit: return "mask_exit";
    case Termination::domain_exit: return "domain_exit";
    case Termination::max_duration: return "max_duration";
    case Termination::stagnation: return "stagnation";
  }
  return "max_duration";
}

Termination termination_from_string(std::string_view name) {
  if (name == "mask_exit") return Termination::mask_exit;
  if (name == "domain_exit") return Termination::domain_exit;
  if (name == "max_duration") return Termination::max_duration;
  if (name == "stagnation") return Termination::stagnation;
  throw Error(ErrorCode::InvalidArgument, "unknown termination '" + std::string(name) + "'");
}

namespace {

double radical_inverse(unsigned index, unsigned base) {
  double result = 0.0, f = 1.0 / base;
  while (index > 0) {
    result += f * (index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace

std::vector<Vec3> seed_from_cross_section(const CrossSectionPlane& plane,
                                          const ClosedSplineContour* lumen, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "seed count must be at least 1");
  Polyline2 poly;
  Vec2 lo, hi, centroid;
  if (lumen) {
    poly = evaluate_contour(*lumen, kDenseSamples);
    if (std::abs(polygon_signed_area(poly)) < 1e-12) {
      throw Error(ErrorCode::EmptyLumen, "lumen contour encloses no area");
    }
    centroid = polygon_centroid(poly);
    lo = hi = poly.front();
    for (const Vec2& p : poly) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  } else {
    const double r = plane.fov / 4.0;
    centroid = Vec2::Zero();
    lo = Vec2(-r, -r);
    hi = Vec2(r, r);
  }
  if (n == 1) return {plane.to_world(centroid)};

  const double r2 = std::pow(plane.fov / 4.0, 2);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  const unsigned cap = 1000u * static_cast<unsigned>(n) + 1000u;
  for (unsigned k = 1; out.size() < static_cast<std::size_t>(n); ++k) {
    if (k > cap) throw Error(ErrorCode::EmptyLumen, "lumen too small to place seeds");
    const Vec2 p(lo.x() + (hi.x() - lo.x()) * radical_inverse(k, 2),
                 lo.y() + (hi.y() - lo.y()) * radical_inverse(k, 3));
    const bool inside = lumen ? point_in_polygon(poly, p) : p.squaredNorm() <= r2;
    if (inside) out.push_back(plane.to_world(p));
  }
  return out;
}

double default_dt(const VelocityField& field) {
  const double venc = field.venc();
  if (!(venc > 0.0)) return 1.0;
  return 0.5 * field.affine().spacing().minCoeff() / venc;
}

namespace {

Pathline trace_one(const VelocityField& field, const Vec3& seed, double t0, double duration,
                   double dt, const BinaryMask* mask, const TraceParams& params) {
  Pathline line;
  line.start_time = t0;
  auto inside_mask = [&](const Vec3& p) {
    if (!mask) return true;
    const auto m = mask->sample(p);
    return m && *m;
  };
  if (!inside_mask(seed)) {
    line.termination = Termination::mask_exit;
    return line;
  }
  auto v0 = field.sample(seed, t0);
  if (!v0) {
    line.termination = Termination::domain_exit;
    return line;
  }
  line.vertices.push_back({seed, t0, v0->norm()});
  int slow = v0->norm() < params.stagnation_speed ? 1 : 0;

  const double t_end = t0 + duration;
  Vec3 p = seed;
  double t = t0;
  Vec3 k1 = *v0;
  for (std::size_t step = 1;; ++step) {
    if (slow >= params.stagnation_steps) {
      line.termination = Termination::stagnation;
      return line;
    }
    // step counting instead of accumulating t keeps long traces drift-free
    const double t_next = std::min(t0 + static_cast<double>(step) * dt, t_end);
    const double h = t_next - t;
    const auto k2 = field.sample(p + 0.5 * h * k1, t + 0.5 * h);
    const auto k3 = k2 ? field.sample(p + 0.5 * h * *k2, t + 0.5 * h) : std::nullopt;
    const auto k4 = k3 ? field.sample(p + h * *k3, t + h) : std::nullopt;
    if (!k4) {
      line.termination = Termination::domain_exit;
      return line;
    }
    const Vec3 next = p + (h / 6.0) * (k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
    if (!inside_mask(next)) {
      line.termination = Termination::mask_exit;
      return line;
    }
    const auto v = field.sample(next, t_next);
    if (!v) {
      line.termination = Termination::domain_exit;
      return line;
    }
    const double speed = v->norm();
    line.vertices.push_back({next, t_next, speed});
    slow = speed < params.stagnation_speed ? slow + 1 : 0;
    p = next;
    t = t_next;
    k1 = *v;
    if (t_next >= t_end) {
      line.termination = slow >= params.stagnation_steps ? Termination::stagnation : Termination::max_duration;
      return line;
    }
  }
}


}  // namespace

PathlineSet trace_emitter(const VelocityField& field, const std::vector<Vec3>& seeds,
                          const EmitterSpec& emitter, double duration, double dt,
                          const BinaryMask* mask, const TraceParams& params) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidStep, "dt must be positive");
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  std::vector<double> starts = emitter.start_times;
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

  PathlineSet set;
  set.emitter = emitter;
  set.emitter.start_times = starts;
  set.emitter.seed_count = static_cast<int>(seeds.size());
  set.dt = dt;
  set.mask_applied = mask != nullptr;
  set.lines.resize(starts.size() * seeds.size());
  detail::parallel_for(set.lines.size(), params.threads, [&](std::size_t i) {
    const std::size_t s = i % seeds.size();
    Pathline line = trace_one(field, seeds[s], starts[i / seeds.size()], duration, dt, mask, params);
    line.seed_index = static_cast<int>(s);
    set.lines[i] = std::move(line);
  });
  return set;
}

PathlineSet trace(const VelocityField& field, const std::vector<Vec3>& seeds, double t0,
                  double duration, double dt, const BinaryMask* mask, const TraceParams& params) {
  EmitterSpec emitter;
  emitter.start_times = {t0};
  return trace_emitter(field, seeds, emitter, duration, dt, mask, params);
}

PathlineStats pathline_stats(const PathlineSet& set, double v_threshold) {
  PathlineStats s;
  std::size_t above = 0;
  for (const auto& line : set.lines) {
    double m = 0.0;
    for (const auto& v : line.vertices) {
      m = std::max(m, v.speed);
      above += v.speed > v_threshold;
      ++s.vertex_count;
    }
    s.per_line_max.push_back(m);
    s.max_speed = std::max(s.max_speed, m);
  }
  s.fraction_above = s.vertex_count ? static_cast<double>(above) / static_cast<double>(s.vertex_count) : 0.0;
  return s;
}

namespace {

constexpr char kMagic[8] = {'C', 'P', 'L', 'N', '\0', '\1', '\0', '\0'};

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void pad_to(std::string& out, std::size_t align) {
  while (out.size() % align) out.push_back('\0');
}

class Reader {
public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw Error(ErrorCode::CorruptHeader, "pathline binary truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  void align(std::size_t a) {
    while (pos_ % a) ++pos_;
  }
  [[nodiscard]] std::size_t remaining() const { return pos_ <= bytes_.size() ? bytes_.size() - pos_ : 0; }
  [[nodiscard]] std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::CorruptHeader, "pathline binary truncated");
    const auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }

private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string pathlines_to_binary(const PathlineSet& set) {
  std::string out(kMagic, sizeof kMagic);
  std::uint32_t total = 0;
  for (const auto& l : set.lines) total += static_cast<std::uint32_t>(l.vertices.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.lines.size()));
  put<std::uint32_t>(out, total);
  put<double>(out, set.dt);
  put<std::uint32_t>(out, set.mask_applied ? 1u : 0u);
  put<std::int32_t>(out, set.emitter.plane_id);
  std::uint32_t offset = 0;
  put<std::uint32_t>(out, 0);
  for (const auto& l : set.lines) {
    offset += static_cast<std::uint32_t>(l.vertices.size());
    put<std::uint32_t>(out, offset);
  }
  for (const auto& l : set.lines) out.push_back(static_cast<char>(l.termination));
  pad_to(out, 4);
  for (const auto& l : set.lines) put<std::int32_t>(out, l.seed_index);
  pad_to(out, 8);
  for (const auto& l : set.lines) put<double>(out, l.start_time);
  for (const auto& l : set.lines)
    for (const auto& v : l.vertices) {
      put<float>(out, static_cast<float>(v.position.x()));
      put<float>(out, static_cast<float>(v.position.y()));
      put<float>(out, static_cast<float>(v.position.z()));
      put<float>(out, static_cast<float>(v.t));
      put<float>(out, static_cast<float>(v.speed));
    }
  return out;
}

PathlineSet pathlines_from_binary(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(8) != std::string_view(kMagic, sizeof kMagic)) {
    throw Error(ErrorCode::UnsupportedFormat, "not a CPLN v1 pathline file");
  }
  const auto lines = r.get<std::uint32_t>();
  const auto total = r.get<std::uint32_t>();
  PathlineSet set;
  set.dt = r.get<double>();
  set.mask_applied = (r.get<std::uint32_t>() & 1u) != 0;
  set.emitter.plane_id = r.get<std::int32_t>();
  if (static_cast<std::uint64_t>(lines) * 4 > r.remaining()) {
    throw Error(ErrorCode::CorruptHeader, "line count exceeds file size");
  }
  std::vector<std::uint32_t> offsets(lines + 1);
  for (auto& o : offsets) o = r.get<std::uint32_t>();
  if (offsets.front() != 0 || offsets.back() != total || !std::is_sorted(offsets.begin(), offsets.end())) {
    throw Error(ErrorCode::CorruptHeader, "inconsistent line offsets");
  }
  set.lines.resize(lines);
  for (auto& l : set.lines) {
    const auto code = r.get<std::uint8_t>();
    if (code > 3) throw Error(ErrorCode::CorruptHeader, "unknown termination code");
    l.termination = static_cast<Termination>(code);
  }
  r.align(4);
  for (auto& l : set.lines) l.seed_index = r.get<std::int32_t>();
  r.align(8);
  for (auto& l : set.lines) l.start_time = r.get<double>();
  if (static_cast<std::uint64_t>(total) * 20 != r.remaining()) {
    throw Error(ErrorCode::CorruptHeader, "vertex payload size mismatch");
  }
  std::set<double> starts;
  int max_seed = -1;
  for (std::uint32_t i = 0; i < lines; ++i) {
    auto& l = set.lines[i];
    for (std::uint32_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      PathlineVertex v;
      const float x = r.get<float>(), y = r.get<float>(), z = r.get<float>();
      v.position = Vec3(x, y, z);
      v.t = r.get<float>();
      v.speed = r.get<float>();
      l.vertices.push_back(v);
    }
    starts.insert(l.start_time);
    max_seed = std::max(max_seed, l.seed_index);
  }
  set.emitter.start_times.assign(starts.begin(), starts.end());
  set.emitter.seed_count = max_seed + 1;
  return set;
}

Json to_json(const PathlineSet& set) {
  Json lines = Json::array();
  for (const auto& l : set.lines) {
    std::vector<double> pos, times, speeds;
    for (const auto& v : l.vertices) {
      pos.insert(pos.end(), {v.position.x(), v.position.y(), v.position.z()});
      times.push_back(v.t);
      speeds.push_back(v.speed);
    }
    lines.push_back({{"seed_index", l.seed_index},
                     {"start_time", l.start_time},
                     {"termination", std::string(to_string(l.termination))},
                     {"positions", pos},
                     {"times", times},
                     {"speeds", speeds}});
  }
  return {{"dt", set.dt},
          {"mask_applied", set.mask_applied},
          {"emitter",
           {{"plane_id", set.emitter.plane_id},
            {"seed_count", set.emitter.seed_count},
            {"seed_layout", set.emitter.seed_layout},
            {"start_times", set.emitter.start_times}}},
          {"lines", lines}};
}

Json to_json(const PathlineStats& s) {
  return {{"max_speed", s.max_speed},
          {"fraction_above", s.fraction_above},
          {"vertex_count", s.vertex_count},
          {"per_line_max", s.per_line_max}};
}

}  // namespace carotid
