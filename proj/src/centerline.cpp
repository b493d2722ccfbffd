#include "carotid/centerline.hpp"

#include "carotid/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace carotid {

std::string_view to_string(Branch branch) {
  switch (branch) {
    case Branch::CCA: return "CCA";
    case Branch::ICA: return "ICA";
    case Branch::ECA: return "ECA";
  }
  return "ICA";
}

Branch branch_from_string(std::string_view name) {
  if (name == "CCA") return Branch::CCA;
  if (name == "ICA") return Branch::ICA;
  if (name == "ECA") return Branch::ECA;
  throw Error(ErrorCode::InvalidArgument, "unknown branch label '" + std::string(name) + "'");
}

Centerline::Centerline(Polyline3 points, Branch branch)
    : points_(std::move(points)), branch_(branch) {
  if (points_.size() < 2) {
    throw Error(ErrorCode::DegeneratePolyline, "centerline needs at least 2 points");
  }
  arc_lengths_.resize(points_.size());
  arc_lengths_[0] = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double step = (points_[i] - points_[i - 1]).norm();
    if (!(step > 0.0)) {
      throw Error(ErrorCode::DegeneratePolyline, "centerline has coincident consecutive points");
    }
    arc_lengths_[i] = arc_lengths_[i - 1] + step;
  }
}

Centerline::Location Centerline::locate(double arc) const {
  const double s = std::clamp(arc, 0.0, length());
  auto it = std::upper_bound(arc_lengths_.begin(), arc_lengths_.end(), s);
  std::size_t seg = it == arc_lengths_.begin() ? 0 : static_cast<std::size_t>(it - arc_lengths_.begin()) - 1;
  seg = std::min(seg, points_.size() - 2);
  const double span = arc_lengths_[seg + 1] - arc_lengths_[seg];
  return {seg, std::clamp((s - arc_lengths_[seg]) / span, 0.0, 1.0)};
}

Vec3 Centerline::point_at(double arc) const {
  const Location loc = locate(arc);
  if (loc.fraction == 0.0) return points_[loc.segment];
  if (loc.fraction == 1.0) return points_[loc.segment + 1];
  return points_[loc.segment] + (points_[loc.segment + 1] - points_[loc.segment]) * loc.fraction;
}

Centerline resample_arclength(const Polyline3& input, double spacing, Branch branch) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  Polyline3 pts;
  pts.reserve(input.size());
  for (const Vec3& p : input) {
    if (pts.empty() || (p - pts.back()).norm() > 0.0) pts.push_back(p);
  }
  if (pts.size() < 2) {
    throw Error(ErrorCode::DegeneratePolyline, "polyline has fewer than 2 distinct points");
  }
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = cum.back();
  // Positions that land within this tolerance of a vertex take the vertex itself.
  const double snap = 1e-9 * std::max(1.0, spacing);

  Polyline3 out;
  std::size_t seg = 0;
  for (long k = 0;; ++k) {
    double s = static_cast<double>(k) * spacing;
    if (s > total - snap) break;
    while (seg + 2 < pts.size() && cum[seg + 1] <= s) ++seg;
    if (std::abs(s - cum[seg]) <= snap) {
      out.push_back(pts[seg]);
    } else if (std::abs(cum[seg + 1] - s) <= snap) {
      out.push_back(pts[seg + 1]);
    } else {
      const double f = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
      out.push_back(pts[seg] + (pts[seg + 1] - pts[seg]) * f);
    }
  }
  out.push_back(pts.back());
  return Centerline(std::move(out), branch);
}

Vec3 default_initial_normal(const Vec3& tangent) {
  const Vec3 t = tangent.normalized();
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(t[a]) < std::abs(t[axis])) axis = a;
  }
  Vec3 e = Vec3::Zero();
  e[axis] = 1.0;
  return (e - t * t.dot(e)).normalized();
}

namespace {

std::vector<Vec3> forward_tangents(const Polyline3& p) {
  std::vector<Vec3> t(p.size());
  for (std::size_t i = 0; i + 1 < p.size(); ++i) t[i] = (p[i + 1] - p[i]).normalized();
  t.back() = t[p.size() - 2];
  return t;
}

Frame make_frame(const Vec3& tangent, const Vec3& approx_normal) {
  Frame f;
  f.tangent = tangent;
  f.normal = (approx_normal - tangent * tangent.dot(approx_normal)).normalized();
  f.binormal = f.tangent.cross(f.normal);
  return f;
}

}  // namespace

std::vector<Frame> rmf_frames(const Centerline& centerline, const Vec3& initial_normal) {
  const Polyline3& x = centerline.points();
  const std::vector<Vec3> t = forward_tangents(x);

  const double n0 = initial_normal.norm();
  if (!(n0 > 0.0) || initial_normal.cross(t[0]).norm() < 1e-6 * n0) {
    throw Error(ErrorCode::ParallelInitialNormal, "initial normal is parallel to the first tangent");
  }

  std::vector<Frame> frames;
  frames.reserve(x.size());
  frames.push_back(make_frame(t[0], initial_normal / n0));

  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const Vec3& r = frames.back().normal;
    const Vec3 v1 = x[i + 1] - x[i];
    const double c1 = v1.dot(v1);
    const Vec3 r_l = r - (2.0 / c1) * v1.dot(r) * v1;
    const Vec3 t_l = t[i] - (2.0 / c1) * v1.dot(t[i]) * v1;
    const Vec3 v2 = t[i + 1] - t_l;
    const double c2 = v2.dot(v2);
    const Vec3 r_next = c2 > 1e-30 ? Vec3(r_l - (2.0 / c2) * v2.dot(r_l) * v2) : r_l;
    frames.push_back(make_frame(t[i + 1], r_next));
  }
  return frames;
}

std::vector<CrossSectionPlane> cross_sections(const Centerline& centerline, double spacing,
                                              double fov, double in_plane_spacing, int first_id,
                                              std::optional<Vec3> initial_normal) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "plane spacing must be positive");
  if (!(fov > 0.0) || !(in_plane_spacing > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "fov and in-plane spacing must be positive");
  }
  const Polyline3& pts = centerline.points();
  const Vec3 first_tangent = (pts[1] - pts[0]).normalized();
  const auto frames =
      rmf_frames(centerline, initial_normal.value_or(default_initial_normal(first_tangent)));

  const double total = centerline.length();
  const long count = static_cast<long>(std::floor(total / spacing + 1e-9)) + 1;
  std::vector<CrossSectionPlane> planes;
  planes.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) {
    const double arc = std::min(static_cast<double>(k) * spacing, total);
    const auto loc = centerline.locate(arc);
    CrossSectionPlane plane;
    plane.id = first_id + static_cast<int>(k);
    plane.arc_position = static_cast<double>(k) * spacing;
    plane.center = centerline.point_at(arc);
    plane.frame = frames[loc.segment];
    plane.fov = fov;
    plane.in_plane_spacing = in_plane_spacing;
    planes.push_back(plane);
  }
  return planes;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared 1D distance transform (Felzenszwalb & Huttenlocher) with sample spacing h.
void edt_1d(const double* f, double* d, int n, double h, std::vector<int>& v,
            std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double fq = f[q] + (q * h) * (q * h);
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      const double fp = f[p] + (p * h) * (p * h);
      const double s = (fq - fp) / (2.0 * h * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    if (k == 0) {
      z[0] = -kInf;
    } else {
      const int p = v[static_cast<std::size_t>(k - 1)];
      const double fp = f[p] + (p * h) * (p * h);
      z[static_cast<std::size_t>(k)] = (fq - fp) / (2.0 * h * (q - p));
    }
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q * h) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    d[q] = (q - p) * h * (q - p) * h + f[p];
  }
}

}  // namespace

std::vector<double> distance_transform(const BinaryMask& mask) {
  // One voxel of background border models "outside the grid is background".
  const Dims& in = mask.dims();
  const Dims dims{in[0] + 2, in[1] + 2, in[2] + 2};
  const Vec3 h = mask.affine().spacing();
  const std::size_t sx = 1, sy = static_cast<std::size_t>(dims[0]),
                    sz = sy * static_cast<std::size_t>(dims[1]);
  std::vector<double> g(voxel_count(dims), 0.0);
  for (int k = 0; k < in[2]; ++k)
    for (int j = 0; j < in[1]; ++j)
      for (int i = 0; i < in[0]; ++i)
        if (mask.at(i, j, k)) g[(i + 1) * sx + (j + 1) * sy + (k + 1) * sz] = kInf;

  std::vector<int> v;
  std::vector<double> z;
  const int max_n = std::max({dims[0], dims[1], dims[2]});
  std::vector<double> line(static_cast<std::size_t>(max_n)), out(static_cast<std::size_t>(max_n));
  const std::size_t strides[3] = {sx, sy, sz};
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int p2 = 0; p2 < dims[a2]; ++p2) {
      for (int p1 = 0; p1 < dims[a1]; ++p1) {
        const std::size_t base = p1 * strides[a1] + p2 * strides[a2];
        for (int q = 0; q < dims[axis]; ++q) line[q] = g[base + q * strides[axis]];
        edt_1d(line.data(), out.data(), dims[axis], h[axis], v, z);
        for (int q = 0; q < dims[axis]; ++q) g[base + q * strides[axis]] = out[q];
      }
    }
  }

  std::vector<double> dt(voxel_count(in));
  for (int k = 0; k < in[2]; ++k)
    for (int j = 0; j < in[1]; ++j)
      for (int i = 0; i < in[0]; ++i)
        dt[mask.linear_index(i, j, k)] =
            std::sqrt(g[(i + 1) * sx + (j + 1) * sy + (k + 1) * sz]);
  return dt;
}

namespace {

std::array<int, 3> seed_voxel(const BinaryMask& mask, const Vec3& world, const char* which) {
  const Vec3 v = mask.affine().world_to_voxel(world);
  std::array<int, 3> idx{};
  for (int a = 0; a < 3; ++a) idx[a] = static_cast<int>(std::lround(v[a]));
  if (!mask.contains(idx[0], idx[1], idx[2]) || !mask.at(idx[0], idx[1], idx[2])) {
    throw Error(ErrorCode::SeedOutsideMask, std::string(which) + " seed is not a foreground voxel");
  }
  return idx;
}

}  // namespace

Polyline3 extract_centerline_path(const BinaryMask& mask, const Vec3& start, const Vec3& end) {
  const auto s = seed_voxel(mask, start, "start");
  const auto e = seed_voxel(mask, end, "end");
  const Dims& d = mask.dims();
  const std::vector<double> dt = distance_transform(mask);
  const Eigen::Matrix3d lin = mask.affine().linear();

  struct Offset {
    int di, dj, dk;
    double length;
  };
  std::vector<Offset> offsets;
  for (int dk = -1; dk <= 1; ++dk)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        offsets.push_back({di, dj, dk, (lin * Vec3(di, dj, dk)).norm()});
      }

  const std::size_t n = voxel_count(d);
  std::vector<double> dist(n, kInf);
  std::vector<std::int64_t> prev(n, -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  const std::size_t src = mask.linear_index(s[0], s[1], s[2]);
  const std::size_t dst = mask.linear_index(e[0], e[1], e[2]);
  dist[src] = 0.0;
  heap.push({0.0, src});
  const std::size_t nx = static_cast<std::size_t>(d[0]), nxy = nx * static_cast<std::size_t>(d[1]);
  while (!heap.empty()) {
    const auto [cost, cur] = heap.top();
    heap.pop();
    if (cost > dist[cur]) continue;
    if (cur == dst) break;
    const int i = static_cast<int>(cur % nx);
    const int j = static_cast<int>((cur / nx) % static_cast<std::size_t>(d[1]));
    const int k = static_cast<int>(cur / nxy);
    for (const Offset& o : offsets) {
      const int ni = i + o.di, nj = j + o.dj, nk = k + o.dk;
      if (!mask.contains(ni, nj, nk) || !mask.at(ni, nj, nk)) continue;
      const std::size_t next = mask.linear_index(ni, nj, nk);
      const double w = 1.0 + dt[next];
      const double c = cost + o.length / (w * w);
      if (c < dist[next]) {
        dist[next] = c;
        prev[next] = static_cast<std::int64_t>(cur);
        heap.push({c, next});
      }
    }
  }
  if (dist[dst] == kInf) {
    throw Error(ErrorCode::Disconnected, "start and end seeds are not connected in the mask");
  }

  Polyline3 path;
  for (std::int64_t cur = static_cast<std::int64_t>(dst); cur >= 0; cur = prev[cur]) {
    const auto u = static_cast<std::size_t>(cur);
    const Vec3 voxel(static_cast<double>(u % nx), static_cast<double>((u / nx) % d[1]),
                     static_cast<double>(u / nxy));
    path.push_back(mask.affine().voxel_to_world(voxel));
  }
  std::reverse(path.begin(), path.end());
  return path;
}

Centerline extract_centerline(const BinaryMask& mask, const Vec3& start, const Vec3& end,
                              Branch branch) {
  const Polyline3 raw = extract_centerline_path(mask, start, end);
  if (raw.size() < 2) {
    throw Error(ErrorCode::DegeneratePolyline, "start and end seeds map to the same voxel");
  }
  const long n = static_cast<long>(raw.size());
  Polyline3 smooth;
  smooth.reserve(raw.size());
  for (long i = 0; i < n; ++i) {
    const long r = std::min({2L, i, n - 1 - i});
    Vec3 acc = Vec3::Zero();
    for (long k = i - r; k <= i + r; ++k) acc += raw[static_cast<std::size_t>(k)];
    const Vec3 p = acc / static_cast<double>(2 * r + 1);
    if (smooth.empty() || (p - smooth.back()).norm() > 1e-9) smooth.push_back(p);
  }
  if (smooth.size() < 2) smooth = {raw.front(), raw.back()};
  smooth.front() = raw.front();
  smooth.back() = raw.back();
  return Centerline(std::move(smooth), branch);
}

std::vector<Vec3> curved_mpr_coordinates(const Centerline& centerline, double width,
                                         double spacing, const Vec3& initial_normal,
                                         PlaneGrid& grid) {
  if (!(width > 0.0) || !(spacing > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "curved MPR width and spacing must be positive");
  }
  const auto frames = rmf_frames(centerline, initial_normal);
  grid.spacing = spacing;
  grid.nx = std::max(1, static_cast<int>(std::lround(width / spacing)));
  grid.ny = static_cast<int>(std::floor(centerline.length() / spacing + 1e-9)) + 1;

  std::vector<Vec3> coords;
  coords.reserve(grid.size());
  for (int r = 0; r < grid.ny; ++r) {
    const double arc = std::min(r * spacing, centerline.length());
    const Vec3 base = centerline.point_at(arc);
    const Vec3& normal = frames[centerline.locate(arc).segment].normal;
    for (int c = 0; c < grid.nx; ++c) {
      coords.push_back(base + normal * (static_cast<double>(c - grid.nx / 2) * spacing));
    }
  }
  return coords;
}

CurvedMpr curved_mpr(const ScalarVolume& volume, const Centerline& centerline, double width,
                     double spacing, const BinaryMask* overlay,
                     std::optional<Vec3> initial_normal) {
  const Polyline3& pts = centerline.points();
  const Vec3 n0 = initial_normal.value_or(default_initial_normal((pts[1] - pts[0]).normalized()));
  CurvedMpr out;
  out.coordinates = curved_mpr_coordinates(centerline, width, spacing, n0, out.grid);

  auto sample_all = [&](auto&& sampler) {
    Image2D img;
    img.grid = out.grid;
    img.values.assign(out.grid.size(), 0.0);
    img.inside.assign(out.grid.size(), 0);
    for (std::size_t p = 0; p < out.coordinates.size(); ++p) {
      const std::optional<double> v = sampler(out.coordinates[p]);
      if (!v) continue;
      img.values[p] = *v;
      img.inside[p] = 1;
    }
    return img;
  };

  out.intensity = sample_all([&](const Vec3& w) { return volume.sample(w); });
  if (overlay != nullptr) {
    out.overlay = sample_all([&](const Vec3& w) -> std::optional<double> {
      const auto bit = overlay->sample(w);
      if (!bit) return std::nullopt;
      return *bit ? 1.0 : 0.0;
    });
  }
  return out;
}

}  // namespace carotid
