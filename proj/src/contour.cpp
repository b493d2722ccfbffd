#include "carotid/contour.hpp"

#include "carotid/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace carotid {

std::string_view to_string(ContourRole role) {
  return role == ContourRole::lumen ? "lumen" : "outer_wall";
}

std::string_view to_string(AnnotationSource source) {
  switch (source) {
    case AnnotationSource::manual: return "manual";
    case AnnotationSource::automatic: return "auto";
    case AnnotationSource::auto_corrected: return "auto_corrected";
  }
  return "manual";
}

ContourRole contour_role_from_string(std::string_view name) {
  if (name == "lumen") return ContourRole::lumen;
  if (name == "outer_wall" || name == "wall") return ContourRole::outer_wall;
  throw Error(ErrorCode::InvalidArgument, "unknown contour role '" + std::string(name) + "'");
}

AnnotationSource annotation_source_from_string(std::string_view name) {
  if (name == "manual") return AnnotationSource::manual;
  if (name == "auto") return AnnotationSource::automatic;
  if (name == "auto_corrected") return AnnotationSource::auto_corrected;
  throw Error(ErrorCode::InvalidArgument, "unknown annotation source '" + std::string(name) + "'");
}

namespace {

void require_seeds(const ClosedSplineContour& c) {
  if (c.seeds.size() < 3) {
    throw Error(ErrorCode::TooFewSeeds, "a closed contour needs at least 3 seeds, got " +
                                            std::to_string(c.seeds.size()));
  }
}

Vec2 lerp_knots(const Vec2& a, const Vec2& b, double ta, double tb, double t) {
  return a + (b - a) * ((t - ta) / (tb - ta));
}

double knot_step(const Vec2& a, const Vec2& b) {
  return std::max(std::sqrt((b - a).norm()), 1e-12);
}

}  // namespace

Polyline2 evaluate_contour(const ClosedSplineContour& contour, int samples_per_segment) {
  require_seeds(contour);
  if (samples_per_segment < 1) {
    throw Error(ErrorCode::InvalidArgument, "samples_per_segment must be at least 1");
  }
  const auto& p = contour.seeds;
  const std::size_t n = p.size();
  Polyline2 out;
  out.reserve(n * static_cast<std::size_t>(samples_per_segment));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p0 = p[(i + n - 1) % n];
    const Vec2& p1 = p[i];
    const Vec2& p2 = p[(i + 1) % n];
    const Vec2& p3 = p[(i + 2) % n];
    const double t0 = 0.0;
    const double t1 = t0 + knot_step(p0, p1);
    const double t2 = t1 + knot_step(p1, p2);
    const double t3 = t2 + knot_step(p2, p3);
    out.push_back(p1);
    for (int k = 1; k < samples_per_segment; ++k) {
      const double t = t1 + (t2 - t1) * k / samples_per_segment;
      const Vec2 a1 = lerp_knots(p0, p1, t0, t1, t);
      const Vec2 a2 = lerp_knots(p1, p2, t1, t2, t);
      const Vec2 a3 = lerp_knots(p2, p3, t2, t3, t);
      const Vec2 b1 = lerp_knots(a1, a2, t0, t2, t);
      const Vec2 b2 = lerp_knots(a2, a3, t1, t3, t);
      out.push_back(lerp_knots(b1, b2, t1, t2, t));
    }
  }
  return out;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

ClosedSplineContour& editable(SliceAnnotation& a, ContourRole role) {
  auto& c = a.contour(role);
  if (!c) {
    throw Error(ErrorCode::IndexOutOfRange,
                "annotation has no " + std::string(to_string(role)) + " contour");
  }
  return *c;
}

void check_index(const ClosedSplineContour& c, std::size_t index) {
  if (index >= c.seeds.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "seed index " + std::to_string(index) +
                                                " out of range (" +
                                                std::to_string(c.seeds.size()) + " seeds)");
  }
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + ab * t - p).norm();
}

void mark_corrected(SliceAnnotation& a) {
  if (a.source == AnnotationSource::automatic) a.source = AnnotationSource::auto_corrected;
}

}  // namespace

SliceAnnotation apply_edit(const SliceAnnotation& annotation, const Edit& change) {
  SliceAnnotation out = annotation;
  std::visit(
      overloaded{
          [&](const edit::AddSeed& e) {
            ClosedSplineContour& c = editable(out, e.role);
            require_seeds(c);
            constexpr int m = 16;
            const Polyline2 dense = evaluate_contour(c, m);
            const std::size_t n = c.seeds.size();
            std::size_t best_segment = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < n; ++s) {
              for (int k = 0; k < m; ++k) {
                const std::size_t i = s * m + static_cast<std::size_t>(k);
                const double d = point_segment_distance(e.point, dense[i], dense[(i + 1) % dense.size()]);
                if (d < best) {
                  best = d;
                  best_segment = s;
                }
              }
            }
            c.seeds.insert(c.seeds.begin() + static_cast<std::ptrdiff_t>(best_segment + 1), e.point);
            mark_corrected(out);
          },
          [&](const edit::MoveSeed& e) {
            ClosedSplineContour& c = editable(out, e.role);
            check_index(c, e.index);
            c.seeds[e.index] = e.point;
            mark_corrected(out);
          },
          [&](const edit::RemoveSeed& e) {
            ClosedSplineContour& c = editable(out, e.role);
            check_index(c, e.index);
            if (c.seeds.size() <= 3) {
              throw Error(ErrorCode::MinimumSeeds, "removing a seed would leave fewer than 3 seeds");
            }
            c.seeds.erase(c.seeds.begin() + static_cast<std::ptrdiff_t>(e.index));
            mark_corrected(out);
          },
          [&](const edit::ToggleUsable&) { out.usable = !out.usable; },
      },
      change);
  return out;
}

double polygon_signed_area(const Polyline2& poly) {
  double acc = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    acc += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * acc;
}

Vec2 polygon_centroid(const Polyline2& poly) {
  // Shift to the first vertex so large offsets do not cancel catastrophically.
  const Vec2 o = poly.front();
  double area2 = 0.0;
  Vec2 acc = Vec2::Zero();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i] - o;
    const Vec2 b = poly[(i + 1) % n] - o;
    const double cross = a.x() * b.y() - b.x() * a.y();
    area2 += cross;
    acc += (a + b) * cross;
  }
  if (std::abs(area2) < 1e-300) {
    Vec2 mean = Vec2::Zero();
    for (const Vec2& p : poly) mean += p;
    return mean / static_cast<double>(n);
  }
  return o + acc / (3.0 * area2);
}

bool point_in_polygon(const Polyline2& poly, const Vec2& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double distance_to_polygon(const Polyline2& poly, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  }
  return best;
}

namespace {

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

}  // namespace

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) {
    return true;
  }
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

bool polygon_self_intersects(const Polyline2& poly) {
  const std::size_t n = poly.size();
  if (n < 4) return false;
  struct Box {
    double x0, x1, y0, y1;
  };
  std::vector<Box> boxes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    boxes[i] = {std::min(a.x(), b.x()), std::max(a.x(), b.x()), std::min(a.y(), b.y()),
                std::max(a.y(), b.y())};
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
      const Box& bi = boxes[i];
      const Box& bj = boxes[j];
      if (bi.x1 < bj.x0 || bj.x1 < bi.x0 || bi.y1 < bj.y0 || bj.y1 < bi.y0) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return true;
    }
  }
  return false;
}

double contour_area(const ClosedSplineContour& contour, int samples_per_segment) {
  return std::abs(polygon_signed_area(evaluate_contour(contour, std::max(samples_per_segment, 32))));
}

Vec2 contour_centroid(const ClosedSplineContour& contour, int samples_per_segment) {
  return polygon_centroid(evaluate_contour(contour, std::max(samples_per_segment, 32)));
}

std::size_t Mask2D::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

Mask2D Mask2D::from_image(const Image2D& image, double threshold) {
  Mask2D m(image.grid);
  for (std::size_t p = 0; p < image.values.size(); ++p) {
    m.bits[p] = (image.inside[p] && image.values[p] >= threshold) ? 1 : 0;
  }
  return m;
}

double dice(const Mask2D& a, const Mask2D& b) {
  if (a.bits.size() != b.bits.size()) {
    throw Error(ErrorCode::ShapeMismatch, "dice needs masks on the same grid");
  }
  std::size_t both = 0, na = 0, nb = 0;
  for (std::size_t p = 0; p < a.bits.size(); ++p) {
    na += a.bits[p] != 0;
    nb += b.bits[p] != 0;
    both += (a.bits[p] != 0) && (b.bits[p] != 0);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

Mask2D rasterize_polygon(const Polyline2& poly, const PlaneGrid& grid) {
  Mask2D mask(grid);
  const std::size_t n = poly.size();
  std::vector<double> xs;
  for (int j = 0; j < grid.ny; ++j) {
    const double y = (j - grid.ny / 2) * grid.spacing;
    xs.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const Vec2& a = poly[e];
      const Vec2& b = poly[(e + 1) % n];
      if ((a.y() <= y && y < b.y()) || (b.y() <= y && y < a.y())) {
        xs.push_back(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int i0 = std::max(0, static_cast<int>(std::ceil(xs[k] / grid.spacing)) + grid.nx / 2);
      const int i1 =
          std::min(grid.nx, static_cast<int>(std::ceil(xs[k + 1] / grid.spacing)) + grid.nx / 2);
      for (int i = i0; i < i1; ++i) mask.set(i, j, true);
    }
  }
  return mask;
}

Mask2D contour_to_mask(const ClosedSplineContour& contour, const PlaneGrid& grid) {
  const Polyline2 dense = evaluate_contour(contour, kDenseSamples);
  const double s = grid.spacing;
  const double u_lo = (-(grid.nx / 2) - 0.5) * s, u_hi = (grid.nx - 1 - grid.nx / 2 + 0.5) * s;
  const double v_lo = (-(grid.ny / 2) - 0.5) * s, v_hi = (grid.ny - 1 - grid.ny / 2 + 0.5) * s;
  for (const Vec2& p : dense) {
    if (p.x() < u_lo || p.x() > u_hi || p.y() < v_lo || p.y() > v_hi) {
      throw Error(ErrorCode::GridTooSmall, "contour extends beyond the raster grid");
    }
  }
  return rasterize_polygon(dense, grid);
}

Mask2D largest_component(const Mask2D& mask) {
  const int nx = mask.grid.nx, ny = mask.grid.ny;
  std::vector<int> label(mask.bits.size(), -1);
  int best_label = -1;
  std::size_t best_size = 0;
  int next = 0;
  std::deque<std::pair<int, int>> queue;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t p = static_cast<std::size_t>(j) * nx + i;
      if (!mask.bits[p] || label[p] >= 0) continue;
      std::size_t size = 0;
      label[p] = next;
      queue.emplace_back(i, j);
      while (!queue.empty()) {
        const auto [ci, cj] = queue.front();
        queue.pop_front();
        ++size;
        constexpr std::array<std::array<int, 2>, 4> nb{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& d : nb) {
          const int ni = ci + d[0], nj = cj + d[1];
          if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
          const std::size_t q = static_cast<std::size_t>(nj) * nx + ni;
          if (mask.bits[q] && label[q] < 0) {
            label[q] = next;
            queue.emplace_back(ni, nj);
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best_label = next;
      }
      ++next;
    }
  }
  if (best_label < 0) throw Error(ErrorCode::EmptyMask, "mask has no foreground pixels");
  Mask2D out(mask.grid);
  for (std::size_t p = 0; p < label.size(); ++p) out.bits[p] = label[p] == best_label ? 1 : 0;
  return out;
}

Mask2D fill_holes(const Mask2D& component) {
  const int nx = component.grid.nx, ny = component.grid.ny;
  // Background reachable from outside the grid through 8-connected background.
  std::vector<std::uint8_t> outside(component.bits.size(), 0);
  std::deque<std::pair<int, int>> queue;
  auto push = [&](int i, int j) {
    const std::size_t p = static_cast<std::size_t>(j) * nx + i;
    if (component.bits[p] || outside[p]) return;
    outside[p] = 1;
    queue.emplace_back(i, j);
  };
  for (int i = 0; i < nx; ++i) {
    push(i, 0);
    push(i, ny - 1);
  }
  for (int j = 0; j < ny; ++j) {
    push(0, j);
    push(nx - 1, j);
  }
  while (!queue.empty()) {
    const auto [ci, cj] = queue.front();
    queue.pop_front();
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int ni = ci + di, nj = cj + dj;
        if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
        push(ni, nj);
      }
  }
  Mask2D out(component.grid);
  for (std::size_t p = 0; p < out.bits.size(); ++p) out.bits[p] = outside[p] ? 0 : 1;
  return out;
}

Polyline2 trace_boundary(const Mask2D& component) {
  const int nx = component.grid.nx, ny = component.grid.ny;
  auto fg = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < nx && j < ny && component.at(i, j);
  };
  static constexpr std::array<std::array<int, 2>, 8> dirs{
      {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
  auto dir_index = [](int di, int dj) {
    for (int d = 0; d < 8; ++d)
      if (dirs[d][0] == di && dirs[d][1] == dj) return d;
    return -1;
  };

  int si = -1, sj = -1;
  for (int j = 0; j < ny && si < 0; ++j)
    for (int i = 0; i < nx; ++i)
      if (component.at(i, j)) {
        si = i;
        sj = j;
        break;
      }
  if (si < 0) throw Error(ErrorCode::EmptyMask, "mask has no foreground pixels");

  std::vector<std::array<int, 2>> pixels{{si, sj}};
  int ci = si, cj = sj;
  int back = 4;  // raster order guarantees the west neighbor is background
  // Stop once the first move out of the start pixel repeats; plain re-entry is
  // not enough for one-pixel-wide parts that are traversed twice.
  std::array<int, 2> first_next{-1, -1};
  const std::size_t cap = 4 * component.bits.size() + 16;
  for (std::size_t iter = 0; iter < cap; ++iter) {
    bool found = false;
    bool return_to_start = false;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      const int ni = ci + dirs[d][0], nj = cj + dirs[d][1];
      if (!fg(ni, nj)) continue;
      if (ci == si && cj == sj) {
        if (first_next[0] < 0) {
          first_next = {ni, nj};
        } else if (first_next[0] == ni && first_next[1] == nj) {
          return_to_start = true;
          break;
        }
      }
      const int pd = (back + k - 1) % 8;
      const int bi = ci + dirs[pd][0], bj = cj + dirs[pd][1];
      ci = ni;
      cj = nj;
      back = dir_index(bi - ci, bj - cj);
      found = true;
      break;
    }
    if (!found || return_to_start) break;
    pixels.push_back({ci, cj});
  }
  if (pixels.size() > 1 && pixels.back() == pixels.front()) pixels.pop_back();

  Polyline2 out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) out.push_back(component.grid.pixel_center(p[0], p[1]));
  return out;
}

namespace {

Polyline2 gaussian_smooth_closed(const Polyline2& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += w[static_cast<std::size_t>(k + radius)];
  }
  const long n = static_cast<long>(in.size());
  Polyline2 out(in.size(), Vec2::Zero());
  for (long i = 0; i < n; ++i) {
    Vec2 acc = Vec2::Zero();
    for (int k = -radius; k <= radius; ++k) {
      const long idx = ((i + k) % n + n) % n;
      acc += in[static_cast<std::size_t>(idx)] * w[static_cast<std::size_t>(k + radius)];
    }
    out[static_cast<std::size_t>(i)] = acc / total;
  }
  return out;
}

double perimeter(const Polyline2& poly) {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) acc += (poly[(i + 1) % poly.size()] - poly[i]).norm();
  return acc;
}

// Moves each vertex of a counter-clockwise polygon along its outward normal so
// that the enclosed area approaches `target`.
void match_area(Polyline2& poly, double target) {
  const std::size_t n = poly.size();
  for (int iter = 0; iter < 4; ++iter) {
    const double area = polygon_signed_area(poly);
    const double per = perimeter(poly);
    if (per <= 0.0) return;
    const double offset = (target - area) / per;
    if (std::abs(offset) < 1e-12) return;
    Polyline2 moved(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 t = poly[(i + 1) % n] - poly[(i + n - 1) % n];
      const double len = t.norm();
      const Vec2 normal = len > 0.0 ? Vec2(t.y() / len, -t.x() / len) : Vec2::Zero();
      moved[i] = poly[i] + normal * offset;
    }
    poly = std::move(moved);
  }
}

Polyline2 resample_closed(const Polyline2& poly, int count) {
  const std::size_t n = poly.size();
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + (poly[(i + 1) % n] - poly[i]).norm();
  const double total = cum[n];
  Polyline2 out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t seg = 0;
  for (int k = 0; k < count; ++k) {
    const double s = total * k / count;
    while (seg + 1 < n && cum[seg + 1] <= s) ++seg;
    const double span = cum[seg + 1] - cum[seg];
    const double f = span > 0.0 ? (s - cum[seg]) / span : 0.0;
    out.push_back(poly[seg] + (poly[(seg + 1) % n] - poly[seg]) * f);
  }
  return out;
}

}  // namespace

ClosedSplineContour fit_contour_to_mask(const Mask2D& mask, ContourRole role,
                                        const FitParams& params) {
  if (params.n_seeds < 3) throw Error(ErrorCode::TooFewSeeds, "n_seeds must be at least 3");
  const Mask2D component = largest_component(mask);
  if (component.count() < static_cast<std::size_t>(params.min_component_pixels)) {
    throw Error(ErrorCode::ComponentTooSmall,
                "largest component has " + std::to_string(component.count()) + " pixels");
  }
  Polyline2 boundary = trace_boundary(component);
  boundary = gaussian_smooth_closed(boundary, params.smoothing_sigma);
  if (polygon_signed_area(boundary) < 0.0) std::reverse(boundary.begin(), boundary.end());
  const double target = static_cast<double>(fill_holes(component).count()) * mask.grid.pixel_area();
  match_area(boundary, target);

  ClosedSplineContour out;
  out.role = role;
  out.seeds = resample_closed(boundary, params.n_seeds);
  return out;
}

std::vector<Violation> validate_annotation(const SliceAnnotation& a) {
  std::vector<Violation> out;
  std::optional<Polyline2> lumen_dense, wall_dense;
  for (ContourRole role : {ContourRole::lumen, ContourRole::outer_wall}) {
    const auto& c = a.contour(role);
    if (!c) continue;
    const std::string name(to_string(role));
    if (c->role != role) out.push_back({name, "contour role mismatch"});
    if (c->seeds.size() < 3) {
      out.push_back({name, "too few seeds"});
      continue;
    }
    bool finite = true;
    for (const Vec2& s : c->seeds) finite = finite && s.allFinite();
    if (!finite) {
      out.push_back({name, "non-finite seed coordinates"});
      continue;
    }
    Polyline2 dense = evaluate_contour(*c, 16);
    if (polygon_self_intersects(dense)) out.push_back({name, "self-intersecting contour"});
    (role == ContourRole::lumen ? lumen_dense : wall_dense) = std::move(dense);
  }
  if (lumen_dense && wall_dense) {
    bool inside = true;
    for (const Vec2& p : *lumen_dense) {
      if (!point_in_polygon(*wall_dense, p) || distance_to_polygon(*wall_dense, p) <= 1e-9) {
        inside = false;
        break;
      }
    }
    if (inside) {
      const std::size_t n = lumen_dense->size(), m = wall_dense->size();
      for (std::size_t i = 0; i < n && inside; ++i)
        for (std::size_t j = 0; j < m; ++j)
          if (segments_intersect((*lumen_dense)[i], (*lumen_dense)[(i + 1) % n], (*wall_dense)[j],
                                 (*wall_dense)[(j + 1) % m])) {
            inside = false;
            break;
          }
    }
    if (!inside) out.push_back({"annotation", "lumen not strictly inside wall"});
  }
  return out;
}

}  // namespace carotid
