#include "carotid/pipeline.hpp"

#include "carotid/error.hpp"

#include "parallel.hpp"

#include <deque>

namespace carotid {

BinaryMask lumen_from_wall(const BinaryMask& wall) {
  const Dims& d = wall.dims();
  std::vector<std::uint8_t> outside(wall.bits().size(), 0);
  std::deque<std::array<int, 3>> queue;
  const auto push = [&](int i, int j, int k) {
    if (!wall.contains(i, j, k)) return;
    const std::size_t p = wall.linear_index(i, j, k);
    if (wall.bits()[p] || outside[p]) return;
    outside[p] = 1;
    queue.push_back({i, j, k});
  };
  for (int c = 0; c < 8; ++c) push(c & 1 ? d[0] - 1 : 0, c & 2 ? d[1] - 1 : 0, c & 4 ? d[2] - 1 : 0);
  while (!queue.empty()) {
    const auto [i, j, k] = queue.front();
    queue.pop_front();
    push(i - 1, j, k);
    push(i + 1, j, k);
    push(i, j - 1, k);
    push(i, j + 1, k);
    push(i, j, k - 1);
    push(i, j, k + 1);
  }
  BinaryMask lumen(d, wall.affine());
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const std::size_t p = wall.linear_index(i, j, k);
        if (!wall.bits()[p] && !outside[p]) lumen.set(i, j, k, true);
      }
  return lumen;
}

BinaryMask vessel_from_wall(const BinaryMask& wall) {
  BinaryMask vessel = lumen_from_wall(wall);
  const Dims& d = wall.dims();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (wall.at(i, j, k)) vessel.set(i, j, k, true);
  return vessel;
}

Mask2D slice_mask(const BinaryMask& mask, const CrossSectionPlane& plane) {
  return Mask2D::from_image(resample_plane(mask, plane.center, plane.frame.normal, plane.frame.binormal, plane.grid()));
}

namespace {

// 4-connected flood from (i0, j0) through pixels where passable(p) holds.
template <typename P>
Mask2D flood(const PlaneGrid& grid, int i0, int j0, P passable) {
  Mask2D out(grid);
  std::deque<std::pair<int, int>> queue;
  const auto push = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= grid.nx || j >= grid.ny) return;
    const std::size_t p = static_cast<std::size_t>(j) * grid.nx + i;
    if (out.bits[p] || !passable(p)) return;
    out.bits[p] = 1;
    queue.emplace_back(i, j);
  };
  push(i0, j0);
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    push(i - 1, j);
    push(i + 1, j);
    push(i, j - 1);
    push(i, j + 1);
  }
  return out;
}

bool touches_border(const Mask2D& m) {
  const int nx = m.grid.nx, ny = m.grid.ny;
  for (int i = 0; i < nx; ++i)
    if (m.at(i, 0) || m.at(i, ny - 1)) return true;
  for (int j = 0; j < ny; ++j)
    if (m.at(0, j) || m.at(nx - 1, j)) return true;
  return false;
}

}  // namespace

WallSliceRegions wall_slice_regions(const Mask2D& wall) {
  const PlaneGrid& g = wall.grid;
  const int ci = g.nx / 2, cj = g.ny / 2;  // pixel at in-plane (0, 0)
  if (g.nx == 0 || g.ny == 0) throw Error(ErrorCode::EmptyMask, "empty plane grid");
  if (wall.at(ci, cj)) throw Error(ErrorCode::EmptyMask, "plane center lies on the wall");
  Mask2D lumen = flood(g, ci, cj, [&](std::size_t p) { return wall.bits[p] == 0; });
  if (touches_border(lumen)) throw Error(ErrorCode::EmptyMask, "plane center is not enclosed by wall");
  Mask2D vessel(g);
  for (std::size_t p = 0; p < vessel.bits.size(); ++p) vessel.bits[p] = wall.bits[p] || lumen.bits[p];
  Mask2D outer = fill_holes(flood(g, ci, cj, [&](std::size_t p) { return vessel.bits[p] != 0; }));
  return {std::move(lumen), std::move(outer)};
}

SliceAnnotation annotation_from_wall_slice(const Mask2D& wall, int plane_id, const FitParams& params) {
  const WallSliceRegions r = wall_slice_regions(wall);
  SliceAnnotation a;
  a.plane_id = plane_id;
  a.lumen = fit_contour_to_mask(r.lumen, ContourRole::lumen, params);
  a.wall = fit_contour_to_mask(r.outer, ContourRole::outer_wall, params);
  a.source = AnnotationSource::automatic;
  a.usable = true;
  return a;
}

SliceAnnotation autofit_plane(const BinaryMask& wall, const CrossSectionPlane& plane, const FitParams& params) {
  return annotation_from_wall_slice(slice_mask(wall, plane), plane.id, params);
}

AutofitResult autofit_planes(const BinaryMask& wall, const std::vector<CrossSectionPlane>& planes,
                             const FitParams& params, int threads) {
  std::vector<std::optional<SliceAnnotation>> fitted(planes.size());
  std::vector<std::string> errors(planes.size());
  detail::parallel_for(planes.size(), threads, [&](std::size_t i) {
    try {
      SliceAnnotation a = autofit_plane(wall, planes[i], params);
      if (validate_annotation(a).empty()) {
        fitted[i] = std::move(a);
      } else {
        errors[i] = validate_annotation(a).front().message;
      }
    } catch (const Error& e) {
      errors[i] = std::string(to_string(e.code())) + ": " + e.what();
    }
  });
  AutofitResult out;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (fitted[i]) out.annotations.push_back(std::move(*fitted[i]));
    else out.failures.push_back({planes[i].id, errors[i]});
  }
  return out;
}

std::vector<CrossSectionPlane> planes_for(const std::vector<Centerline>& centerlines, const SessionParameters& params) {
  std::vector<CrossSectionPlane> planes;
  for (const Centerline& c : centerlines) {
    auto more = cross_sections(c, params.plane_spacing, params.fov, params.in_plane_spacing,
                               static_cast<int>(planes.size()));
    planes.insert(planes.end(), more.begin(), more.end());
  }
  return planes;
}

BiomarkerParams biomarker_params(const SessionParameters& params) {
  BiomarkerParams b;
  b.n_rays = params.n_rays;
  b.mu = params.mu;
  b.reference_window_mm = params.reference_window_mm;
  return b;
}

WallMeshes wall_meshes(const BinaryMask& wall, const std::vector<CrossSectionPlane>& planes,
                       const std::vector<VwtProfile>& profiles, std::optional<double> spacing) {
  WallMeshes m;
  m.inner = marching_cubes(lumen_from_wall(wall), 0.5, MeshTag::inner_wall);
  m.outer = marching_cubes(vessel_from_wall(wall), 0.5, MeshTag::outer_wall);
  if (!profiles.empty()) m.inner = map_vwt_to_mesh(m.inner, planes, profiles, spacing);
  return m;
}

}  // namespace carotid
