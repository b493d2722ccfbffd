#pragma once

#include "carotid/biomarkers.hpp"
#include "carotid/centerline.hpp"
#include "carotid/json_util.hpp"
#include "carotid/volume.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace carotid {

enum class MeshTag { inner_wall, outer_wall, pcmra };

std::string_view to_string(MeshTag tag);
MeshTag mesh_tag_from_string(std::string_view name);

/// Scalar written to vertices that no cross-section covers.
inline constexpr double kNoData = -1.0;

struct SurfaceMesh {
  std::vector<Vec3> vertices;                 // mm
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise seen from outside
  std::vector<double> scalars;                // empty, or one per vertex
  MeshTag tag = MeshTag::inner_wall;

  bool operator==(const SurfaceMesh&) const = default;
};

/// Iso-surface of a scalar grid with linear edge crossings. Values strictly above
/// iso are inside. Vertices are shared between neighbouring cells and the output
/// order follows the cell index, so results do not depend on anything but input.
SurfaceMesh marching_cubes(const ScalarVolume& volume, double iso, MeshTag tag = MeshTag::inner_wall);
SurfaceMesh marching_cubes(const BinaryMask& mask, double iso = 0.5, MeshTag tag = MeshTag::inner_wall);

/// Triangle list (as cube-edge indices, 0..11) for one of the 256 corner
/// configurations. Corner c sits at (c & 1, c >> 1 & 1, c >> 2 & 1).
const std::vector<std::array<int, 3>>& marching_cubes_case(int config);

struct MeshTopology {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_edges = 0;     // used by one triangle
  std::size_t nonmanifold_edges = 0;  // used by three or more
  long euler = 0;

  [[nodiscard]] bool closed_manifold() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

MeshTopology mesh_topology(const SurfaceMesh& mesh);
double mesh_area(const SurfaceMesh& mesh);
/// Signed volume by the divergence theorem; positive for outward-facing triangles.
double mesh_volume(const SurfaceMesh& mesh);

/// Copies the mesh and gives each vertex the thickness of the nearest valid ray of
/// the nearest plane carrying a profile. Planes further than 2·spacing, or whose
/// field of view misses the projected vertex, are skipped; uncovered vertices get
/// kNoData. Spacing defaults to the median arc gap of the profiled planes, or the
/// in-plane spacing when only one plane has a profile. Throws NoUsableProfiles.
SurfaceMesh map_vwt_to_mesh(const SurfaceMesh& mesh, const std::vector<CrossSectionPlane>& planes,
                            const std::vector<VwtProfile>& profiles,
                            std::optional<double> spacing = std::nullopt);

/// Binary little-endian PLY with double coordinates; the scalar is stored as the
/// per-vertex "quality" property when present. Throws IoFailure.
std::string mesh_to_ply(const SurfaceMesh& mesh);
SurfaceMesh mesh_from_ply(std::string_view bytes);
void export_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path);
SurfaceMesh import_mesh(const std::filesystem::path& path);

/// Flat positions / indices / scalars arrays for the browser viewer.
Json to_json(const SurfaceMesh& mesh);
SurfaceMesh mesh_from_json(const Json& j);

}  // namespace carotid
