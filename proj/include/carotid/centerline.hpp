#pragma once

#include "carotid/types.hpp"
#include "carotid/volume.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace carotid {

enum class Branch { CCA, ICA, ECA };

std::string_view to_string(Branch branch);
Branch branch_from_string(std::string_view name);

/// Arc-length parameterized world polyline. Arc lengths are the cumulative
/// chord lengths of the stored points.
class Centerline {
public:
  Centerline() = default;
  explicit Centerline(Polyline3 points, Branch branch = Branch::ICA);

  [[nodiscard]] const Polyline3& points() const { return points_; }
  [[nodiscard]] const std::vector<double>& arc_lengths() const { return arc_lengths_; }
  [[nodiscard]] Branch branch() const { return branch_; }
  [[nodiscard]] double length() const { return arc_lengths_.empty() ? 0.0 : arc_lengths_.back(); }
  [[nodiscard]] std::size_t size() const { return points_.size(); }

  /// Segment index and fraction for an arc position clamped to [0, length].
  struct Location {
    std::size_t segment = 0;
    double fraction = 0.0;
  };
  [[nodiscard]] Location locate(double arc) const;
  [[nodiscard]] Vec3 point_at(double arc) const;

  bool operator==(const Centerline&) const = default;

private:
  Polyline3 points_;
  std::vector<double> arc_lengths_;
  Branch branch_ = Branch::ICA;
};

/// Orthonormal right-handed frame: binormal = tangent x normal.
struct Frame {
  Vec3 tangent = Vec3::UnitZ();
  Vec3 normal = Vec3::UnitX();
  Vec3 binormal = Vec3::UnitY();

  bool operator==(const Frame&) const = default;
};

/// Cross-section perpendicular to a centerline. In-plane coordinates (u, v)
/// run along frame.normal and frame.binormal.
struct CrossSectionPlane {
  int id = 0;
  Vec3 center = Vec3::Zero();
  Frame frame;
  double arc_position = 0.0;
  double fov = 30.0;
  double in_plane_spacing = 0.3;

  [[nodiscard]] Vec3 to_world(const Vec2& uv) const {
    return center + frame.normal * uv.x() + frame.binormal * uv.y();
  }
  [[nodiscard]] Vec2 to_plane(const Vec3& world) const {
    const Vec3 d = world - center;
    return {d.dot(frame.normal), d.dot(frame.binormal)};
  }
  [[nodiscard]] double signed_distance(const Vec3& world) const {
    return (world - center).dot(frame.tangent);
  }
  [[nodiscard]] PlaneGrid grid() const { return PlaneGrid::from_extent(fov, fov, in_plane_spacing); }

  bool operator==(const CrossSectionPlane&) const = default;
};

/// Configurable defaults for cross-section placement.
struct CrossSectionParams {
  double spacing = 2.0;
  double fov = 30.0;
  double in_plane_spacing = 0.3;
};

Centerline resample_arclength(const Polyline3& points, double spacing,
                              Branch branch = Branch::ICA);

/// Unit vector perpendicular to `tangent`, built from the world axis least aligned with it.
Vec3 default_initial_normal(const Vec3& tangent);

/// Rotation-minimizing frames by double reflection. Tangents are normalized
/// forward differences (backward difference at the last sample).
std::vector<Frame> rmf_frames(const Centerline& centerline, const Vec3& initial_normal);

/// Planes at arc positions 0, spacing, 2*spacing, ... with sequential ids starting at first_id.
std::vector<CrossSectionPlane> cross_sections(const Centerline& centerline, double spacing,
                                              double fov, double in_plane_spacing,
                                              int first_id = 0,
                                              std::optional<Vec3> initial_normal = std::nullopt);

/// Euclidean distance (mm) from each voxel to the nearest background voxel
/// center; voxels beyond the grid count as background.
std::vector<double> distance_transform(const BinaryMask& mask);

/// Minimal-cost 26-connected voxel path (world voxel centers), unsmoothed.
/// Edge cost is step length / (1 + DT(destination))^2.
Polyline3 extract_centerline_path(const BinaryMask& mask, const Vec3& start, const Vec3& end);

/// Minimal path smoothed with a 5-sample moving average (window shrinks at the
/// ends so both endpoints are kept).
Centerline extract_centerline(const BinaryMask& mask, const Vec3& start, const Vec3& end,
                              Branch branch = Branch::ICA);

/// Straightened curved reconstruction. Row r is arc position r * spacing;
/// column j samples at offset (j - ncols/2) * spacing along the RMF normal.
struct CurvedMpr {
  PlaneGrid grid;
  std::vector<Vec3> coordinates;  // one world point per pixel, row-major
  Image2D intensity;
  std::optional<Image2D> overlay;
};

std::vector<Vec3> curved_mpr_coordinates(const Centerline& centerline, double width,
                                         double spacing, const Vec3& initial_normal,
                                         PlaneGrid& grid);

CurvedMpr curved_mpr(const ScalarVolume& volume, const Centerline& centerline, double width,
                     double spacing, const BinaryMask* overlay = nullptr,
                     std::optional<Vec3> initial_normal = std::nullopt);

}  // namespace carotid
