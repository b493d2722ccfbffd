#pragma once

#include "carotid/types.hpp"
#include "carotid/volume.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace carotid {

enum class ContourRole { lumen, outer_wall };
enum class AnnotationSource { manual, automatic, auto_corrected };

std::string_view to_string(ContourRole role);
std::string_view to_string(AnnotationSource source);
ContourRole contour_role_from_string(std::string_view name);
AnnotationSource annotation_source_from_string(std::string_view name);

/// Closed interpolating spline through in-plane seed points (mm, relative to the plane center).
struct ClosedSplineContour {
  std::vector<Vec2> seeds;
  ContourRole role = ContourRole::lumen;

  bool operator==(const ClosedSplineContour&) const = default;
};

/// Lumen and outer-wall contours of one cross-section, optionally at one timepoint.
struct SliceAnnotation {
  int plane_id = 0;
  std::optional<double> timepoint;
  std::optional<ClosedSplineContour> lumen;
  std::optional<ClosedSplineContour> wall;
  bool usable = true;
  AnnotationSource source = AnnotationSource::manual;

  [[nodiscard]] const std::optional<ClosedSplineContour>& contour(ContourRole role) const {
    return role == ContourRole::lumen ? lumen : wall;
  }
  std::optional<ClosedSplineContour>& contour(ContourRole role) {
    return role == ContourRole::lumen ? lumen : wall;
  }

  bool operator==(const SliceAnnotation&) const = default;
};

/// Samples per segment used when a contour is densified for geometry and validation.
inline constexpr int kDenseSamples = 32;

/// Closed centripetal Catmull-Rom curve (alpha = 0.5) through all seeds.
/// Returns seeds * samples_per_segment points; point k * samples_per_segment is seed k.
Polyline2 evaluate_contour(const ClosedSplineContour& contour, int samples_per_segment);

namespace edit {
struct AddSeed {
  ContourRole role;
  Vec2 point;
};
struct MoveSeed {
  ContourRole role;
  std::size_t index;
  Vec2 point;
};
struct RemoveSeed {
  ContourRole role;
  std::size_t index;
};
struct ToggleUsable {};
}  // namespace edit

using Edit = std::variant<edit::AddSeed, edit::MoveSeed, edit::RemoveSeed, edit::ToggleUsable>;

/// Returns the edited copy. Seed edits on an automatic contour mark it auto_corrected.
SliceAnnotation apply_edit(const SliceAnnotation& annotation, const Edit& edit);

double polygon_signed_area(const Polyline2& polygon);
Vec2 polygon_centroid(const Polyline2& polygon);
bool point_in_polygon(const Polyline2& polygon, const Vec2& p);
double distance_to_polygon(const Polyline2& polygon, const Vec2& p);
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);
bool polygon_self_intersects(const Polyline2& polygon);

/// Shoelace area of the densified contour (at least 32 samples per segment), always positive.
double contour_area(const ClosedSplineContour& contour, int samples_per_segment = kDenseSamples);
Vec2 contour_centroid(const ClosedSplineContour& contour,
                      int samples_per_segment = kDenseSamples);

/// 2D boolean raster on a PlaneGrid, u fastest.
struct Mask2D {
  PlaneGrid grid;
  std::vector<std::uint8_t> bits;

  Mask2D() = default;
  explicit Mask2D(const PlaneGrid& g) : grid(g), bits(g.size(), 0) {}

  [[nodiscard]] bool at(int i, int j) const {
    return bits[static_cast<std::size_t>(j) * grid.nx + i] != 0;
  }
  void set(int i, int j, bool v) { bits[static_cast<std::size_t>(j) * grid.nx + i] = v ? 1 : 0; }
  [[nodiscard]] std::size_t count() const;

  static Mask2D from_image(const Image2D& image, double threshold = 0.5);
};

double dice(const Mask2D& a, const Mask2D& b);

/// Even-odd rasterization with pixel-center inclusion.
Mask2D rasterize_polygon(const Polyline2& polygon, const PlaneGrid& grid);
Mask2D contour_to_mask(const ClosedSplineContour& contour, const PlaneGrid& grid);

/// Largest 4-connected component as a mask; EmptyMask when there is no foreground.
Mask2D largest_component(const Mask2D& mask);
/// Component with its enclosed holes filled.
Mask2D fill_holes(const Mask2D& component);

/// Moore-neighbor trace of the outer boundary pixels (in-plane mm), Jacob's stopping rule.
Polyline2 trace_boundary(const Mask2D& component);

struct FitParams {
  int n_seeds = 12;
  double smoothing_sigma = 2.0;  // in boundary samples
  int min_component_pixels = 9;
};

/// Mask to editable contour: largest 4-connected component, Moore trace,
/// circular Gaussian smoothing, outward offset so the enclosed area matches
/// the filled component, then seeds at equal arc length.
ClosedSplineContour fit_contour_to_mask(const Mask2D& mask, ContourRole role,
                                        const FitParams& params = {});

struct Violation {
  std::string role;  // "lumen", "outer_wall" or "annotation"
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Structural checks: seed counts, self-intersection and lumen strictly inside wall.
std::vector<Violation> validate_annotation(const SliceAnnotation& annotation);

}  // namespace carotid
