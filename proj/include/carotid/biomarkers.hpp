#pragma once

#include "carotid/centerline.hpp"
#include "carotid/contour.hpp"
#include "carotid/volume.hpp"

#include <optional>
#include <string>
#include <vector>

namespace carotid {

/// Wall thickness along rays cast from the lumen centroid (in-plane mm).
struct VwtProfile {
  int plane_id = 0;
  Vec2 center = Vec2::Zero();
  std::vector<double> angles;     // radians
  std::vector<double> thickness;  // mm, NaN where the ray missed a contour
  double mean = 0.0;              // over finite entries
  double max = 0.0;
  int invalid_rays = 0;
};

/// Throws ValidationFailed when the pair does not validate, InvalidArgument for n_rays < 8,
/// and RayMiss only when no ray hits both contours.
VwtProfile vwt_profile(const ClosedSplineContour& lumen, const ClosedSplineContour& wall,
                       int n_rays = 36, int plane_id = 0);

/// NASCET percent diameter reduction clamped to [0, 100].
double stenosis_degree(double d_stenosis, double d_reference);

/// Diameter of the circle with the same area as the contour.
double equivalent_diameter(const ClosedSplineContour& contour);
/// Smallest width of the densified contour's convex hull.
double minimal_caliper_diameter(const ClosedSplineContour& contour);

/// Flux of v·tangent through the lumen pixels of the plane grid, in ml/s.
double flow_rate(const CrossSectionPlane& plane, const ClosedSplineContour& lumen,
                 const VelocityField& field, double t_ms);

struct WssResult {
  std::vector<Vec2> points;     // boundary points, in-plane mm
  std::vector<double> values;   // Pa, NaN where a sample fell outside the field
  double mean = 0.0;            // over finite entries
  double max = 0.0;
  int invalid_points = 0;
};

inline constexpr double kDefaultViscosity = 0.0035;  // Pa·s

/// Near-wall gradient from samples of v·tangent at h and 2h along the inward
/// normal, fitted as v(r) = a·r + b·r² with v(0) = 0; WSS = mu·a.
/// h defaults to the plane's in-plane spacing.
WssResult wss(const CrossSectionPlane& plane, const ClosedSplineContour& lumen,
              const VelocityField& field, double t_ms, double mu = kDefaultViscosity,
              std::optional<double> h = std::nullopt);

struct FlowWaveform {
  double arc_position = 0.0;   // mm
  std::vector<double> times;   // ms, strictly increasing
  std::vector<double> flow;    // ml/s
  double cycle_length = 0.0;   // ms; 0 when the samples are not periodic
};

/// Time where the cycle minimum meets the line through the 20-80% upstroke.
double foot_time(const FlowWaveform& waveform);

struct PwvResult {
  double value = 0.0;  // m/s, +inf when not measurable
  bool measurable = false;
  std::vector<double> foot_times;
  std::string method = "foot-to-foot, 20-80% upstroke regression";
};

/// Inverse slope of foot time against arc position over at least three waveforms.
PwvResult pwv(const std::vector<FlowWaveform>& waveforms);

/// Flow rate at every field timepoint: the waveform at one cross-section.
FlowWaveform flow_waveform(const CrossSectionPlane& plane, const ClosedSplineContour& lumen,
                           const VelocityField& field);

struct BiomarkerParams {
  int n_rays = 36;
  double mu = kDefaultViscosity;
  double reference_window_mm = 10.0;       // distal span used for the NASCET reference
  std::optional<double> reference_diameter;  // overrides the distal window
  std::optional<double> flow_time;           // default: field frame with peak mean speed
};

struct BiomarkerRow {
  int plane_id = 0;
  double arc_position = 0.0;
  std::optional<double> timepoint;
  std::optional<double> lumen_area;
  std::optional<double> vwt_mean;
  std::optional<double> vwt_max;
  std::optional<double> flow_rate;
  std::optional<double> wss_mean;
  std::optional<double> wss_max;
};

struct StenosisSummary {
  int plane_id = 0;
  double arc_position = 0.0;
  double d_stenosis = 0.0;            // minimal caliper diameter at the narrowest plane
  double d_stenosis_equivalent = 0.0; // equivalent-area diameter at that plane
  double d_reference = 0.0;
  double d_reference_equivalent = 0.0;
  double percent = 0.0;               // NASCET from caliper diameters
  double percent_equivalent = 0.0;
};

struct BiomarkerReport {
  std::vector<BiomarkerRow> rows;
  std::vector<VwtProfile> profiles;
  std::optional<StenosisSummary> stenosis;
  std::optional<PwvResult> pwv;
  std::optional<double> flow_time;
};

/// Per-plane measures over usable annotations; unusable ones are skipped entirely.
BiomarkerReport compute_biomarkers(const std::vector<CrossSectionPlane>& planes,
                                   const std::vector<SliceAnnotation>& annotations,
                                   const VelocityField* flow, const BiomarkerParams& params = {});

/// Field frame time with the largest mean speed over the grid.
double peak_frame_time(const VelocityField& field);

std::string report_to_csv(const BiomarkerReport& report);
std::string report_to_json(const BiomarkerReport& report);

}  // namespace carotid
