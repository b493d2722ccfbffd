#pragma once

#include "carotid/centerline.hpp"
#include "carotid/json_util.hpp"
#include "carotid/volume.hpp"

#include <string_view>
#include <vector>

namespace carotid {

enum class PhantomKind { straight_tube, stenotic_tube, bifurcation };
enum class WaveformKind { flat, half_sine };

std::string_view to_string(PhantomKind kind);
std::string_view to_string(WaveformKind kind);
PhantomKind phantom_kind_from_string(std::string_view name);
WaveformKind waveform_kind_from_string(std::string_view name);

/// Synthetic vessel along +z (the common trunk for bifurcations), lengths in mm.
struct PhantomSpec {
  PhantomKind kind = PhantomKind::straight_tube;
  double lumen_radius = 3.0;     // nominal / distal radius, CCA radius for bifurcations
  double min_radius = 1.5;       // stenotic throat radius
  double stenosis_length = 10.0; // full width of the cosine narrowing
  double ica_radius = 2.5;       // bifurcation branches
  double eca_radius = 2.0;
  double branch_angle_deg = 25.0;
  double wall_thickness = 1.0;
  double length = 40.0;
  double voxel_spacing = 0.5;
  double margin = 2.0;           // background around the outer wall
  double v_max = 1.0;            // m/s on the axis of the nominal lumen at systole
  int timepoints = 20;
  WaveformKind waveform = WaveformKind::half_sine;
  double cycle_length = 1000.0;  // ms
  double pwv = 0.0;              // m/s; 0 means the pulse arrives everywhere at once

  bool operator==(const PhantomSpec&) const = default;
};

/// Throws SpecInvalid with the offending field.
void validate(const PhantomSpec& spec);

/// Analytic lumen radius of the trunk at axial position z.
double lumen_radius_at(const PhantomSpec& spec, double z);
/// Temporal modulation in [0, 1] at time t for the pulse reaching arc position s.
double waveform_value(const PhantomSpec& spec, double t_ms, double arc_mm = 0.0);
/// Time of peak flow at arc position 0.
double systole_time(const PhantomSpec& spec);

struct PhantomTruth {
  std::vector<Centerline> centerlines;  // trunk first; bifurcations add CCA->ECA
  std::vector<double> arc;              // along the first centerline
  std::vector<double> lumen_radius;
  std::vector<double> wall_thickness;
  double reference_radius = 0.0;
  double min_radius = 0.0;
  double stenosis_percent = 0.0;        // NASCET on the analytic radii
};

struct Phantom {
  ScalarVolume bb;
  BinaryMask lumen_mask;
  BinaryMask wall_mask;
  PhantomTruth truth;
};

inline constexpr double kLumenIntensity = 100.0;
inline constexpr double kWallIntensity = 400.0;
inline constexpr double kBackgroundIntensity = 50.0;

/// Black-blood volume with 0.5-voxel linear partial-volume edges and masks by
/// voxel-center classification.
Phantom generate_phantom(const PhantomSpec& spec);

/// Axial Poiseuille flow inside the lumen, zero elsewhere; venc = 1.5 v_max.
VelocityField generate_flow(const PhantomSpec& spec);

/// Grid shared by generate_phantom and generate_flow.
Affine phantom_affine(const PhantomSpec& spec, Dims& dims);

Json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const Json& j);
Json to_json(const PhantomTruth& truth);

}  // namespace carotid
