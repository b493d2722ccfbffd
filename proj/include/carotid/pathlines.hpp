#pragma once

#include "carotid/centerline.hpp"
#include "carotid/contour.hpp"
#include "carotid/json_util.hpp"
#include "carotid/volume.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace carotid {

enum class Termination : std::uint8_t { mask_exit = 0, domain_exit = 1, max_duration = 2, stagnation = 3 };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view name);

struct PathlineVertex {
  Vec3 position;  // mm
  double t = 0.0; // ms
  double speed = 0.0;  // m/s

  bool operator==(const PathlineVertex&) const = default;
};

struct Pathline {
  int seed_index = 0;
  double start_time = 0.0;
  std::vector<PathlineVertex> vertices;
  Termination termination = Termination::max_duration;

  bool operator==(const Pathline&) const = default;
};

struct EmitterSpec {
  int plane_id = 0;
  int seed_count = 1;
  std::string seed_layout = "uniform-disc-in-lumen";
  std::vector<double> start_times{0.0};

  bool operator==(const EmitterSpec&) const = default;
};

struct PathlineSet {
  std::vector<Pathline> lines;  // ordered by (start_time, seed_index)
  EmitterSpec emitter;
  double dt = 0.0;
  bool mask_applied = false;

  bool operator==(const PathlineSet&) const = default;
};

/// Deterministic quasi-uniform seeds: Halton(2,3) points rejected against the
/// lumen polygon, or a disc of radius fov/4 around the plane center when no lumen
/// is given. n = 1 yields the centroid. Throws EmptyLumen for degenerate contours.
std::vector<Vec3> seed_from_cross_section(const CrossSectionPlane& plane,
                                          const ClosedSplineContour* lumen, int n);

struct TraceParams {
  double stagnation_speed = 1e-4;  // m/s
  int stagnation_steps = 5;
  int threads = 0;                 // 0: hardware concurrency
};

/// Fixed-step RK4 through the time-varying field (mm/ms == m/s). The last step is
/// shortened to end exactly at t0 + duration. Positions leaving the mask or the
/// grid end the line without being emitted. Throws InvalidStep for dt <= 0.
PathlineSet trace(const VelocityField& field, const std::vector<Vec3>& seeds, double t0,
                  double duration, double dt, const BinaryMask* mask = nullptr,
                  const TraceParams& params = {});

/// Seeds at every start time, lines ordered by (start_time, seed index).
PathlineSet trace_emitter(const VelocityField& field, const std::vector<Vec3>& seeds,
                          const EmitterSpec& emitter, double duration, double dt,
                          const BinaryMask* mask = nullptr, const TraceParams& params = {});

/// Step with venc·dt <= 0.5·min voxel spacing, 1 ms when venc is not positive.
double default_dt(const VelocityField& field);

struct PathlineStats {
  double max_speed = 0.0;
  double fraction_above = 0.0;
  std::size_t vertex_count = 0;
  std::vector<double> per_line_max;
};

PathlineStats pathline_stats(const PathlineSet& set, double v_threshold = 1.0);

/// "CPLN\0\1\0\0" binary: little-endian header, line offsets, termination codes and
/// float32 (x, y, z, t, speed) records.
std::string pathlines_to_binary(const PathlineSet& set);
PathlineSet pathlines_from_binary(std::string_view bytes);

Json to_json(const PathlineSet& set);
Json to_json(const PathlineStats& stats);

}  // namespace carotid
