#pragma once

#include "carotid/centerline.hpp"
#include "carotid/contour.hpp"
#include "carotid/json_util.hpp"
#include "carotid/volume.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace carotid {

inline constexpr int kSessionVersion = 1;
inline constexpr int kStudyVersion = 1;

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string base64_encode(std::string_view bytes);
/// Throws InvalidArgument on malformed input.
std::string base64_decode(std::string_view text);

// ---------------------------------------------------------------------------
// Study

/// Path of a volume file as written in a manifest or session (relative to that
/// file's directory) together with the content hash at the time of writing.
struct VolumeRef {
  std::string role;  // bb, tof, pcmra_mask, seg3d_mask, flow_vx, flow_vy, flow_vz
  std::string path;
  std::string sha256;

  bool operator==(const VolumeRef&) const = default;
};

struct FlowInfo {
  double venc = 0.0;          // m/s
  double cycle_length = 0.0;  // ms
  double scale = 1.0;         // stored value times scale gives m/s

  bool operator==(const FlowInfo&) const = default;
};

/// Images of one examination. Any subset may be present, but at least one.
struct Study {
  std::string id;
  std::optional<ScalarVolume> bb;
  std::optional<ScalarVolume> tof;
  std::optional<VelocityField> flow;
  std::optional<BinaryMask> pcmra_mask;
  std::optional<BinaryMask> seg3d_mask;
  std::vector<VolumeRef> files;  // as read from, or written to, the manifest
  std::optional<FlowInfo> flow_info;
  Json extras = Json::object();  // free-form manifest entries (e.g. phantom truth)
};

/// Writes each present volume next to `manifest` ("<role>.nii.gz", flow as three
/// 4D files) and the manifest itself as canonical JSON.
void save_study(Study& study, const std::filesystem::path& manifest);
/// Throws SchemaVersionUnsupported, IoFailure and the volume reader's errors.
Study load_study(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------
// Session

struct SessionParameters {
  double plane_spacing = 2.0;     // mm along the centerline
  double fov = 30.0;              // mm
  double in_plane_spacing = 0.3;  // mm
  double mu = 0.0035;             // Pa·s
  int n_rays = 36;
  double v_threshold = 1.0;       // m/s, pathline statistics
  double reference_window_mm = 10.0;

  bool operator==(const SessionParameters&) const = default;
};

struct Session {
  int version = kSessionVersion;
  std::string study_id;
  std::vector<Centerline> centerlines;
  std::vector<CrossSectionPlane> planes;
  std::vector<SliceAnnotation> annotations;
  SessionParameters parameters;
  std::vector<VolumeRef> volumes;

  bool operator==(const Session&) const = default;
};

Json to_json(const Centerline& c);
Centerline centerline_from_json(const Json& j);
Json to_json(const CrossSectionPlane& p);
CrossSectionPlane plane_from_json(const Json& j);
Json to_json(const ClosedSplineContour& c);
ClosedSplineContour contour_from_json(const Json& j);
Json to_json(const SliceAnnotation& a);
SliceAnnotation annotation_from_json(const Json& j);
Json to_json(const SessionParameters& p);
SessionParameters session_parameters_from_json(const Json& j);
Json to_json(const Session& s);

/// Checks version, plane references and contour invariants. Throws
/// SchemaVersionUnsupported or ValidationFailed naming the first problem.
Session session_from_json(const Json& j);

std::string session_to_string(const Session& s);
void save_session(const Session& s, const std::filesystem::path& path);
Session load_session(const std::filesystem::path& path);

/// Roles whose referenced file is missing or whose content hash changed.
std::vector<std::string> stale_volumes(const Session& s, const std::filesystem::path& base_dir);

}  // namespace carotid
