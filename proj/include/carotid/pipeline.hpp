#pragma once

#include "carotid/biomarkers.hpp"
#include "carotid/centerline.hpp"
#include "carotid/contour.hpp"
#include "carotid/session.hpp"
#include "carotid/surface.hpp"
#include "carotid/volume.hpp"

#include <string>
#include <vector>

namespace carotid {

// Mask conventions: seg3d_mask labels the vessel wall (the annulus between lumen
// and outer wall); pcmra_mask labels flowing blood and gates pathlines.

/// Non-wall voxels that are not 6-connected to any grid corner.
BinaryMask lumen_from_wall(const BinaryMask& wall);
/// Wall plus the lumen it encloses.
BinaryMask vessel_from_wall(const BinaryMask& wall);

/// Nearest-neighbour slice of a mask on the plane's pixel grid.
Mask2D slice_mask(const BinaryMask& mask, const CrossSectionPlane& plane);

/// Lumen = non-wall pixels 4-connected to the plane center; outer wall = that
/// lumen with the wall pixels around it, holes filled. Both are fitted with
/// fit_contour_to_mask. Throws EmptyMask when the center is not enclosed by wall,
/// ComponentTooSmall when a region is too small to fit.
SliceAnnotation annotation_from_wall_slice(const Mask2D& wall, int plane_id, const FitParams& params = {});
SliceAnnotation autofit_plane(const BinaryMask& wall, const CrossSectionPlane& plane, const FitParams& params = {});

/// Lumen and outer-wall regions of a wall slice as used by the fit.
struct WallSliceRegions {
  Mask2D lumen;
  Mask2D outer;
};
WallSliceRegions wall_slice_regions(const Mask2D& wall);

struct AutofitFailure {
  int plane_id = 0;
  std::string reason;
};

struct AutofitResult {
  std::vector<SliceAnnotation> annotations;  // plane order
  std::vector<AutofitFailure> failures;
};

/// Fits every plane; planes that cannot be fitted are reported, not thrown.
AutofitResult autofit_planes(const BinaryMask& wall, const std::vector<CrossSectionPlane>& planes,
                             const FitParams& params = {}, int threads = 0);

/// Planes for all centerlines with ids running on across centerlines.
std::vector<CrossSectionPlane> planes_for(const std::vector<Centerline>& centerlines,
                                          const SessionParameters& params);

BiomarkerParams biomarker_params(const SessionParameters& params);

struct WallMeshes {
  SurfaceMesh inner;  // lumen boundary, VWT scalars when profiles were given
  SurfaceMesh outer;
};

/// Marching cubes of the lumen and of the whole vessel derived from a wall mask;
/// VWT profiles (when non-empty) are mapped onto the inner surface.
WallMeshes wall_meshes(const BinaryMask& wall, const std::vector<CrossSectionPlane>& planes,
                       const std::vector<VwtProfile>& profiles, std::optional<double> spacing = std::nullopt);

}  // namespace carotid
