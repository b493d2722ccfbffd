#pragma once

#include "carotid/volume.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace carotid {

enum class VolumeFormat { nifti, nrrd };

/// ".nii" / ".nii.gz" are NIfTI-1, ".nrrd" is NRRD; anything else is UnsupportedFormat.
VolumeFormat volume_format_from_path(const std::filesystem::path& path);

/// On-disk sample type. Masks default to uint8, everything else to float64 so
/// values survive a round trip exactly.
enum class SampleType { uint8, int16, uint16, int32, float32, float64 };

struct VolumeWriteOptions {
  SampleType sample_type = SampleType::float64;
  bool gzip = true;  // NRRD encoding; NIfTI compression follows the ".gz" suffix
};

/// Reads NIfTI-1 (sform preferred, then qform, then pixdim) or NRRD (space
/// directions and origin, or spacings). A fourth axis becomes the time axis in ms.
/// Throws UnsupportedFormat, CorruptHeader or IoFailure.
ScalarVolume load_volume(const std::filesystem::path& path);
ScalarVolume parse_nifti(std::string_view bytes);
ScalarVolume parse_nrrd(std::string_view bytes);

void save_volume(const ScalarVolume& volume, const std::filesystem::path& path,
                 const VolumeWriteOptions& options = {});
std::string encode_nifti(const ScalarVolume& volume, SampleType type);
std::string encode_nrrd(const ScalarVolume& volume, const VolumeWriteOptions& options);

/// Non-zero samples become foreground.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Assembles three time-resolved component volumes (values times `scale` give m/s).
/// Throws ShapeMismatch when geometry or timepoints differ, InvalidArgument for
/// fewer than two timepoints.
VelocityField load_flow(const std::filesystem::path& vx, const std::filesystem::path& vy,
                        const std::filesystem::path& vz, double venc, double cycle_length,
                        double scale = 1.0);
VelocityField assemble_flow(const ScalarVolume& vx, const ScalarVolume& vy, const ScalarVolume& vz,
                            double venc, double cycle_length, double scale = 1.0);
void save_flow(const VelocityField& field, const std::filesystem::path& vx,
               const std::filesystem::path& vy, const std::filesystem::path& vz,
               const VolumeWriteOptions& options = {});

/// gzip with a zeroed timestamp, so equal input gives equal bytes.
std::string gzip_compress(std::string_view bytes);
/// Accepts gzip or zlib streams. Throws CorruptHeader.
std::string gzip_decompress(std::string_view bytes);

}  // namespace carotid
