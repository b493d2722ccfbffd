#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace carotid {

enum class ErrorCode {
  NonOrthonormalAxes,
  InvalidArgument,
  DegeneratePolyline,
  ParallelInitialNormal,
  SeedOutsideMask,
  Disconnected,
  TooFewSeeds,
  IndexOutOfRange,
  MinimumSeeds,
  GridTooSmall,
  EmptyMask,
  ComponentTooSmall,
  RayMiss,
  NonpositiveReference,
  NoOverlap,
  SampleOutside,
  FlatWaveform,
  EmptyLumen,
  InvalidStep,
  EmptyIsoSurface,
  NoUsableProfiles,
  IoFailure,
  SpecInvalid,
  UnsupportedFormat,
  CorruptHeader,
  ShapeMismatch,
  SchemaVersionUnsupported,
  ValidationFailed,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying one of the named failure modes of the engine.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace carotid
