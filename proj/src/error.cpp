#include "carotid/error.hpp"

namespace carotid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonOrthonormalAxes: return "NonOrthonormalAxes";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegeneratePolyline: return "DegeneratePolyline";
    case ErrorCode::ParallelInitialNormal: return "ParallelInitialNormal";
    case ErrorCode::SeedOutsideMask: return "SeedOutsideMask";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::TooFewSeeds: return "TooFewSeeds";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::MinimumSeeds: return "MinimumSeeds";
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::ComponentTooSmall: return "ComponentTooSmall";
    case ErrorCode::RayMiss: return "RayMiss";
    case ErrorCode::NonpositiveReference: return "NonpositiveReference";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::SampleOutside: return "SampleOutside";
    case ErrorCode::FlatWaveform: return "FlatWaveform";
    case ErrorCode::EmptyLumen: return "EmptyLumen";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::EmptyIsoSurface: return "EmptyIsoSurface";
    case ErrorCode::NoUsableProfiles: return "NoUsableProfiles";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
  }
  return "Unknown";
}

}  // namespace carotid
