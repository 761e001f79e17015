#include "proctor/error.hpp"

namespace proctor {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::IoError: return "IoError";
    case Errc::OrderViolation: return "OrderViolation";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::NotARotation: return "NotARotation";
    case Errc::DegenerateEye: return "DegenerateEye";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::AllMissingFeature: return "AllMissingFeature";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MissingLabel: return "MissingLabel";
    case Errc::SingleClass: return "SingleClass";
    case Errc::TooFewMinority: return "TooFewMinority";
    case Errc::NonFiniteFeature: return "NonFiniteFeature";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::ScriptTooShort: return "ScriptTooShort";
    case Errc::ConfigError: return "ConfigError";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::HashMismatch: return "HashMismatch";
  }
  return "Unknown";
}

}  // namespace proctor
