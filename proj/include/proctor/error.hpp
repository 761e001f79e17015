#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace proctor {

enum class Errc {
  MalformedRecord,
  SchemaViolation,
  IoError,
  OrderViolation,
  DegenerateInput,
  NonFiniteInput,
  NotARotation,
  DegenerateEye,
  TooFewPoints,
  NotNormalized,
  DimensionMismatch,
  SchemaMismatch,
  AllMissingFeature,
  EmptyInput,
  MissingLabel,
  SingleClass,
  TooFewMinority,
  NonFiniteFeature,
  ShapeMismatch,
  EmptyDataset,
  LengthMismatch,
  EmptyMatrix,
  ScriptTooShort,
  ConfigError,
  VersionMismatch,
  HashMismatch,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace proctor
