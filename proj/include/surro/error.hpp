#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace surro {

// Every failure the library reports. The identifier strings (see to_string)
// are stable: experiment sweeps write them into error rows.
enum class Errc {
  ShapeMismatch,
  NonBinaryTreatment,
  EmptyCohort,
  DomainMismatch,
  AllZeroWeights,
  NonFiniteInput,
  Separation,
  TooFewSamples,
  WidthMismatch,
  MissingOutcome,
  UnfittedNuisance,
  SingleArmData,
  DegenerateContrasts,
  PositivityViolation,
  ZeroDenominator,
  CaseMismatch,
  DimensionMismatch,
  NoAffectedSurrogate,
  RankDeficient,
  ParseError,
  SchemaError,
  ConfigError,
  IoError,
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

}  // namespace surro
