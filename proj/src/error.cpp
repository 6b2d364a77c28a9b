#include "surro/error.hpp"

namespace surro {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonBinaryTreatment: return "NonBinaryTreatment";
    case Errc::EmptyCohort: return "EmptyCohort";
    case Errc::DomainMismatch: return "DomainMismatch";
    case Errc::AllZeroWeights: return "AllZeroWeights";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::Separation: return "Separation";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::MissingOutcome: return "MissingOutcome";
    case Errc::UnfittedNuisance: return "UnfittedNuisance";
    case Errc::SingleArmData: return "SingleArmData";
    case Errc::DegenerateContrasts: return "DegenerateContrasts";
    case Errc::PositivityViolation: return "PositivityViolation";
    case Errc::ZeroDenominator: return "ZeroDenominator";
    case Errc::CaseMismatch: return "CaseMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NoAffectedSurrogate: return "NoAffectedSurrogate";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace surro
