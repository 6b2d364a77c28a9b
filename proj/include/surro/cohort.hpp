#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "surro/error.hpp"

namespace surro {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

enum class PopulationTag { observational, experimental };

// Rectangular data with role-tagged columns: pre-treatment covariates x (n x k),
// treatment t, post-treatment surrogates s (n x d) and outcome y. Either t or y
// may be absent as a whole column; treatment data and outcome data are often
// separate sources.
struct Cohort {
  std::size_t n = 0;
  Matrix x;
  std::optional<IntVector> t;
  Matrix s;
  std::optional<Vector> y;
  PopulationTag population = PopulationTag::observational;
  std::vector<std::string> x_names;
  std::vector<std::string> s_names;

  Eigen::Index k() const noexcept { return x.cols(); }
  Eigen::Index d() const noexcept { return s.cols(); }

  // Rows in the given order (duplicates allowed).
  Cohort subset(const std::vector<Eigen::Index>& rows) const;
  // Concatenation [x, s], the input of the surrogate index.
  Matrix xs() const;
};

// Throws Error{EmptyCohort | ShapeMismatch | NonBinaryTreatment} on the first
// violated invariant.
void validate_cohort(const Cohort& c);

// Default column names x_0.., s_0.. when the cohort carries none.
std::vector<std::string> x_column_names(const Cohort& c);
std::vector<std::string> s_column_names(const Cohort& c);

// -- CSV schema -------------------------------------------------------------
//
// Header row of role-prefixed names: x_<name>, s_<name>, t, y. Values use '.'
// as decimal separator; a missing cell is empty. Numbers are written with 17
// significant digits so that a write/read cycle is bit-exact.

struct RoleMap {
  // Empty vectors mean "infer from the x_/s_ prefixes".
  std::vector<std::string> x_columns;
  std::vector<std::string> s_columns;
  std::string t_column = "t";
  std::string y_column = "y";
  bool require_t = false;
  bool require_y = false;
  // Strip the x_/s_ prefix from inferred names.
  bool strip_prefix = true;
};

struct CsvReadResult {
  Cohort cohort;
  // 1-based file line numbers of incomplete rows that were dropped.
  std::vector<std::size_t> dropped_lines;
};

// complete_cases=true drops rows with any empty required cell (and records
// their line numbers); otherwise an empty cell is a ParseError.
CsvReadResult read_cohort_csv(std::istream& in, const RoleMap& roles = {},
                              bool complete_cases = true);
void write_cohort_csv(std::ostream& out, const Cohort& c);

// -- Density ratio p_e(x) / p_o(x) ----------------------------------------

struct InclusionCriterion {
  enum class Op { greater, greater_equal, less, less_equal };
  Eigen::Index feature = 0;
  Op op = Op::greater;
  double threshold = 0.0;

  bool includes(const Eigen::Ref<const Vector>& x) const;
};

class DensityRatio {
 public:
  enum class Kind { identity, inclusion_indicator, tabulated };

  static DensityRatio identity() { return DensityRatio(); }
  // Indicator of the criterion scaled so that its mean over `observational`
  // is exactly 1. Throws DomainMismatch if nothing is included.
  static DensityRatio inclusion(const InclusionCriterion& criterion, const Cohort& observational);
  // Strata are the integer values of covariate `feature`.
  static DensityRatio tabulated(Eigen::Index feature, std::map<long, double> table,
                                Eigen::Index domain_width);

  Kind kind() const noexcept { return kind_; }
  bool is_identity() const noexcept { return kind_ == Kind::identity; }

  double operator()(const Eigen::Ref<const Vector>& x) const;
  Vector evaluate(const Matrix& x) const;

  const std::optional<InclusionCriterion>& criterion() const noexcept { return criterion_; }
  double inclusion_scale() const noexcept { return scale_; }
  const std::map<long, double>& table() const noexcept { return table_; }

 private:
  DensityRatio() = default;

  Kind kind_ = Kind::identity;
  std::optional<Eigen::Index> domain_;
  std::optional<InclusionCriterion> criterion_;
  double scale_ = 1.0;
  Eigen::Index stratum_feature_ = 0;
  std::map<long, double> table_;
};

double density_ratio(const DensityRatio& dr, const Eigen::Ref<const Vector>& x);

}  // namespace surro
