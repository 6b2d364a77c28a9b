#include "surro/cohort.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace surro {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

void write_number(std::ostream& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

}  // namespace

Cohort Cohort::subset(const std::vector<Eigen::Index>& rows) const {
  Cohort out;
  out.n = rows.size();
  out.population = population;
  out.x_names = x_names;
  out.s_names = s_names;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.s.resize(static_cast<Eigen::Index>(rows.size()), s.cols());
  if (t) out.t = IntVector(static_cast<Eigen::Index>(rows.size()));
  if (y) out.y = Vector(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    const auto ii = static_cast<Eigen::Index>(i);
    out.x.row(ii) = x.row(r);
    out.s.row(ii) = s.row(r);
    if (t) (*out.t)(ii) = (*t)(r);
    if (y) (*out.y)(ii) = (*y)(r);
  }
  return out;
}

Matrix Cohort::xs() const {
  Matrix out(x.rows(), x.cols() + s.cols());
  out << x, s;
  return out;
}

void validate_cohort(const Cohort& c) {
  if (c.n == 0) throw Error(Errc::EmptyCohort, "cohort has no units");
  const auto n = static_cast<Eigen::Index>(c.n);
  if (c.x.rows() != n) throw Error(Errc::ShapeMismatch, "x has " + std::to_string(c.x.rows()) + " rows, expected " + std::to_string(n));
  if (c.s.rows() != n) throw Error(Errc::ShapeMismatch, "s has " + std::to_string(c.s.rows()) + " rows, expected " + std::to_string(n));
  if (c.s.cols() < 1) throw Error(Errc::ShapeMismatch, "cohort needs at least one surrogate column");
  if (c.t && c.t->size() != n) throw Error(Errc::ShapeMismatch, "t has length " + std::to_string(c.t->size()) + ", expected " + std::to_string(n));
  if (c.y && c.y->size() != n) throw Error(Errc::ShapeMismatch, "y has length " + std::to_string(c.y->size()) + ", expected " + std::to_string(n));
  if (!c.x_names.empty() && static_cast<Eigen::Index>(c.x_names.size()) != c.x.cols()) {
    throw Error(Errc::ShapeMismatch, "x_names does not match the number of x columns");
  }
  if (!c.s_names.empty() && static_cast<Eigen::Index>(c.s_names.size()) != c.s.cols()) {
    throw Error(Errc::ShapeMismatch, "s_names does not match the number of s columns");
  }
  if (c.t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const int v = (*c.t)(i);
      if (v != 0 && v != 1) {
        throw Error(Errc::NonBinaryTreatment, "t[" + std::to_string(i) + "] = " + std::to_string(v));
      }
    }
  }
}

std::vector<std::string> x_column_names(const Cohort& c) {
  if (!c.x_names.empty()) return c.x_names;
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < c.x.cols(); ++j) names.push_back(std::to_string(j));
  return names;
}

std::vector<std::string> s_column_names(const Cohort& c) {
  if (!c.s_names.empty()) return c.s_names;
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < c.s.cols(); ++j) names.push_back(std::to_string(j));
  return names;
}

CsvReadResult read_cohort_csv(std::istream& in, const RoleMap& roles, bool complete_cases) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(Errc::SchemaError, "missing header row");
  const auto header = split_fields(line);

  std::vector<std::size_t> x_idx, s_idx;
  std::vector<std::string> x_names, s_names;
  std::optional<std::size_t> t_idx, y_idx;
  auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };

  if (roles.x_columns.empty() && roles.s_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      const auto& h = header[i];
      if (starts_with(h, "x_")) {
        x_idx.push_back(i);
        x_names.push_back(roles.strip_prefix ? h.substr(2) : h);
      } else if (starts_with(h, "s_")) {
        s_idx.push_back(i);
        s_names.push_back(roles.strip_prefix ? h.substr(2) : h);
      }
    }
  } else {
    for (const auto& name : roles.x_columns) {
      const auto idx = find_column(name);
      if (!idx) throw Error(Errc::SchemaError, "missing covariate column '" + name + "'");
      x_idx.push_back(*idx);
      x_names.push_back(name);
    }
    for (const auto& name : roles.s_columns) {
      const auto idx = find_column(name);
      if (!idx) throw Error(Errc::SchemaError, "missing surrogate column '" + name + "'");
      s_idx.push_back(*idx);
      s_names.push_back(name);
    }
  }
  t_idx = find_column(roles.t_column);
  y_idx = find_column(roles.y_column);
  if (roles.require_t && !t_idx) throw Error(Errc::SchemaError, "missing treatment column '" + roles.t_column + "'");
  if (roles.require_y && !y_idx) throw Error(Errc::SchemaError, "missing outcome column '" + roles.y_column + "'");
  if (s_idx.empty()) throw Error(Errc::SchemaError, "no surrogate columns (s_*) in header");

  std::vector<std::vector<double>> xr, sr;
  std::vector<int> tr;
  std::vector<double> yr;
  std::vector<std::size_t> dropped;
  std::size_t data_row = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++data_row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + " (row " + std::to_string(data_row) + "): expected " +
                                        std::to_string(header.size()) + " cells, found " + std::to_string(fields.size()));
    }
    bool incomplete = false;
    auto parse = [&](std::size_t col, double& out) {
      const auto& cell = fields[col];
      if (cell.empty()) {
        if (!complete_cases) {
          throw Error(Errc::ParseError, "line " + std::to_string(line_no) + " (row " + std::to_string(data_row) +
                                            "), column '" + header[col] + "': empty cell");
        }
        incomplete = true;
        return;
      }
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(out)) {
        throw Error(Errc::ParseError, "line " + std::to_string(line_no) + " (row " + std::to_string(data_row) +
                                          "), column '" + header[col] + "': not a number: '" + cell + "'");
      }
    };

    std::vector<double> xv(x_idx.size()), sv(s_idx.size());
    for (std::size_t j = 0; j < x_idx.size(); ++j) parse(x_idx[j], xv[j]);
    for (std::size_t j = 0; j < s_idx.size(); ++j) parse(s_idx[j], sv[j]);
    double tv = 0.0, yv = 0.0;
    if (t_idx) parse(*t_idx, tv);
    if (y_idx) parse(*y_idx, yv);
    if (incomplete) {
      dropped.push_back(line_no);
      continue;
    }
    if (t_idx && tv != std::floor(tv)) {
      throw Error(Errc::NonBinaryTreatment, "line " + std::to_string(line_no) + " (row " + std::to_string(data_row) +
                                                "): treatment value " + fields[*t_idx]);
    }
    xr.push_back(std::move(xv));
    sr.push_back(std::move(sv));
    if (t_idx) tr.push_back(static_cast<int>(tv));
    if (y_idx) yr.push_back(yv);
  }

  CsvReadResult result;
  Cohort& c = result.cohort;
  c.n = xr.size();
  const auto n = static_cast<Eigen::Index>(c.n);
  c.x.resize(n, static_cast<Eigen::Index>(x_idx.size()));
  c.s.resize(n, static_cast<Eigen::Index>(s_idx.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < c.x.cols(); ++j) c.x(i, j) = xr[i][j];
    for (Eigen::Index j = 0; j < c.s.cols(); ++j) c.s(i, j) = sr[i][j];
  }
  if (t_idx) c.t = Eigen::Map<IntVector>(tr.data(), n);
  if (y_idx) c.y = Eigen::Map<Vector>(yr.data(), n);
  c.x_names = std::move(x_names);
  c.s_names = std::move(s_names);
  result.dropped_lines = std::move(dropped);
  validate_cohort(c);
  return result;
}

void write_cohort_csv(std::ostream& out, const Cohort& c) {
  const auto xn = x_column_names(c);
  const auto sn = s_column_names(c);
  bool first = true;
  auto sep = [&] {
    if (!first) out << ',';
    first = false;
  };
  for (const auto& name : xn) { sep(); out << "x_" << name; }
  for (const auto& name : sn) { sep(); out << "s_" << name; }
  if (c.t) { sep(); out << 't'; }
  if (c.y) { sep(); out << 'y'; }
  out << '\n';
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(c.n); ++i) {
    first = true;
    for (Eigen::Index j = 0; j < c.x.cols(); ++j) { sep(); write_number(out, c.x(i, j)); }
    for (Eigen::Index j = 0; j < c.s.cols(); ++j) { sep(); write_number(out, c.s(i, j)); }
    if (c.t) { sep(); out << (*c.t)(i); }
    if (c.y) { sep(); write_number(out, (*c.y)(i)); }
    out << '\n';
  }
}

// -- DensityRatio ------------------------------------------------------------

bool InclusionCriterion::includes(const Eigen::Ref<const Vector>& x) const {
  const double v = x(feature);
  switch (op) {
    case Op::greater: return v > threshold;
    case Op::greater_equal: return v >= threshold;
    case Op::less: return v < threshold;
    case Op::less_equal: return v <= threshold;
  }
  return false;
}

DensityRatio DensityRatio::inclusion(const InclusionCriterion& criterion, const Cohort& observational) {
  if (criterion.feature < 0 || criterion.feature >= observational.k()) {
    throw Error(Errc::DomainMismatch, "inclusion criterion refers to covariate " + std::to_string(criterion.feature));
  }
  std::size_t included = 0;
  for (Eigen::Index i = 0; i < observational.x.rows(); ++i) {
    if (criterion.includes(observational.x.row(i).transpose())) ++included;
  }
  if (included == 0) throw Error(Errc::DomainMismatch, "inclusion criterion excludes every unit");
  DensityRatio dr;
  dr.kind_ = Kind::inclusion_indicator;
  dr.domain_ = observational.k();
  dr.criterion_ = criterion;
  dr.scale_ = static_cast<double>(observational.x.rows()) / static_cast<double>(included);
  return dr;
}

DensityRatio DensityRatio::tabulated(Eigen::Index feature, std::map<long, double> table, Eigen::Index domain_width) {
  if (feature < 0 || feature >= domain_width) {
    throw Error(Errc::DomainMismatch, "stratum covariate outside the domain");
  }
  for (const auto& [key, value] : table) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw Error(Errc::NonFiniteInput, "density ratio for stratum " + std::to_string(key) + " is not a nonnegative number");
    }
  }
  DensityRatio dr;
  dr.kind_ = Kind::tabulated;
  dr.domain_ = domain_width;
  dr.stratum_feature_ = feature;
  dr.table_ = std::move(table);
  return dr;
}

double DensityRatio::operator()(const Eigen::Ref<const Vector>& x) const {
  if (domain_ && x.size() != *domain_) {
    throw Error(Errc::DomainMismatch, "covariate vector has length " + std::to_string(x.size()) + ", ratio expects " +
                                          std::to_string(*domain_));
  }
  switch (kind_) {
    case Kind::identity:
      return 1.0;
    case Kind::inclusion_indicator:
      return criterion_->includes(x) ? scale_ : 0.0;
    case Kind::tabulated: {
      const auto key = std::lround(x(stratum_feature_));
      const auto it = table_.find(key);
      if (it == table_.end()) throw Error(Errc::DomainMismatch, "no density ratio for stratum " + std::to_string(key));
      return it->second;
    }
  }
  return 1.0;
}

Vector DensityRatio::evaluate(const Matrix& x) const {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = (*this)(x.row(i).transpose());
  return out;
}

double density_ratio(const DensityRatio& dr, const Eigen::Ref<const Vector>& x) { return dr(x); }

}  // namespace surro
