#include "sparsestruct/data_pipeline.hpp"

#include <json.hpp>

#include <cerrno>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace sparsestruct {

namespace {

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::string> row_names;
  std::vector<std::vector<std::optional<double>>> cells;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == delim && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

char delimiter_for(const std::string& path, TableFormat format) {
  if (format == TableFormat::kCsv) return ',';
  if (format == TableFormat::kTsv) return '\t';
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  return (ext == "tsv" || ext == "tab" || ext == "txt") ? '\t' : ',';
}

RawTable read_table(const std::string& path, TableFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  const char delim = delimiter_for(path, format);
  RawTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, delim);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(path + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(t.header.size()));
    t.row_names.push_back(fields[0]);
    std::vector<std::optional<double>> row;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      if (f.empty() || f == "NA" || f == "na" || f == "NaN" || f == "nan") {
        row.emplace_back();
        continue;
      }
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
        throw ParseError(path + ": non-numeric cell '" + f + "' at row " +
                         std::to_string(line_no) + ", column " + std::to_string(c + 1));
      row.emplace_back(v);
    }
    t.cells.push_back(std::move(row));
  }
  if (t.header.size() < 2) throw ParseError(path + ": header needs a name column and data");
  if (t.cells.empty()) throw ParseError(path + ": no data rows");
  return t;
}

std::optional<MatrixKind> sidecar_kind(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ".json: " + e.what());
  }
  const std::string kind = j.value("kind", "features");
  if (kind == "similarity") return MatrixKind::kSimilarity;
  if (kind == "features") return MatrixKind::kFeatures;
  throw ParseError(path + ".json: unknown kind '" + kind + "'");
}

SimilarityMatrix square_from_table(const std::string& path, const RawTable& t,
                                   bool unit_diagonal) {
  const std::size_t n = t.cells.size();
  if (t.header.size() - 1 != n)
    throw ParseError(path + ": similarity matrix must be square (" + std::to_string(n) +
                     " rows, " + std::to_string(t.header.size() - 1) + " columns)");
  SimilarityMatrix s;
  s.names = t.row_names;
  s.values.resize(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (t.cells[i][j]) {
        s.values(i, j) = *t.cells[i][j];
      } else if (i == j && unit_diagonal) {
        s.values(i, j) = 1.0;
      } else {
        throw ParseError(path + ": missing cell at row " + std::to_string(i + 1) +
                         ", column " + std::to_string(j + 1));
      }
    }
  double worst = 0.0;
  std::size_t wi = 0;
  std::size_t wj = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::abs(s.values(i, j) - s.values(j, i));
      if (d > worst) {
        worst = d;
        wi = i;
        wj = j;
      }
    }
  if (worst > 1e-6)
    throw ParseError(path + ": matrix not symmetric; worst pair (" + s.names[wi] + ", " +
                     s.names[wj] + ") differs by " + std::to_string(worst));
  s.values = 0.5 * (s.values + s.values.transpose()).eval();
  if (unit_diagonal) {
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(s.values(i, i) - 1.0) > 1e-6)
        throw ParseError(path + ": similarity diagonal at '" + s.names[i] + "' is not 1");
    s.values.diagonal().setOnes();
  }
  return s;
}

void write_names_row(std::ostream& out, const std::string& corner,
                     const std::vector<std::string>& names) {
  out << corner;
  for (const auto& n : names) out << ',' << n;
  out << '\n';
}

}  // namespace

void SimilarityMatrix::validate(double tol) const {
  if (values.rows() != values.cols()) throw InvariantError("similarity: not square");
  if ((values - values.transpose()).cwiseAbs().maxCoeff() > tol)
    throw InvariantError("similarity: not symmetric");
  if ((values.diagonal().array() - 1.0).abs().maxCoeff() > tol)
    throw InvariantError("similarity: diagonal is not 1");
}

std::pair<DataMatrix, RescaleReport> rescale(const DataMatrix& data) {
  data.validate();
  std::vector<MaskGroup> groups = mask_groups(data);
  std::size_t ref = 0;
  for (std::size_t g = 1; g < groups.size(); ++g)
    if (groups[g].columns.size() > groups[ref].columns.size()) ref = g;
  const MaskGroup& g = groups[ref];
  if (g.observed.empty()) throw DegenerateDataError("rescale: reference columns are empty");

  const MatrixX<double> sub = data.values(g.observed, g.columns);
  RescaleReport report;
  report.shift = sub.mean();
  const MatrixX<double> centered = sub.array() - report.shift;
  const MatrixX<double> gram =
      centered * centered.transpose() / static_cast<double>(g.columns.size());
  const double max_entry = gram.maxCoeff();
  if (!(max_entry > 1e-300))
    throw DegenerateDataError("rescale: data are constant, scale undefined");
  report.scale = 1.0 / std::sqrt(max_entry);
  report.reference_columns = static_cast<int>(g.columns.size());
  report.reference_mask_pattern.assign(data.n_objects(), false);
  for (int o : g.observed) report.reference_mask_pattern[o] = true;

  DataMatrix out = data;
  out.values = ((data.values.array() - report.shift) * report.scale).matrix();
  out.values = data.mask.select(out.values, 0.0);
  return {std::move(out), std::move(report)};
}

SampledFeatures similarity_to_features(const SimilarityMatrix& sim, int m,
                                       std::uint64_t seed) {
  if (m <= 0) throw InvariantError("similarity_to_features: m must be positive");
  sim.validate(1e-6);
  Eigen::SelfAdjointEigenSolver<MatrixX<double>> eig(sim.values);
  if (eig.info() != Eigen::Success)
    throw InvariantError("similarity_to_features: eigendecomposition failed");
  VectorX<double> lambda = eig.eigenvalues();
  SampledFeatures out;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < 0.0) {
      ++out.clipped_eigenvalues;
      out.clipped_mass += -lambda[i];
      lambda[i] = 1e-8;
    }
  }
  const MatrixX<double> factor = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  const int n = sim.size();
  MatrixX<double> z(n, m);
  for (int k = 0; k < m; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) z(i, k) = normal(rng);
  }
  out.data = DataMatrix::from_values(factor * z);
  out.data.object_names = sim.names;
  return out;
}

LoadedMatrix load_matrix(const std::string& path, std::optional<MatrixKind> kind,
                         TableFormat format) {
  const RawTable t = read_table(path, format);
  const MatrixKind k = kind ? *kind : sidecar_kind(path).value_or(MatrixKind::kFeatures);
  if (k == MatrixKind::kSimilarity) return square_from_table(path, t, true);

  DataMatrix d;
  const std::size_t n = t.cells.size();
  const std::size_t m = t.header.size() - 1;
  d.values = MatrixX<double>::Zero(n, m);
  d.mask = MaskMatrix::Constant(n, m, false);
  d.object_names = t.row_names;
  d.feature_names.assign(t.header.begin() + 1, t.header.end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (t.cells[i][j]) {
        d.values(i, j) = *t.cells[i][j];
        d.mask(i, j) = true;
      }
  for (std::size_t i = 0; i < n; ++i)
    if (!d.mask.row(i).any())
      throw ParseError(path + ": object '" + d.object_names[i] + "' has no observed values");
  return d;
}

SimilarityMatrix load_square_matrix(const std::string& path, TableFormat format) {
  return square_from_table(path, read_table(path, format), false);
}

void write_matrix_csv(const std::string& path, const DataMatrix& data) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out.precision(17);
  std::vector<std::string> features = data.feature_names;
  if (features.empty())
    for (int k = 0; k < data.n_features(); ++k) features.push_back("f" + std::to_string(k));
  write_names_row(out, "object", features);
  for (int i = 0; i < data.n_objects(); ++i) {
    out << (i < static_cast<int>(data.object_names.size()) ? data.object_names[i]
                                                           : "o" + std::to_string(i));
    for (int k = 0; k < data.n_features(); ++k) {
      out << ',';
      if (data.mask(i, k))
        out << data.values(i, k);
      else
        out << "NA";
    }
    out << '\n';
  }
}

void write_square_csv(const std::string& path, const MatrixX<double>& m,
                      const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out.precision(17);
  write_names_row(out, "object", names);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << names[i];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
    out << '\n';
  }
}

}  // namespace sparsestruct
