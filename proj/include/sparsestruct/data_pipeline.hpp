#ifndef SPARSESTRUCT_DATA_PIPELINE_HPP_
#define SPARSESTRUCT_DATA_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sparsestruct/structure.hpp"

namespace sparsestruct {

/// Symmetric n x n similarity with unit diagonal.
struct SimilarityMatrix {
  MatrixX<double> values;
  std::vector<std::string> names;

  int size() const { return static_cast<int>(values.rows()); }
  void validate(double tol = 1e-9) const;
};

struct RescaleReport {
  double shift = 0.0;  // subtracted from every observed entry
  double scale = 1.0;  // multiplier applied after the shift
  std::vector<bool> reference_mask_pattern;
  int reference_columns = 0;
};

/// Linear transform giving the reference submatrix (the columns with the
/// most common missingness pattern; all columns for complete data) global
/// mean 0 and max entry of (1/m) D D^T equal to 1, applied to every entry.
std::pair<DataMatrix, RescaleReport> rescale(const DataMatrix& data);

struct SampledFeatures {
  DataMatrix data;
  int clipped_eigenvalues = 0;
  double clipped_mass = 0.0;  // sum of |negative eigenvalues| replaced
};

inline constexpr int kDefaultSimilarityFeatures = 2000;

/// m i.i.d. columns from N(0, sim) after clipping negative eigenvalues to
/// 1e-8. Column k uses its own seed stream, so generation splits by column.
SampledFeatures similarity_to_features(const SimilarityMatrix& sim,
                                       int m = kDefaultSimilarityFeatures,
                                       std::uint64_t seed = 0);

enum class MatrixKind { kFeatures, kSimilarity };
enum class TableFormat { kAuto, kCsv, kTsv };

using LoadedMatrix = std::variant<DataMatrix, SimilarityMatrix>;

/// Reads a table with a header row and an object-name first column. Empty
/// or "NA" cells are missing. The kind comes from `kind`, else a sidecar
/// `<path>.json` with {"kind": "similarity" | "features"}, else features.
LoadedMatrix load_matrix(const std::string& path, std::optional<MatrixKind> kind = {},
                         TableFormat format = TableFormat::kAuto);

/// Square numeric table (names in header and first column), no missing cells.
SimilarityMatrix load_square_matrix(const std::string& path,
                                    TableFormat format = TableFormat::kAuto);

/// Names row/columns; missing cells written as NA.
void write_matrix_csv(const std::string& path, const DataMatrix& data);
void write_square_csv(const std::string& path, const MatrixX<double>& m,
                      const std::vector<std::string>& names);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_DATA_PIPELINE_HPP_
