#ifndef SPARSESTRUCT_INDUCTION_HPP_
#define SPARSESTRUCT_INDUCTION_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sparsestruct/data_pipeline.hpp"
#include "sparsestruct/structure.hpp"

namespace sparsestruct {

inline constexpr std::int64_t kDefaultInductionSamples = 1000000;

class InsufficientSamplesError : public DegenerateDataError {
 public:
  using DegenerateDataError::DegenerateDataError;
};

/// Object block of J^-1, latent cluster nodes marginalized out.
MatrixX<double> object_covariance(const Structure& s);

/// (1/m) D D^T for features; similarity matrices are returned as they are.
MatrixX<double> raw_covariance_baseline(const DataMatrix& data);
MatrixX<double> raw_covariance_baseline(const SimilarityMatrix& sim);

/// Binary features drawn from N(0, covariance) and thresholded at 0. The
/// draws are stored as sign bits, one row of 64-bit words per sample.
class FeaturePrior {
 public:
  FeaturePrior(MatrixX<double> covariance, std::int64_t n_samples, std::uint64_t seed);

  int n_objects() const { return n_objects_; }
  std::int64_t n_samples() const { return n_samples_; }
  std::uint64_t seed() const { return seed_; }
  const MatrixX<double>& covariance() const { return covariance_; }

  /// Samples with every object in `all_of` above threshold.
  std::int64_t count(const std::vector<int>& all_of) const;
  std::int64_t count(const std::vector<int>& premises, const std::vector<int>& conclusion) const;

  static constexpr std::int64_t kBlockSize = 1 << 16;

 private:
  std::vector<std::uint64_t> mask_of(const std::vector<int>& objects) const;

  MatrixX<double> covariance_;
  std::int64_t n_samples_;
  std::uint64_t seed_;
  int n_objects_;
  int words_;
  std::vector<std::uint64_t> bits_;
};

struct InductionArgument {
  std::vector<int> premises;    // all carry the property
  std::vector<int> conclusion;
};

/// P(f_Y = 1 | f_X = 1) by counting samples. Premises are dropped from the
/// conclusion first, so an entailed conclusion gives exactly 1.
double argument_strength(const FeaturePrior& prior, const InductionArgument& arg);

std::vector<double> argument_strengths(const FeaturePrior& prior,
                                       const std::vector<InductionArgument>& args);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Pearson correlation of model strengths with mean human ranks.
double evaluate_task(const std::vector<double>& strengths,
                     const std::vector<double>& human_ranks);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_INDUCTION_HPP_
