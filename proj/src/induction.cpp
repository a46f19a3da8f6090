#include "sparsestruct/induction.hpp"

#include <cmath>
#include <random>

#include "sparsestruct/core_model.hpp"

namespace sparsestruct {

MatrixX<double> object_covariance(const Structure& s) {
  validate(s);
  // Schur complement onto the objects: cov_xx = (J_xx - J_xz J_zz^-1 J_zx)^-1.
  const int nx = s.n_objects();
  const int nz = s.n_clusters();
  const MatrixX<double> j = build_precision(s);
  const MatrixX<double> jxx = j.topLeftCorner(nx, nx);
  const MatrixX<double> jxz = j.topRightCorner(nx, nz);
  const MatrixX<double> jzz = j.bottomRightCorner(nz, nz);
  Eigen::LLT<MatrixX<double>> zz(jzz);
  if (zz.info() != Eigen::Success)
    throw NotPositiveDefinite("object_covariance: cluster block is not positive definite");
  const MatrixX<double> schur = jxx - jxz * zz.solve(jxz.transpose());
  Eigen::LLT<MatrixX<double>> xx(schur);
  if (xx.info() != Eigen::Success)
    throw NotPositiveDefinite("object_covariance: Schur complement is not positive definite");
  MatrixX<double> cov = xx.solve(MatrixX<double>::Identity(nx, nx));
  return 0.5 * (cov + cov.transpose());
}

MatrixX<double> raw_covariance_baseline(const DataMatrix& data) {
  data.validate();
  const MatrixX<double> d = data.mask.select(data.values, 0.0);
  return d * d.transpose() / static_cast<double>(data.n_features());
}

MatrixX<double> raw_covariance_baseline(const SimilarityMatrix& sim) { return sim.values; }

FeaturePrior::FeaturePrior(MatrixX<double> covariance, std::int64_t n_samples,
                           std::uint64_t seed)
    : covariance_(std::move(covariance)), n_samples_(n_samples), seed_(seed) {
  if (covariance_.rows() != covariance_.cols() || covariance_.rows() == 0)
    throw InvariantError("feature prior: covariance must be square and non-empty");
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, covariance_.cwiseAbs().maxCoeff()))
    throw InvariantError("feature prior: covariance is not symmetric");
  if (n_samples_ <= 0) throw InvariantError("feature prior: n_samples must be positive");
  n_objects_ = static_cast<int>(covariance_.rows());
  words_ = (n_objects_ + 63) / 64;

  MatrixX<double> jittered = covariance_;
  jittered.diagonal().array() += 1e-8;
  Eigen::LLT<MatrixX<double>> llt(jittered);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("feature prior: covariance is not positive semidefinite");
  const MatrixX<double> l = llt.matrixL();

  const std::int64_t n_blocks = (n_samples_ + kBlockSize - 1) / kBlockSize;
  const int n = n_objects_;
  const int words = words_;
  const std::int64_t total = n_samples_;
  const std::uint64_t base = seed_;
  auto blocks = parallel_map<std::vector<std::uint64_t>>(
      static_cast<std::size_t>(n_blocks), [&](std::size_t b) {
        const std::int64_t begin = static_cast<std::int64_t>(b) * kBlockSize;
        const std::int64_t len = std::min<std::int64_t>(kBlockSize, total - begin);
        std::mt19937_64 rng(derive_seed(base, b));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<std::uint64_t> out(static_cast<std::size_t>(len) * words, 0);
        MatrixX<double> z(n, len);
        for (std::int64_t s = 0; s < len; ++s)
          for (int i = 0; i < n; ++i) z(i, s) = normal(rng);
        const MatrixX<double> f = l.triangularView<Eigen::Lower>() * z;
        for (std::int64_t s = 0; s < len; ++s) {
          std::uint64_t* row = out.data() + s * words;
          for (int i = 0; i < n; ++i)
            if (f(i, s) > 0.0) row[i / 64] |= std::uint64_t{1} << (i % 64);
        }
        return out;
      });
  bits_.reserve(static_cast<std::size_t>(n_samples_) * words_);
  for (const auto& b : blocks) bits_.insert(bits_.end(), b.begin(), b.end());
}

std::vector<std::uint64_t> FeaturePrior::mask_of(const std::vector<int>& objects) const {
  std::vector<std::uint64_t> mask(words_, 0);
  for (int o : objects) {
    if (o < 0 || o >= n_objects_)
      throw InvariantError("feature prior: object index " + std::to_string(o) +
                           " out of range");
    mask[o / 64] |= std::uint64_t{1} << (o % 64);
  }
  return mask;
}

std::int64_t FeaturePrior::count(const std::vector<int>& all_of) const {
  const std::vector<std::uint64_t> mask = mask_of(all_of);
  std::int64_t c = 0;
  for (std::int64_t s = 0; s < n_samples_; ++s) {
    const std::uint64_t* row = bits_.data() + s * words_;
    bool ok = true;
    for (int w = 0; w < words_ && ok; ++w) ok = (row[w] & mask[w]) == mask[w];
    c += ok;
  }
  return c;
}

std::int64_t FeaturePrior::count(const std::vector<int>& premises,
                                 const std::vector<int>& conclusion) const {
  std::vector<int> both = premises;
  both.insert(both.end(), conclusion.begin(), conclusion.end());
  return count(both);
}

double argument_strength(const FeaturePrior& prior, const InductionArgument& arg) {
  if (arg.premises.empty()) throw InvariantError("induction: argument has no premises");
  std::vector<int> conclusion;
  for (int y : arg.conclusion)
    if (std::find(arg.premises.begin(), arg.premises.end(), y) == arg.premises.end())
      conclusion.push_back(y);
  const std::int64_t given = prior.count(arg.premises);
  if (given == 0) {
    std::string set;
    for (int p : arg.premises) set += (set.empty() ? "" : ",") + std::to_string(p);
    throw InsufficientSamplesError("induction: no sampled feature is consistent with premises {" +
                                   set + "}; raise the sample count");
  }
  if (conclusion.empty()) return 1.0;
  return static_cast<double>(prior.count(arg.premises, conclusion)) /
         static_cast<double>(given);
}

std::vector<double> argument_strengths(const FeaturePrior& prior,
                                       const std::vector<InductionArgument>& args) {
  std::vector<double> out;
  out.reserve(args.size());
  for (const auto& a : args) out.push_back(argument_strength(prior, a));
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvariantError("pearson: length mismatch");
  if (a.size() < 3) throw InvariantError("pearson: need at least 3 pairs");
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw InvariantError("pearson: constant input");
  return sab / std::sqrt(saa * sbb);
}

double evaluate_task(const std::vector<double>& strengths,
                     const std::vector<double>& human_ranks) {
  return pearson(strengths, human_ranks);
}

}  // namespace sparsestruct
