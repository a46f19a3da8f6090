#ifndef SPARSESTRUCT_CORE_MODEL_HPP_
#define SPARSESTRUCT_CORE_MODEL_HPP_

// Gaussian graph model: Laplacian, precision J = Laplacian + I / sigma2, and
// the likelihood of features under N(0, J^-1). Templated on scalar so tests
// can evaluate the same expressions in extended precision.

#include <cmath>
#include <numbers>
#include <string>

#include "sparsestruct/common.hpp"
#include "sparsestruct/structure.hpp"

namespace sparsestruct {

/// Full n_t x n_t weighted adjacency: cluster edges plus object attachments.
template <typename Scalar>
MatrixX<Scalar> adjacency_matrix(const BasicStructure<Scalar>& s) {
  const int nx = s.n_objects();
  const int nt = s.n_nodes();
  MatrixX<Scalar> a = MatrixX<Scalar>::Zero(nt, nt);
  a.bottomRightCorner(s.n_clusters(), s.n_clusters()) = s.cluster_edges;
  for (int x = 0; x < nx; ++x) {
    const int z = nx + s.assignment[x];
    a(x, z) = s.attach_weights[x];
    a(z, x) = s.attach_weights[x];
  }
  return a;
}

/// Off-diagonals -s_ij, diagonal sum_j s_ij.
template <typename Scalar>
MatrixX<Scalar> build_laplacian(const BasicStructure<Scalar>& s) {
  MatrixX<Scalar> a = adjacency_matrix(s);
  MatrixX<Scalar> lap = -a;
  lap.diagonal() = a.rowwise().sum();
  return lap;
}

template <typename Scalar>
MatrixX<Scalar> build_precision(const BasicStructure<Scalar>& s) {
  MatrixX<Scalar> j = build_laplacian(s);
  j.diagonal().array() += Scalar(1) / s.sigma2;
  return j;
}

/// log|A| for symmetric positive definite A. Never jitters.
template <typename Derived>
typename Derived::Scalar log_det_spd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Eigen::LLT<MatrixX<Scalar>> llt(a);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("matrix is not positive definite");
  using std::log;
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

/// Sum over columns of log N(f | 0, J^-1) for complete n_t x m features.
template <typename DerivedJ, typename DerivedF>
typename DerivedJ::Scalar full_loglik(const Eigen::MatrixBase<DerivedJ>& j,
                                      const Eigen::MatrixBase<DerivedF>& features) {
  using Scalar = typename DerivedJ::Scalar;
  using std::log;
  Eigen::LLT<MatrixX<Scalar>> llt(j);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("precision is not positive definite");
  const Scalar logdet = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  const Scalar n = static_cast<Scalar>(j.rows());
  const Scalar m = static_cast<Scalar>(features.cols());
  // f^T J f = ||L^T f||^2 with J = L L^T.
  const MatrixX<Scalar> lt_f =
      llt.matrixU() * features.template cast<Scalar>();
  const Scalar quad = lt_f.squaredNorm();
  const Scalar log2pi = log(Scalar(2) * std::numbers::pi_v<Scalar>);
  return m * (-n / Scalar(2) * log2pi + logdet / Scalar(2)) - quad / Scalar(2);
}

/// Log-density of the observed entries with latent nodes and missing
/// entries integrated out: per mask pattern, the observed block of J^-1.
template <typename Scalar>
Scalar marginal_loglik(const BasicStructure<Scalar>& s, const DataMatrix& data) {
  using std::log;
  if (data.n_objects() != s.n_objects())
    throw InvariantError("marginal_loglik: object count mismatch");
  const MatrixX<Scalar> j = build_precision(s);
  Eigen::LLT<MatrixX<Scalar>> llt(j);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("precision is not positive definite");
  const MatrixX<Scalar> cov =
      llt.solve(MatrixX<Scalar>::Identity(j.rows(), j.cols()));
  const Scalar log2pi = log(Scalar(2) * std::numbers::pi_v<Scalar>);

  Scalar total = 0;
  for (const MaskGroup& g : mask_groups(data)) {
    if (g.observed.empty())
      throw DegenerateDataError("feature column " + std::to_string(g.columns.front()) +
                                " has no observed entries");
    const MatrixX<Scalar> sub = cov(g.observed, g.observed);
    Eigen::LLT<MatrixX<Scalar>> sub_llt(sub);
    if (sub_llt.info() != Eigen::Success)
      throw NotPositiveDefinite("observed covariance block is not positive definite");
    const Scalar logdet =
        Scalar(2) * sub_llt.matrixLLT().diagonal().array().log().sum();
    const MatrixX<Scalar> f =
        data.values(g.observed, g.columns).template cast<Scalar>();
    const MatrixX<Scalar> white = sub_llt.matrixL().solve(f);
    const Scalar no = static_cast<Scalar>(g.observed.size());
    const Scalar mg = static_cast<Scalar>(g.columns.size());
    total += -mg / Scalar(2) * (no * log2pi + logdet) - white.squaredNorm() / Scalar(2);
  }
  return total;
}

/// log P(D | S) - beta * #S.
inline StructureScore posterior_score(const Structure& s, const DataMatrix& data,
                                      double beta, bool include_attachments = true) {
  StructureScore score;
  score.loglik = marginal_loglik(s, data);
  score.penalty = beta * edge_count(s, include_attachments);
  score.total = score.loglik - score.penalty;
  return score;
}

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_CORE_MODEL_HPP_
