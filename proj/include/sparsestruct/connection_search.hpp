#ifndef SPARSESTRUCT_CONNECTION_SEARCH_HPP_
#define SPARSESTRUCT_CONNECTION_SEARCH_HPP_

#include <string>
#include <vector>

#include "sparsestruct/core_model.hpp"
#include "sparsestruct/structure.hpp"

namespace sparsestruct {

/// H = (1/m) sum_k E[f_k f_k^T] over all n_t nodes.
struct SuffStats {
  MatrixX<double> H;
  int m = 0;
};

struct SolverConfig {
  std::vector<double> lambda_grid{0.5, 1.0, 2.0};
  double beta = 6.0;
  bool include_attachments = true;
  int max_sem_iters = 50;
  double sem_tol = 1e-5;  // relative improvement of the exact score
  double em_tol = 1e-6;   // relative improvement for fixed-pattern EM
  int max_em_iters = 100;
  int mstep_max_iters = 500;
  double mstep_pg_tol = 1e-6;
  int threshold_cutoffs = 16;
  int refit_newton_steps = 25;
  bool prune = true;       // l0 edge-deletion pass once SEM has converged
  int prune_em_iters = 10;  // EM iterations per trial deletion


  void validate() const;
};

/// Starting point used when no initial structure is given: every
/// cluster pair at `edge`, attachments at `attach`.
Structure initial_structure(const std::vector<int>& partition, double edge = 1.0,
                            double attach = 1.0, double sigma2 = 1.0);

SuffStats e_step(const Structure& s, const DataMatrix& data);

/// Observed entries plus conditional means of hidden coordinates: n_t x m.
MatrixX<double> expected_features(const Structure& s, const DataMatrix& data);

/// log|J| - tr(H J).
double complete_data_objective(const Structure& s, const SuffStats& stats);

/// Gradient of log|J| - tr(H J) with respect to each cluster pair s_ij
/// (symmetric matrix, zero diagonal), each attachment, and tau = 1/sigma2.
struct ObjectiveGradient {
  MatrixX<double> cluster_edges;
  VectorX<double> attach;
  double tau = 0.0;
};
ObjectiveGradient complete_data_gradient(const Structure& s, const SuffStats& stats);

/// Expected complete-data score (m/2)(log|J| - tr(HJ)) - beta * #S, up to a
/// constant shared by all structures on the same data.
double expected_score(const Structure& s, const SuffStats& stats, double beta,
                      bool include_attachments = true);

struct MStepResult {
  Structure structure;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_history;  // maximized objective, per iterate
};

/// Maximizes log|J| - tr(HJ) - (beta*lambda/m) sum_ij s_ij over all cluster
/// pairs (both triangles), s >= 0, sigma2 > 0. Warm-starts from `warm` when
/// its partition matches.
MStepResult m_step_l1(const SuffStats& stats, const std::vector<int>& partition,
                      const SolverConfig& config, double lambda,
                      const Structure* warm = nullptr);

/// Maximizes log|J| - tr(HJ) with the cluster-edge pattern of `start` fixed
/// (edges may only shrink to zero). Monotone from `start`.
Structure refit_fixed_pattern(const Structure& start, const SuffStats& stats,
                              int max_steps, double pg_tol = 1e-8);

/// Picks the cutoff over the continuous solution's edge magnitudes that
/// maximizes the l0 complete-data objective after a fixed-pattern refit.
Structure threshold_pattern(const Structure& continuous, const SuffStats& stats,
                            const SolverConfig& config);

struct EmResult {
  Structure structure;
  StructureScore score;
  int iterations = 0;
  std::vector<double> score_history;
};

/// Traditional EM: beta = 0 in the M-step, pattern frozen.
EmResult fixed_pattern_em(const Structure& init, const DataMatrix& data,
                          const SolverConfig& config, int max_iters);

struct SemResult {
  Structure structure;
  StructureScore score;
  int iterations = 0;
  std::vector<double> score_history;  // exact total, initial structure first
  std::vector<std::string> warnings;
};

/// Tally of score-history decreases over many structural EM calls.
struct SemAudit {
  int calls = 0;
  int violations = 0;
  double worst_drop = 0.0;

  void add(const SemResult& r, double tol = 1e-6);
  void merge(const SemAudit& other);
};

/// Greedy deletion of cluster edges scored by the exact posterior: each
/// present edge is dropped in turn and refit by EM; the best improving
/// deletion is kept, repeated until none improves.
EmResult prune_edges(const EmResult& current, const DataMatrix& data,
                     const SolverConfig& config);

/// Alternating Structural EM / EM for one partition, followed by
/// prune_edges (and further SEM iterations while pruning helps).
SemResult structural_em(const std::vector<int>& partition, const DataMatrix& data,
                        const SolverConfig& config, const Structure* init = nullptr);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_CONNECTION_SEARCH_HPP_
