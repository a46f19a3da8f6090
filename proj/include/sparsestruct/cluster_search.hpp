#ifndef SPARSESTRUCT_CLUSTER_SEARCH_HPP_
#define SPARSESTRUCT_CLUSTER_SEARCH_HPP_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sparsestruct/connection_search.hpp"

namespace sparsestruct {

struct SearchConfig {
  double beta = 6.0;
  int n_restarts = 10;
  int max_score_decreases = 5;
  int split_seeds_per_node = 3;
  int move_budget = 30;
  int swap_interval = 3;
  std::uint64_t rng_seed = 0;
  double flip_probability = 0.1;  // chance of sending an object to the farther seed
  int coarse_k_values = 8;
  int kmeans_restarts = 10;  // lowest within-cluster sum of squares kept
  int swap_em_iters = 10;  // fixed-pattern EM iterations per trial swap
  SolverConfig solver;     // solver.beta is overwritten by beta

  /// beta 18 and move budget 8.
  static SearchConfig large_data();

  SolverConfig solver_config() const;
  void validate() const;
};

struct TraceRecord {
  int restart = 0;
  int step = 0;
  std::string move;  // init, split, merge, swap
  std::string partition_hash;
  double score = 0.0;
  bool accepted = false;
};

struct SearchTrace {
  std::vector<TraceRecord> records;
  std::set<std::uint64_t> tabu;

  void write_jsonl(std::ostream& out) const;
};

using Rng = std::mt19937_64;

/// Lloyd's algorithm with k-means++ seeding on the rows of `points`. Always
/// returns k non-empty clusters when there are at least k distinct rows.
std::vector<int> kmeans(const MatrixX<double>& points, int k, Rng& rng, int max_iters = 100);

double kmeans_inertia(const MatrixX<double>& points, const std::vector<int>& assignment);

/// Best of `restarts` kmeans runs by inertia.
std::vector<int> kmeans_best(const MatrixX<double>& points, int k, Rng& rng, int restarts);

/// ceil(n^(i/(count-1))) for i = 0..count-1, deduplicated.
std::vector<int> coarse_k_grid(int n_objects, int count = 8);

/// Structure for `partition` whose edges are carried over from `parent`
/// through the membership overlap; clusters split out of one parent node
/// start joined by a unit edge.
Structure inherit_structure(const Structure& parent, const std::vector<int>& partition);

struct InitResult {
  SemResult best;
  std::vector<std::pair<int, double>> evaluated_k;  // (k, total score)
  SemAudit audit;
};

InitResult init_partition(const DataMatrix& data, const SearchConfig& config, Rng& rng,
                          SearchTrace* trace = nullptr, int restart = 0);

/// Object positions used for split distances: rows of the expected features.
std::vector<std::vector<int>> propose_splits(const Structure& s, const DataMatrix& data,
                                             const SearchConfig& config, Rng& rng);

std::vector<std::vector<int>> propose_merges(const Structure& s, const DataMatrix& data,
                                             const SearchConfig& config, Rng& rng);

/// Merge partner probabilities of cluster i: softmax of -d^2/tau over j != i.
MatrixX<double> merge_probabilities(const Structure& s, const DataMatrix& data);

/// Single-object reassignments refit with the pattern frozen; the best
/// improving one is re-searched with structural EM. Repeats until none helps.
SemResult swap_pass(const SemResult& current, const DataMatrix& data,
                    const SearchConfig& config, SearchTrace* trace = nullptr,
                    int restart = 0, int step = 0, SemAudit* audit = nullptr);

struct SearchResult {
  Structure structure;
  StructureScore score;
  SearchTrace trace;
  int best_restart = 0;
  std::vector<double> restart_scores;
  std::vector<std::string> warnings;
  SemAudit audit;
};

/// One greedy run seeded with `seed`.
SearchResult search_once(const DataMatrix& data, const SearchConfig& config,
                         std::uint64_t seed, int restart = 0);

/// n_restarts runs with derived seeds; the highest total wins.
SearchResult search(const DataMatrix& data, const SearchConfig& config);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_CLUSTER_SEARCH_HPP_
