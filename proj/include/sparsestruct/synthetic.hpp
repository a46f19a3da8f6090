#ifndef SPARSESTRUCT_SYNTHETIC_HPP_
#define SPARSESTRUCT_SYNTHETIC_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparsestruct/cluster_search.hpp"

namespace sparsestruct {

enum class FormKind {
  kRing,
  kChain,
  kGrid,
  kTree,
  kPeace,
  kClusters,
  kDisjointChains,
  kRingOfTrees,
  kPlane,
  kTreeInRing,
  kCustom,
};

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct FormSpec {
  FormKind kind = FormKind::kRing;
  int n = 8;  // ring, chain and clusters sizes
  int rows = 3;
  int cols = 3;
  int branching = 2;
  int depth = 2;  // edges from root to leaf
  std::vector<int> chain_lengths{3, 4};
  BoolMatrix custom_adjacency;

  // Objects per cluster node: one each unless `multi_object` (sizes drawn
  // from {2,3,4} with `size_seed`; chain end nodes keep a single object) or
  // an explicit list is given.
  bool multi_object = false;
  std::vector<int> objects_per_cluster;
  std::uint64_t size_seed = 0;

  double edge_strength = 1.0;
  double attach_strength = 16.0;
  double sigma2 = 100.0;

  void validate() const;
};

FormKind parse_form(const std::string& name);  // throws ParseError
std::string form_name(FormKind kind);

/// Cluster-node adjacency of the named topology.
BoolMatrix form_adjacency(const FormSpec& spec);

Structure build_form(const FormSpec& spec);

/// m i.i.d. draws of the object coordinates of N(0, J^-1); column k is
/// generated from its own derived seed.
DataMatrix sample_features(const Structure& truth, int m, std::uint64_t seed);

struct MatchResult {
  bool score_match = false;
  bool partition_match = false;
  bool exact_match = false;
};

inline constexpr double kScoreMatchSlack = 4.0;

MatchResult compare(const Structure& learned, const StructureScore& learned_score,
                    const Structure& truth, const StructureScore& truth_score);

/// Truth score on `data`: the true pattern with strengths refit by EM.
EmResult score_truth(const Structure& truth, const DataMatrix& data,
                     const SolverConfig& config);

struct ExperimentCase {
  std::string label;
  FormSpec spec;
};

/// The singleton and multi-object benchmark suites.
std::vector<ExperimentCase> singleton_suite();
std::vector<ExperimentCase> multi_object_suite();

struct RunOutcome {
  MatchResult match;
  double learned_total = 0.0;
  int learned_clusters = 0;
  int learned_edges = 0;
  double seconds = 0.0;
  Structure learned;
};

struct CaseReport {
  std::string label;
  int n_objects = 0;
  int n_clusters = 0;
  double truth_total = 0.0;
  std::vector<RunOutcome> runs;
  SemAudit audit;

  int score_matches() const;
  int partition_matches() const;
  int exact_matches() const;
};

/// One data set per case; `runs` independent searches on it.
CaseReport run_case(const ExperimentCase& c, int m, int runs, std::uint64_t seed,
                    const SearchConfig& config);

void write_markdown_table(std::ostream& out, const std::vector<CaseReport>& reports);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_SYNTHETIC_HPP_
