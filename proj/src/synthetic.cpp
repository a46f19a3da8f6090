#include "sparsestruct/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace sparsestruct {

namespace {

void link(BoolMatrix& a, int i, int j) {
  a(i, j) = true;
  a(j, i) = true;
}

BoolMatrix empty_graph(int n) { return BoolMatrix::Constant(n, n, false); }

BoolMatrix ring(int n) {
  BoolMatrix a = empty_graph(n);
  for (int i = 0; i < n; ++i) link(a, i, (i + 1) % n);
  return a;
}

BoolMatrix chain(int n) {
  BoolMatrix a = empty_graph(n);
  for (int i = 0; i + 1 < n; ++i) link(a, i, i + 1);
  return a;
}

BoolMatrix grid(int rows, int cols, bool diagonals) {
  BoolMatrix a = empty_graph(rows * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int k = r * cols + c;
      if (c + 1 < cols) link(a, k, k + 1);
      if (r + 1 < rows) link(a, k, k + cols);
      if (diagonals && r + 1 < rows && c + 1 < cols && (r + c) % 2 == 0)
        link(a, k, k + cols + 1);
    }
  return a;
}

BoolMatrix tree(int branching, int depth) {
  int n = 0;
  for (int d = 0, level = 1; d <= depth; ++d, level *= branching) n += level;
  BoolMatrix a = empty_graph(n);
  for (int child = 1; child < n; ++child) link(a, child, (child - 1) / branching);
  return a;
}

//        0
//    7   |   1
//  6 --- 8     2       hub 8 joins top 0, bottom 4 and the lower
//    5 /   \ 3         diagonals 3 and 5
//        4
BoolMatrix peace() {
  BoolMatrix a = empty_graph(9);
  for (int i = 0; i < 8; ++i) link(a, i, (i + 1) % 8);
  for (int spoke : {0, 4, 3, 5}) link(a, 8, spoke);
  return a;
}

// Ring 0-1-2-3; node r has children 4+2r and 5+2r.
BoolMatrix ring_of_trees() {
  BoolMatrix a = empty_graph(12);
  for (int r = 0; r < 4; ++r) {
    link(a, r, (r + 1) % 4);
    link(a, r, 4 + 2 * r);
    link(a, r, 5 + 2 * r);
  }
  return a;
}

// Binary tree of depth 2 whose leaves 3-4-5-6 form a cycle.
BoolMatrix tree_in_ring() {
  BoolMatrix a = tree(2, 2);
  link(a, 3, 4);
  link(a, 4, 5);
  link(a, 5, 6);
  link(a, 6, 3);
  return a;
}

BoolMatrix disjoint_chains(const std::vector<int>& lengths) {
  int n = 0;
  for (int len : lengths) n += len;
  BoolMatrix a = empty_graph(n);
  int offset = 0;
  for (int len : lengths) {
    for (int i = 0; i + 1 < len; ++i) link(a, offset + i, offset + i + 1);
    offset += len;
  }
  return a;
}

std::vector<int> cluster_sizes(const FormSpec& spec, const BoolMatrix& adj) {
  const int nz = static_cast<int>(adj.rows());
  if (!spec.objects_per_cluster.empty()) return spec.objects_per_cluster;
  if (!spec.multi_object) return std::vector<int>(nz, 1);
  std::mt19937_64 rng(derive_seed(spec.size_seed, 0x5132));
  std::uniform_int_distribution<int> size(2, 4);
  const bool singleton_ends =
      spec.kind == FormKind::kChain || spec.kind == FormKind::kDisjointChains;
  std::vector<int> sizes(nz);
  for (int c = 0; c < nz; ++c) {
    const int s = size(rng);
    const int degree = static_cast<int>(adj.row(c).count());
    sizes[c] = (singleton_ends && degree <= 1) ? 1 : s;
  }
  return sizes;
}

}  // namespace

void FormSpec::validate() const {
  if (!(edge_strength > 0.0) || !(attach_strength > 0.0) || !(sigma2 > 0.0))
    throw InvariantError("form: strengths and sigma2 must be positive");
  switch (kind) {
    case FormKind::kRing:
      if (n < 3) throw InvariantError("form: ring needs at least 3 nodes");
      break;
    case FormKind::kChain:
    case FormKind::kClusters:
      if (n < 1) throw InvariantError("form: size must be positive");
      break;
    case FormKind::kGrid:
      if (rows < 1 || cols < 1) throw InvariantError("form: grid dimensions must be positive");
      break;
    case FormKind::kTree:
      if (branching < 1 || depth < 0) throw InvariantError("form: bad tree parameters");
      break;
    case FormKind::kDisjointChains:
      if (chain_lengths.empty()) throw InvariantError("form: no chain lengths");
      for (int len : chain_lengths)
        if (len < 1) throw InvariantError("form: chain lengths must be positive");
      break;
    case FormKind::kCustom:
      if (custom_adjacency.rows() < 1 || custom_adjacency.rows() != custom_adjacency.cols())
        throw InvariantError("form: custom adjacency must be square and non-empty");
      if ((custom_adjacency != custom_adjacency.transpose()).any())
        throw InvariantError("form: custom adjacency must be symmetric");
      if (custom_adjacency.matrix().diagonal().array().any())
        throw InvariantError("form: custom adjacency has self-loops");
      break;
    default:
      break;
  }
  for (int s : objects_per_cluster)
    if (s < 1) throw InvariantError("form: cluster sizes must be at least 1");
}

FormKind parse_form(const std::string& name) {
  static const std::map<std::string, FormKind> names = {
      {"ring", FormKind::kRing},
      {"chain", FormKind::kChain},
      {"grid", FormKind::kGrid},
      {"tree", FormKind::kTree},
      {"peace", FormKind::kPeace},
      {"clusters", FormKind::kClusters},
      {"disjoint_chains", FormKind::kDisjointChains},
      {"ring_of_trees", FormKind::kRingOfTrees},
      {"plane", FormKind::kPlane},
      {"tree_in_ring", FormKind::kTreeInRing},
      {"custom", FormKind::kCustom},
  };
  const auto it = names.find(name);
  if (it == names.end()) throw ParseError("unknown form '" + name + "'");
  return it->second;
}

std::string form_name(FormKind kind) {
  switch (kind) {
    case FormKind::kRing: return "ring";
    case FormKind::kChain: return "chain";
    case FormKind::kGrid: return "grid";
    case FormKind::kTree: return "tree";
    case FormKind::kPeace: return "peace";
    case FormKind::kClusters: return "clusters";
    case FormKind::kDisjointChains: return "disjoint_chains";
    case FormKind::kRingOfTrees: return "ring_of_trees";
    case FormKind::kPlane: return "plane";
    case FormKind::kTreeInRing: return "tree_in_ring";
    case FormKind::kCustom: return "custom";
  }
  return "custom";
}

BoolMatrix form_adjacency(const FormSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case FormKind::kRing: return ring(spec.n);
    case FormKind::kChain: return chain(spec.n);
    case FormKind::kGrid: return grid(spec.rows, spec.cols, false);
    case FormKind::kTree: return tree(spec.branching, spec.depth);
    case FormKind::kPeace: return peace();
    case FormKind::kClusters: return empty_graph(spec.n);
    case FormKind::kDisjointChains: return disjoint_chains(spec.chain_lengths);
    case FormKind::kRingOfTrees: return ring_of_trees();
    case FormKind::kPlane: return grid(3, 4, true);
    case FormKind::kTreeInRing: return tree_in_ring();
    case FormKind::kCustom: return spec.custom_adjacency;
  }
  return spec.custom_adjacency;
}

Structure build_form(const FormSpec& spec) {
  const BoolMatrix adj = form_adjacency(spec);
  const int nz = static_cast<int>(adj.rows());
  const std::vector<int> sizes = cluster_sizes(spec, adj);
  if (static_cast<int>(sizes.size()) != nz)
    throw InvariantError("form: objects_per_cluster length differs from node count");
  Structure s;
  for (int c = 0; c < nz; ++c) s.assignment.insert(s.assignment.end(), sizes[c], c);
  s.cluster_edges = adj.cast<double>().matrix() * spec.edge_strength;
  s.attach_weights = VectorX<double>::Constant(s.n_objects(), spec.attach_strength);
  s.sigma2 = spec.sigma2;
  validate(s);
  return s;
}

DataMatrix sample_features(const Structure& truth, int m, std::uint64_t seed) {
  validate(truth);
  if (m < 1) throw InvariantError("sample_features: m must be positive");
  const int nx = truth.n_objects();
  const MatrixX<double> j = build_precision(truth);
  Eigen::LLT<MatrixX<double>> llt_j(j);
  if (llt_j.info() != Eigen::Success) throw NotPositiveDefinite("sample_features: J not PD");
  const MatrixX<double> cov =
      llt_j.solve(MatrixX<double>::Identity(j.rows(), j.cols())).topLeftCorner(nx, nx);
  Eigen::LLT<MatrixX<double>> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("sample_features: object covariance not PD");
  MatrixX<double> z(nx, m);
  for (int k = 0; k < m; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < nx; ++i) z(i, k) = normal(rng);
  }
  return DataMatrix::from_values(llt.matrixL() * z);
}

MatchResult compare(const Structure& learned, const StructureScore& learned_score,
                    const Structure& truth, const StructureScore& truth_score) {
  if (learned.n_objects() != truth.n_objects())
    throw InvariantError("compare: structures have different object counts");
  MatchResult r;
  r.score_match = learned_score.total >= truth_score.total - kScoreMatchSlack;
  r.partition_match =
      canonical_partition(learned.assignment) == canonical_partition(truth.assignment);
  if (r.partition_match) {
    // Canonical order labels clusters by their smallest object, so equal
    // partitions share labels and the adjacency can be compared directly.
    r.exact_match = (cluster_adjacency(canonicalize(learned)) ==
                     cluster_adjacency(canonicalize(truth)))
                        .all();
  }
  return r;
}

EmResult score_truth(const Structure& truth, const DataMatrix& data,
                     const SolverConfig& config) {
  return fixed_pattern_em(truth, data, config, config.max_em_iters);
}

std::vector<ExperimentCase> singleton_suite() {
  std::vector<ExperimentCase> out;
  FormSpec s;
  s.kind = FormKind::kRing;
  s.n = 8;
  out.push_back({"ring", s});
  s = FormSpec{};
  s.kind = FormKind::kGrid;
  out.push_back({"grid", s});
  s = FormSpec{};
  s.kind = FormKind::kPeace;
  out.push_back({"peace", s});
  s = FormSpec{};
  s.kind = FormKind::kChain;
  s.n = 8;
  out.push_back({"chain", s});
  return out;
}

std::vector<ExperimentCase> multi_object_suite() {
  std::vector<ExperimentCase> out;
  auto add = [&](const std::string& label, FormSpec s, std::uint64_t size_seed) {
    s.multi_object = true;
    s.size_seed = size_seed;
    out.push_back({label, s});
  };
  FormSpec s;
  s.kind = FormKind::kClusters;
  s.n = 4;
  add("clusters", s, 1);
  s = FormSpec{};
  s.kind = FormKind::kRing;
  s.n = 6;
  add("ring", s, 2);
  s = FormSpec{};
  s.kind = FormKind::kTree;
  add("tree", s, 3);
  s = FormSpec{};
  s.kind = FormKind::kRingOfTrees;
  add("ring_of_trees", s, 4);
  s = FormSpec{};
  s.kind = FormKind::kDisjointChains;
  add("disjoint_chains", s, 5);
  return out;
}

int CaseReport::score_matches() const {
  int n = 0;
  for (const auto& r : runs) n += r.match.score_match;
  return n;
}

int CaseReport::partition_matches() const {
  int n = 0;
  for (const auto& r : runs) n += r.match.partition_match;
  return n;
}

int CaseReport::exact_matches() const {
  int n = 0;
  for (const auto& r : runs) n += r.match.exact_match;
  return n;
}

CaseReport run_case(const ExperimentCase& c, int m, int runs, std::uint64_t seed,
                    const SearchConfig& config) {
  CaseReport report;
  report.label = c.label;
  const Structure truth = build_form(c.spec);
  report.n_objects = truth.n_objects();
  report.n_clusters = truth.n_clusters();
  const DataMatrix data = sample_features(truth, m, derive_seed(seed, 0));
  const EmResult truth_fit = score_truth(truth, data, config.solver_config());
  report.truth_total = truth_fit.score.total;
  for (int r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const SearchResult learned =
        search_once(data, config, derive_seed(seed, static_cast<std::uint64_t>(r + 1)), r);
    const auto t1 = std::chrono::steady_clock::now();
    RunOutcome o;
    o.match = compare(learned.structure, learned.score, truth, truth_fit.score);
    o.learned_total = learned.score.total;
    o.learned_clusters = learned.structure.n_clusters();
    o.learned_edges = cluster_edge_count(learned.structure);
    o.seconds = std::chrono::duration<double>(t1 - t0).count();
    o.learned = learned.structure;
    report.runs.push_back(o);
    report.audit.merge(learned.audit);
  }
  return report;
}

void write_markdown_table(std::ostream& out, const std::vector<CaseReport>& reports) {
  out << "| Structure | Objects | Clusters | Score match | Partition match | Exact match "
         "| Truth score | Best learned | Mean s/run |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    double best = -std::numeric_limits<double>::infinity();
    double secs = 0.0;
    for (const auto& run : r.runs) {
      best = std::max(best, run.learned_total);
      secs += run.seconds;
    }
    const int n = static_cast<int>(r.runs.size());
    std::ostringstream row;
    row << std::fixed << std::setprecision(1);
    row << "| " << r.label << " | " << r.n_objects << " | " << r.n_clusters << " | "
        << r.score_matches() << "/" << n << " | " << r.partition_matches() << "/" << n
        << " | " << r.exact_matches() << "/" << n << " | " << r.truth_total << " | " << best
        << " | " << (n > 0 ? secs / n : 0.0) << " |\n";
    out << row.str();
  }
}

}  // namespace sparsestruct
