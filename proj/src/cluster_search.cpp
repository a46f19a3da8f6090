#include "sparsestruct/cluster_search.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace sparsestruct {

namespace {

constexpr double kScoreTieTol = 1e-9;

struct Candidate {
  std::vector<int> partition;  // canonical
  std::uint64_t hash = 0;
  std::string move;
};

// Higher total wins; ties go to the lower partition hash so the choice does
// not depend on evaluation order.
bool better(double score_a, std::uint64_t hash_a, double score_b, std::uint64_t hash_b) {
  if (score_a > score_b + kScoreTieTol) return true;
  if (score_b > score_a + kScoreTieTol) return false;
  return hash_a < hash_b;
}

std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void cap_candidates(std::vector<std::vector<int>>& cands, int budget, Rng& rng) {
  if (static_cast<int>(cands.size()) <= budget) return;
  std::vector<std::vector<int>> kept;
  for (int i : sample_without_replacement(static_cast<int>(cands.size()), budget, rng))
    kept.push_back(std::move(cands[i]));
  cands = std::move(kept);
}

void push_unique(std::vector<std::vector<int>>& out, std::set<std::uint64_t>& seen,
                 const std::vector<int>& partition) {
  const std::vector<int> canon = canonical_partition(partition);
  if (seen.insert(partition_hash(canon)).second) out.push_back(canon);
}

double squared_distance(const MatrixX<double>& x, int a, int b) {
  return (x.row(a) - x.row(b)).squaredNorm();
}

MatrixX<double> object_positions(const Structure& s, const DataMatrix& data) {
  if (data.complete()) return data.values;
  return expected_features(s, data).topRows(s.n_objects());
}

std::vector<int> singleton_partition(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

void record(SearchTrace* trace, int restart, int step, const std::string& move,
            const std::vector<int>& partition, double score, bool accepted) {
  if (trace == nullptr) return;
  trace->records.push_back(
      {restart, step, move, partition_hash_hex(partition), score, accepted});
  trace->tabu.insert(partition_hash(partition));
}

}  // namespace

SearchConfig SearchConfig::large_data() {
  SearchConfig c;
  c.beta = 18.0;
  c.move_budget = 8;
  return c;
}

SolverConfig SearchConfig::solver_config() const {
  SolverConfig s = solver;
  s.beta = beta;
  return s;
}

void SearchConfig::validate() const {
  if (!(beta > 0.0)) throw InvariantError("search: beta must be positive");
  if (n_restarts < 1 || max_score_decreases < 1 || split_seeds_per_node < 1 ||
      move_budget < 1 || swap_interval < 1 || coarse_k_values < 2 || swap_em_iters < 1 ||
      kmeans_restarts < 1)
    throw InvariantError("search: counts must be positive");
  if (flip_probability < 0.0 || flip_probability >= 0.5)
    throw InvariantError("search: flip probability must lie in [0, 0.5)");
  solver_config().validate();
}

void SearchTrace::write_jsonl(std::ostream& out) const {
  for (const auto& r : records) {
    nlohmann::json j = {{"restart", r.restart}, {"step", r.step},
                        {"move", r.move},       {"partition_hash", r.partition_hash},
                        {"score", r.score},     {"accepted", r.accepted}};
    out << j.dump() << '\n';
  }
}

std::vector<int> kmeans(const MatrixX<double>& points, int k, Rng& rng, int max_iters) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k > n) throw InvariantError("kmeans: k out of range");
  if (k == n) return singleton_partition(n);
  if (k == 1) return std::vector<int>(n, 0);

  // k-means++ seeding.
  MatrixX<double> centers(k, points.cols());
  std::uniform_int_distribution<int> first(0, n - 1);
  centers.row(0) = points.row(first(rng));
  VectorX<double> d2(n);
  for (int i = 0; i < n; ++i) d2[i] = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    int pick = 0;
    const double total = d2.sum();
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2[pick];
        if (r < 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centers.row(c) = points.row(pick);
    for (int i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.row(i) - centers.row(c)).squaredNorm());
  }

  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    // Refill empty clusters with the point farthest from its center.
    std::vector<int> counts(k, 0);
    for (int a : assign) ++counts[a];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[assign[i]] < 2) continue;
        const double d = (points.row(i) - centers.row(assign[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) break;
      --counts[assign[far]];
      assign[far] = c;
      counts[c] = 1;
      changed = true;
    }
    centers.setZero();
    for (int i = 0; i < n; ++i) centers.row(assign[i]) += points.row(i);
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) centers.row(c) /= counts[c];
    if (!changed) break;
  }
  return canonical_partition(assign);
}

double kmeans_inertia(const MatrixX<double>& points, const std::vector<int>& assignment) {
  double total = 0.0;
  for (const auto& members : clusters_of(assignment)) {
    VectorX<double> mu = VectorX<double>::Zero(points.cols());
    for (int x : members) mu += points.row(x).transpose();
    mu /= static_cast<double>(members.size());
    for (int x : members) total += (points.row(x).transpose() - mu).squaredNorm();
  }
  return total;
}

std::vector<int> kmeans_best(const MatrixX<double>& points, int k, Rng& rng, int restarts) {
  std::vector<int> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int t = 0; t < restarts; ++t) {
    std::vector<int> p = kmeans(points, k, rng);
    const double inertia = kmeans_inertia(points, p);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(p);
    }
    if (k == 1 || k == static_cast<int>(points.rows())) break;
  }
  return best;
}

std::vector<int> coarse_k_grid(int n_objects, int count) {
  std::vector<int> ks;
  for (int i = 0; i < count; ++i) {
    const double v = std::pow(static_cast<double>(n_objects),
                              static_cast<double>(i) / static_cast<double>(count - 1));
    ks.push_back(std::clamp(static_cast<int>(std::ceil(v - 1e-9)), 1, n_objects));
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

Structure inherit_structure(const Structure& parent, const std::vector<int>& partition) {
  const int nx = parent.n_objects();
  if (static_cast<int>(partition.size()) != nx)
    throw InvariantError("inherit_structure: object count mismatch");
  Structure s;
  s.assignment = partition;
  s.attach_weights = parent.attach_weights;
  s.sigma2 = parent.sigma2;
  const int nz = 1 + *std::max_element(partition.begin(), partition.end());
  const int pz = parent.n_clusters();
  MatrixX<double> overlap = MatrixX<double>::Zero(nz, pz);
  for (int x = 0; x < nx; ++x) overlap(partition[x], parent.assignment[x]) += 1.0;
  MatrixX<double> share = overlap;
  for (int a = 0; a < nz; ++a) share.row(a) /= overlap.row(a).sum();
  s.cluster_edges = share * parent.cluster_edges * share.transpose();
  // Two new clusters drawn mostly from the same parent node stay close.
  const MatrixX<double> common = share * share.transpose();
  for (int a = 0; a < nz; ++a)
    for (int b = 0; b < nz; ++b)
      if (a != b && common(a, b) > 0.25) s.cluster_edges(a, b) += common(a, b);
  s.cluster_edges.diagonal().setZero();
  s.cluster_edges = 0.5 * (s.cluster_edges + s.cluster_edges.transpose()).eval();
  apply_edge_floor(s);
  return s;
}

InitResult init_partition(const DataMatrix& data, const SearchConfig& config, Rng& rng,
                          SearchTrace* trace, int restart) {
  const int nx = data.n_objects();
  if (nx < 1) throw DegenerateDataError("init_partition: no objects");
  const SolverConfig solver = config.solver_config();
  const MatrixX<double> points = data.values.array() * data.mask.cast<double>();
  const std::uint64_t base = rng();

  std::map<int, SemResult> cache;
  InitResult out;
  auto evaluate = [&](const std::vector<int>& ks) {
    std::vector<int> todo;
    for (int k : ks)
      if (!cache.count(k) && std::find(todo.begin(), todo.end(), k) == todo.end())
        todo.push_back(k);
    std::vector<std::vector<int>> parts(todo.size());
    for (std::size_t i = 0; i < todo.size(); ++i) {
      Rng local(derive_seed(base, static_cast<std::uint64_t>(todo[i])));
      parts[i] = kmeans_best(points, todo[i], local, config.kmeans_restarts);
    }
    std::vector<SemResult> results = parallel_map<SemResult>(
        todo.size(), [&](std::size_t i) { return structural_em(parts[i], data, solver); });
    for (std::size_t i = 0; i < todo.size(); ++i) {
      record(trace, restart, 0, "init", parts[i], results[i].score.total, false);
      out.evaluated_k.emplace_back(todo[i], results[i].score.total);
      out.audit.add(results[i]);
      cache.emplace(todo[i], std::move(results[i]));
    }
  };
  auto score_of = [&](int k) { return cache.at(k).score.total; };
  auto best_of = [&](const std::vector<int>& ks) {
    int best = ks.front();
    for (int k : ks)
      if (score_of(k) > score_of(best) + kScoreTieTol) best = k;
    return best;
  };

  const std::vector<int> grid = coarse_k_grid(nx, config.coarse_k_values);
  evaluate(grid);
  const int kbest = best_of(grid);
  const auto pos = std::find(grid.begin(), grid.end(), kbest) - grid.begin();
  int lo = pos > 0 ? grid[pos - 1] : kbest;
  int hi = pos + 1 < static_cast<long>(grid.size()) ? grid[pos + 1] : kbest;

  // Fibonacci (golden-section) search on the integers in [lo, hi].
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  while (hi - lo > 3) {
    int c = hi - static_cast<int>(std::lround(phi * (hi - lo)));
    int d = lo + static_cast<int>(std::lround(phi * (hi - lo)));
    if (c >= d) d = c + 1;
    evaluate({c, d});
    if (score_of(c) >= score_of(d))
      hi = d;
    else
      lo = c;
  }
  std::vector<int> rest;
  for (int k = lo; k <= hi; ++k) rest.push_back(k);
  evaluate(rest);

  std::vector<int> all;
  for (const auto& [k, r] : cache) all.push_back(k);
  const int winner = best_of(all);
  out.best = cache.at(winner);
  if (trace != nullptr) {
    for (auto it = trace->records.rbegin(); it != trace->records.rend(); ++it) {
      if (it->move == "init" && it->restart == restart &&
          it->partition_hash == partition_hash_hex(out.best.structure.assignment)) {
        it->accepted = true;
        break;
      }
    }
  }
  return out;
}

std::vector<std::vector<int>> propose_splits(const Structure& s, const DataMatrix& data,
                                             const SearchConfig& config, Rng& rng) {
  std::vector<std::vector<int>> out;
  std::set<std::uint64_t> seen;
  const auto clusters = clusters_of(s.assignment);
  const MatrixX<double> pos = object_positions(s, data);
  const int nz = s.n_clusters();
  std::bernoulli_distribution flip(config.flip_probability);
  for (int c = 0; c < static_cast<int>(clusters.size()); ++c) {
    const std::vector<int>& members = clusters[c];
    const int size = static_cast<int>(members.size());
    if (size < 2) continue;
    for (int t = 0; t < config.split_seeds_per_node; ++t) {
      std::vector<int> seeds = sample_without_replacement(size, 2, rng);
      const int a = members[seeds[0]];
      const int b = members[seeds[1]];
      std::vector<int> p = s.assignment;
      p[b] = nz;
      for (int x : members) {
        if (x == a || x == b) continue;
        bool to_b = squared_distance(pos, x, b) < squared_distance(pos, x, a);
        if (flip(rng)) to_b = !to_b;
        if (to_b) p[x] = nz;
      }
      push_unique(out, seen, p);
    }
  }
  cap_candidates(out, config.move_budget, rng);
  return out;
}

MatrixX<double> merge_probabilities(const Structure& s, const DataMatrix& data) {
  const int nz = s.n_clusters();
  MatrixX<double> prob = MatrixX<double>::Zero(nz, nz);
  if (nz < 2) return prob;
  const MatrixX<double> latent = expected_features(s, data).bottomRows(nz);
  MatrixX<double> d2(nz, nz);
  double sum = 0.0;
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nz; ++j) {
      d2(i, j) = squared_distance(latent, i, j);
      if (i < j) sum += d2(i, j);
    }
  const double tau = std::max(sum / (0.5 * nz * (nz - 1)), 1e-300);
  for (int i = 0; i < nz; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < nz; ++j)
      if (j != i) best = std::min(best, d2(i, j));
    double z = 0.0;
    for (int j = 0; j < nz; ++j) {
      if (j == i) continue;
      prob(i, j) = std::exp(-(d2(i, j) - best) / tau);
      z += prob(i, j);
    }
    prob.row(i) /= z;
  }
  return prob;
}

std::vector<std::vector<int>> propose_merges(const Structure& s, const DataMatrix& data,
                                             const SearchConfig& config, Rng& rng) {
  std::vector<std::vector<int>> out;
  const int nz = s.n_clusters();
  if (nz < 2) return out;
  const MatrixX<double> prob = merge_probabilities(s, data);
  std::set<std::uint64_t> seen;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < nz; ++i) {
    double r = u(rng);
    int partner = -1;
    for (int j = 0; j < nz; ++j) {
      if (j == i) continue;
      partner = j;
      r -= prob(i, j);
      if (r < 0.0) break;
    }
    std::vector<int> p = s.assignment;
    for (int& a : p)
      if (a == partner) a = i;
    push_unique(out, seen, p);
  }
  cap_candidates(out, config.move_budget, rng);
  return out;
}

SemResult swap_pass(const SemResult& current, const DataMatrix& data,
                    const SearchConfig& config, SearchTrace* trace, int restart, int step,
                    SemAudit* audit) {
  const SolverConfig solver = config.solver_config();
  SemResult cur = current;
  for (;;) {
    const Structure& s = cur.structure;
    const int nx = s.n_objects();
    const int nz = s.n_clusters();
    std::vector<int> sizes(nz, 0);
    for (int a : s.assignment) ++sizes[a];

    std::vector<std::pair<int, int>> moves;
    for (int x = 0; x < nx; ++x) {
      if (sizes[s.assignment[x]] < 2) continue;  // would empty its cluster
      for (int c = 0; c < nz; ++c)
        if (c != s.assignment[x]) moves.emplace_back(x, c);
    }
    if (moves.empty()) return cur;

    std::vector<EmResult> refits =
        parallel_map<EmResult>(moves.size(), [&](std::size_t i) {
          Structure cand = s;
          cand.assignment[moves[i].first] = moves[i].second;
          return fixed_pattern_em(cand, data, solver, config.swap_em_iters);
        });
    int best = -1;
    double best_total = cur.score.total;
    std::uint64_t best_hash = 0;
    for (std::size_t i = 0; i < moves.size(); ++i) {
      const std::uint64_t h = partition_hash(refits[i].structure.assignment);
      if (refits[i].score.total > cur.score.total + kScoreTieTol &&
          (best < 0 || better(refits[i].score.total, h, best_total, best_hash))) {
        best = static_cast<int>(i);
        best_total = refits[i].score.total;
        best_hash = h;
      }
    }
    if (best < 0) return cur;

    const Structure moved = canonicalize(refits[best].structure);
    SemResult next = structural_em(moved.assignment, data, solver, &moved);
    if (audit != nullptr) audit->add(next);
    if (next.score.total <= cur.score.total + kScoreTieTol) return cur;
    record(trace, restart, step, "swap", next.structure.assignment, next.score.total, true);
    cur = std::move(next);
  }
}

SearchResult search_once(const DataMatrix& data, const SearchConfig& config,
                         std::uint64_t seed, int restart) {
  config.validate();
  data.validate();
  const SolverConfig solver = config.solver_config();
  SearchResult out;
  Rng rng(seed);

  InitResult init = init_partition(data, config, rng, &out.trace, restart);
  out.audit = init.audit;
  SemResult current = std::move(init.best);
  current.structure = canonicalize(current.structure);
  SemResult best = current;
  out.warnings.insert(out.warnings.end(), current.warnings.begin(), current.warnings.end());

  int decreases = 0;
  int step = 0;
  while (decreases < config.max_score_decreases) {
    std::vector<Candidate> cands;
    auto add = [&](std::vector<std::vector<int>> parts, const char* move) {
      for (auto& p : parts) {
        const std::uint64_t h = partition_hash(p);
        if (out.trace.tabu.count(h)) continue;
        out.trace.tabu.insert(h);
        cands.push_back({std::move(p), h, move});
      }
    };
    add(propose_splits(current.structure, data, config, rng), "split");
    add(propose_merges(current.structure, data, config, rng), "merge");
    if (cands.empty()) break;
    ++step;

    std::vector<SemResult> results = parallel_map<SemResult>(cands.size(), [&](std::size_t i) {
      const Structure warm = inherit_structure(current.structure, cands[i].partition);
      return structural_em(cands[i].partition, data, solver, &warm);
    });
    for (const auto& r : results) out.audit.add(r);
    std::size_t pick = 0;
    for (std::size_t i = 1; i < cands.size(); ++i)
      if (better(results[i].score.total, cands[i].hash, results[pick].score.total,
                 cands[pick].hash))
        pick = i;
    for (std::size_t i = 0; i < cands.size(); ++i)
      out.trace.records.push_back({restart, step, cands[i].move,
                                   partition_hash_hex(cands[i].partition),
                                   results[i].score.total, i == pick});
    current = std::move(results[pick]);
    current.structure = canonicalize(current.structure);
    out.warnings.insert(out.warnings.end(), current.warnings.begin(), current.warnings.end());

    if (step % config.swap_interval == 0) {
      current = swap_pass(current, data, config, &out.trace, restart, step, &out.audit);
      current.structure = canonicalize(current.structure);
    }
    if (current.score.total > best.score.total + kScoreTieTol) {
      best = current;
      decreases = 0;
    } else {
      ++decreases;
    }
  }
  out.structure = best.structure;
  out.score = best.score;
  out.restart_scores = {best.score.total};
  out.best_restart = restart;
  return out;
}

SearchResult search(const DataMatrix& data, const SearchConfig& config) {
  config.validate();
  std::vector<SearchResult> runs = parallel_map<SearchResult>(
      static_cast<std::size_t>(config.n_restarts), [&](std::size_t r) {
        return search_once(data, config,
                           derive_seed(config.rng_seed, static_cast<std::uint64_t>(r)),
                           static_cast<int>(r));
      });
  std::size_t winner = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].score.total > runs[winner].score.total + kScoreTieTol) winner = r;
  SearchResult out = runs[winner];
  out.best_restart = static_cast<int>(winner);
  out.restart_scores.clear();
  out.trace = SearchTrace{};
  out.warnings.clear();
  out.audit = SemAudit{};
  for (auto& run : runs) {
    out.restart_scores.push_back(run.score.total);
    out.trace.records.insert(out.trace.records.end(), run.trace.records.begin(),
                             run.trace.records.end());
    out.trace.tabu.insert(run.trace.tabu.begin(), run.trace.tabu.end());
    out.warnings.insert(out.warnings.end(), run.warnings.begin(), run.warnings.end());
    out.audit.merge(run.audit);
  }
  return out;
}

}  // namespace sparsestruct
