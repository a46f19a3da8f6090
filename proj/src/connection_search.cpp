#include "sparsestruct/connection_search.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "sparsestruct/optim.hpp"

namespace sparsestruct {

namespace {

constexpr double kPositiveFloor = 1e-8;
constexpr int kNewtonMaxParams = 400;

// Variables: free cluster-pair strengths, then n_x attachments, then tau.
struct Layout {
  int nx = 0;
  int nz = 0;
  std::vector<int> assignment;
  std::vector<std::pair<int, int>> cc;          // cluster pairs i < j
  std::vector<std::pair<int, int>> node_pairs;  // n_t indices per edge variable

  Layout(const std::vector<int>& partition, int n_clusters,
         std::vector<std::pair<int, int>> pairs)
      : nx(static_cast<int>(partition.size())),
        nz(n_clusters),
        assignment(partition),
        cc(std::move(pairs)) {
    for (auto [i, j] : cc) node_pairs.emplace_back(nx + i, nx + j);
    for (int x = 0; x < nx; ++x) node_pairs.emplace_back(x, nx + assignment[x]);
  }

  int n_edges() const { return static_cast<int>(node_pairs.size()); }
  int n_params() const { return n_edges() + 1; }
  int n_nodes() const { return nx + nz; }

  VectorX<double> lower() const {
    VectorX<double> lb(n_params());
    for (int e = 0; e < n_params(); ++e)
      lb[e] = e < static_cast<int>(cc.size()) ? 0.0 : kPositiveFloor;
    return lb;
  }

  VectorX<double> pack(const Structure& s) const {
    VectorX<double> x(n_params());
    int e = 0;
    for (auto [i, j] : cc) x[e++] = s.cluster_edges(i, j);
    for (int o = 0; o < nx; ++o) x[e++] = s.attach_weights[o];
    x[e] = 1.0 / s.sigma2;
    return x;
  }

  Structure unpack(const VectorX<double>& x) const {
    Structure s;
    s.assignment = assignment;
    s.cluster_edges = MatrixX<double>::Zero(nz, nz);
    int e = 0;
    for (auto [i, j] : cc) {
      s.cluster_edges(i, j) = s.cluster_edges(j, i) = x[e++];
    }
    s.attach_weights.resize(nx);
    for (int o = 0; o < nx; ++o) s.attach_weights[o] = x[e++];
    s.sigma2 = 1.0 / x[e];
    apply_edge_floor(s);
    return s;
  }

  MatrixX<double> precision(const VectorX<double>& x) const {
    const int nt = n_nodes();
    MatrixX<double> j = MatrixX<double>::Zero(nt, nt);
    for (int e = 0; e < n_edges(); ++e) {
      const auto [a, b] = node_pairs[e];
      const double w = x[e];
      j(a, b) -= w;
      j(b, a) -= w;
      j(a, a) += w;
      j(b, b) += w;
    }
    j.diagonal().array() += x[n_edges()];
    return j;
  }
};

// Minimization form: -log|J| + tr(HJ) + c * sum(cluster edges).
class Objective {
 public:
  Objective(const Layout& layout, const MatrixX<double>& h, double penalty)
      : layout_(layout), penalty_(penalty), tr_h_(h.trace()) {
    hdiff_.resize(layout.n_edges());
    for (int e = 0; e < layout.n_edges(); ++e) {
      const auto [a, b] = layout.node_pairs[e];
      hdiff_[e] = h(a, a) + h(b, b) - 2.0 * h(a, b);
    }
  }

  double operator()(const VectorX<double>& x, VectorX<double>* grad,
                    MatrixX<double>* hess, VectorX<double>* diag = nullptr) const {
    const int ne = layout_.n_edges();
    const int ncc = static_cast<int>(layout_.cc.size());
    const int nx = layout_.nx;
    const int nz = layout_.nz;
    const double tau = x[ne];

    // Objects are leaves: eliminating them leaves the cluster block
    // K = J_zz - sum_x a_x^2 / (a_x + tau) e_c e_c^T, so |J| = |K| prod(a_x + tau).
    const VectorX<double> a = x.segment(ncc, nx);
    const VectorX<double> d = a.array() + tau;
    const VectorX<double> r = a.cwiseQuotient(d);
    MatrixX<double> k = MatrixX<double>::Zero(nz, nz);
    for (int e = 0; e < ncc; ++e) {
      const auto [i, j] = layout_.cc[e];
      k(i, j) -= x[e];
      k(j, i) -= x[e];
      k(i, i) += x[e];
      k(j, j) += x[e];
    }
    for (int o = 0; o < nx; ++o) k(layout_.assignment[o], layout_.assignment[o]) += a[o] * (1.0 - r[o]);
    k.diagonal().array() += tau;
    Eigen::LLT<MatrixX<double>> llt(k);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum() + d.array().log().sum();
    if (!std::isfinite(logdet)) return std::numeric_limits<double>::infinity();
    double f = -logdet + x.head(ne).dot(hdiff_) + x[ne] * tr_h_;
    if (ncc > 0) f += penalty_ * x.head(ncc).sum();
    if (grad == nullptr && hess == nullptr && diag == nullptr) return f;

    // W = J^-1 assembled from K^-1.
    const MatrixX<double> kinv = llt.solve(MatrixX<double>::Identity(nz, nz));
    MatrixX<double> w(nx + nz, nx + nz);
    w.bottomRightCorner(nz, nz) = kinv;
    for (int o = 0; o < nx; ++o) {
      const int c = layout_.assignment[o];
      w.block(o, nx, 1, nz) = r[o] * kinv.row(c);
      w.block(nx, o, nz, 1) = r[o] * kinv.col(c);
      for (int q = 0; q < nx; ++q)
        w(o, q) = r[o] * r[q] * kinv(c, layout_.assignment[q]);
      w(o, o) += 1.0 / d[o];
    }
    if (grad != nullptr) {
      grad->resize(x.size());
      for (int e = 0; e < ne; ++e) {
        const auto [a, b] = layout_.node_pairs[e];
        (*grad)[e] = -(w(a, a) + w(b, b) - 2.0 * w(a, b)) + hdiff_[e] +
                     (e < ncc ? penalty_ : 0.0);
      }
      (*grad)[ne] = -w.trace() + tr_h_;
    }
    if (hess != nullptr) {
      // d2(-log|J|)/dx_a dx_b = tr(W A_a W A_b); A_e = u u^T, A_tau = I.
      MatrixX<double> wu(nx + nz, ne);
      for (int e = 0; e < ne; ++e) {
        const auto [a, b] = layout_.node_pairs[e];
        wu.col(e) = w.col(a) - w.col(b);
      }
      MatrixX<double> utwu(ne, ne);
      for (int e = 0; e < ne; ++e) {
        const auto [a, b] = layout_.node_pairs[e];
        utwu.row(e) = wu.row(a) - wu.row(b);
      }
      hess->resize(x.size(), x.size());
      hess->topLeftCorner(ne, ne) = utwu.array().square().matrix();
      for (int e = 0; e < ne; ++e) {
        const double v = wu.col(e).squaredNorm();
        (*hess)(e, ne) = v;
        (*hess)(ne, e) = v;
      }
      (*hess)(ne, ne) = w.squaredNorm();
    }
    if (diag != nullptr) {
      diag->resize(x.size());
      for (int e = 0; e < ne; ++e) {
        const auto [a, b] = layout_.node_pairs[e];
        const double v = w(a, a) + w(b, b) - 2.0 * w(a, b);
        (*diag)[e] = v * v;
      }
      (*diag)[ne] = w.squaredNorm();
    }
    return f;
  }

 private:
  const Layout& layout_;
  double penalty_;
  double tr_h_;
  VectorX<double> hdiff_;
};

std::vector<std::pair<int, int>> all_pairs(int nz) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < nz; ++i)
    for (int j = i + 1; j < nz; ++j) out.emplace_back(i, j);
  return out;
}

std::vector<std::pair<int, int>> present_pairs(const Structure& s) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < s.n_clusters(); ++i)
    for (int j = i + 1; j < s.n_clusters(); ++j)
      if (s.cluster_edges(i, j) > kEdgeFloor) out.emplace_back(i, j);
  return out;
}

int cluster_count(const std::vector<int>& partition) {
  int nz = 0;
  for (int z : partition) nz = std::max(nz, z + 1);
  return nz;
}

// Hidden coordinates of one mask group given the precision matrix.
struct GroupPosterior {
  std::vector<int> hidden;
  MatrixX<double> cov;    // J_UU^-1
  MatrixX<double> means;  // |U| x columns
};

GroupPosterior condition_group(const MatrixX<double>& j, const MaskGroup& g,
                               const MatrixX<double>& f_obs) {
  const int nt = static_cast<int>(j.rows());
  GroupPosterior post;
  std::vector<bool> is_obs(nt, false);
  for (int o : g.observed) is_obs[o] = true;
  for (int i = 0; i < nt; ++i)
    if (!is_obs[i]) post.hidden.push_back(i);
  if (post.hidden.empty()) return post;
  Eigen::LLT<MatrixX<double>> llt(j(post.hidden, post.hidden));
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("e_step: hidden precision block not positive definite");
  post.cov = llt.solve(MatrixX<double>::Identity(post.hidden.size(), post.hidden.size()));
  if (g.observed.empty()) {
    post.means = MatrixX<double>::Zero(post.hidden.size(), f_obs.cols());
  } else {
    post.means = -llt.solve(j(post.hidden, g.observed) * f_obs);
  }
  return post;
}

}  // namespace

void SolverConfig::validate() const {
  if (lambda_grid.empty()) throw InvariantError("solver: empty lambda grid");
  for (double l : lambda_grid)
    if (!(l > 0.0)) throw InvariantError("solver: lambda must be positive");
  if (!(beta >= 0.0)) throw InvariantError("solver: beta must be non-negative");
  if (max_sem_iters <= 0 || max_em_iters <= 0 || mstep_max_iters <= 0 ||
      refit_newton_steps <= 0 || threshold_cutoffs <= 0)
    throw InvariantError("solver: iteration limits must be positive");
  if (prune_em_iters <= 0) throw InvariantError("solver: prune_em_iters must be positive");
  if (!(sem_tol > 0.0) || !(em_tol > 0.0) || !(mstep_pg_tol > 0.0))
    throw InvariantError("solver: tolerances must be positive");
}

Structure initial_structure(const std::vector<int>& partition, double edge,
                            double attach, double sigma2) {
  Structure s;
  s.assignment = partition;
  const int nz = cluster_count(partition);
  s.cluster_edges = MatrixX<double>::Constant(nz, nz, edge);
  s.cluster_edges.diagonal().setZero();
  s.attach_weights = VectorX<double>::Constant(partition.size(), attach);
  s.sigma2 = sigma2;
  return s;
}

SuffStats e_step(const Structure& s, const DataMatrix& data) {
  if (data.n_objects() != s.n_objects())
    throw InvariantError("e_step: object count mismatch");
  const MatrixX<double> j = build_precision(s);
  const int nt = s.n_nodes();
  SuffStats out;
  out.m = data.n_features();
  out.H = MatrixX<double>::Zero(nt, nt);
  for (const MaskGroup& g : mask_groups(data)) {
    const MatrixX<double> f = data.values(g.observed, g.columns);
    const GroupPosterior post = condition_group(j, g, f);
    const auto& o = g.observed;
    const auto& u = post.hidden;
    if (!o.empty()) out.H(o, o) += f * f.transpose();
    if (u.empty()) continue;
    if (!o.empty()) {
      const MatrixX<double> cross = f * post.means.transpose();
      out.H(o, u) += cross;
      out.H(u, o) += cross.transpose();
    }
    out.H(u, u) += post.means * post.means.transpose() +
                   static_cast<double>(g.columns.size()) * post.cov;
  }
  out.H /= static_cast<double>(std::max(1, out.m));
  out.H = 0.5 * (out.H + out.H.transpose()).eval();
  return out;
}

MatrixX<double> expected_features(const Structure& s, const DataMatrix& data) {
  const MatrixX<double> j = build_precision(s);
  const int nx = s.n_objects();
  MatrixX<double> out = MatrixX<double>::Zero(s.n_nodes(), data.n_features());
  out.topRows(nx) = data.values;
  for (const MaskGroup& g : mask_groups(data)) {
    const MatrixX<double> f = data.values(g.observed, g.columns);
    const GroupPosterior post = condition_group(j, g, f);
    if (!post.hidden.empty()) out(post.hidden, g.columns) = post.means;
  }
  return out;
}

double complete_data_objective(const Structure& s, const SuffStats& stats) {
  const MatrixX<double> j = build_precision(s);
  return log_det_spd(j) - (stats.H.cwiseProduct(j)).sum();
}

ObjectiveGradient complete_data_gradient(const Structure& s, const SuffStats& stats) {
  const Layout layout(s.assignment, s.n_clusters(), all_pairs(s.n_clusters()));
  const Objective obj(layout, stats.H, 0.0);
  VectorX<double> g;
  obj(layout.pack(s), &g, nullptr);
  ObjectiveGradient out;
  out.cluster_edges = MatrixX<double>::Zero(s.n_clusters(), s.n_clusters());
  int e = 0;
  for (auto [i, k] : layout.cc) {
    out.cluster_edges(i, k) = out.cluster_edges(k, i) = -g[e++];
  }
  out.attach = -g.segment(e, s.n_objects());
  out.tau = -g[layout.n_edges()];
  return out;
}

double expected_score(const Structure& s, const SuffStats& stats, double beta,
                      bool include_attachments) {
  return 0.5 * stats.m * complete_data_objective(s, stats) -
         beta * edge_count(s, include_attachments);
}

MStepResult m_step_l1(const SuffStats& stats, const std::vector<int>& partition,
                      const SolverConfig& config, double lambda, const Structure* warm) {
  const int nz = cluster_count(partition);
  const Layout layout(partition, nz, all_pairs(nz));
  if (stats.H.rows() != layout.n_nodes())
    throw InvariantError("m_step_l1: statistics size does not match partition");
  const double penalty = 2.0 * config.beta * lambda / std::max(1, stats.m);
  const Objective obj(layout, stats.H, penalty);

  const Structure start = (warm != nullptr && warm->assignment == partition)
                              ? *warm
                              : initial_structure(partition);
  BoundedProblem problem{
      [&obj](const VectorX<double>& x, VectorX<double>* g, MatrixX<double>* h,
             VectorX<double>* d) { return obj(x, g, h, d); },
      layout.lower(), true};
  MinimizeOptions opts;
  opts.max_iters = config.mstep_max_iters;
  opts.pg_tol = config.mstep_pg_tol;
  const MinimizeResult r = projected_lbfgs(problem, layout.pack(start), opts);

  MStepResult out;
  out.structure = layout.unpack(r.x);
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.objective_history.reserve(r.history.size());
  for (double f : r.history) out.objective_history.push_back(-f);
  return out;
}

Structure refit_fixed_pattern(const Structure& start, const SuffStats& stats,
                              int max_steps, double pg_tol) {
  const Layout layout(start.assignment, start.n_clusters(), present_pairs(start));
  const Objective obj(layout, stats.H, 0.0);
  BoundedProblem problem{
      [&obj](const VectorX<double>& x, VectorX<double>* g, MatrixX<double>* h,
             VectorX<double>* d) { return obj(x, g, h, d); },
      layout.lower(), true};
  MinimizeOptions opts;
  opts.pg_tol = pg_tol;
  MinimizeResult r;
  if (layout.n_params() <= kNewtonMaxParams) {
    opts.max_iters = max_steps;
    r = projected_newton(problem, layout.pack(start), opts);
  } else {
    opts.max_iters = 8 * max_steps;
    r = projected_lbfgs(problem, layout.pack(start), opts);
  }
  return layout.unpack(r.x);
}

Structure threshold_pattern(const Structure& continuous, const SuffStats& stats,
                            const SolverConfig& config) {
  const int nz = continuous.n_clusters();
  std::vector<double> magnitudes;
  for (int i = 0; i < nz; ++i)
    for (int j = i + 1; j < nz; ++j)
      if (continuous.cluster_edges(i, j) > kEdgeFloor)
        magnitudes.push_back(continuous.cluster_edges(i, j));

  std::vector<double> cutoffs{std::numeric_limits<double>::infinity()};  // no edges
  if (!magnitudes.empty()) {
    const double lo = *std::min_element(magnitudes.begin(), magnitudes.end());
    const double hi = *std::max_element(magnitudes.begin(), magnitudes.end());
    cutoffs.push_back(lo);  // full support
    const int n = config.threshold_cutoffs;
    for (int k = 0; k < n; ++k) {
      const double t = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1));
      cutoffs.push_back(t);
    }
  }

  std::set<std::vector<std::pair<int, int>>> seen;
  Structure best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (double t : cutoffs) {
    Structure cand = continuous;
    std::vector<std::pair<int, int>> pattern;
    for (int i = 0; i < nz; ++i)
      for (int j = i + 1; j < nz; ++j) {
        if (continuous.cluster_edges(i, j) > kEdgeFloor &&
            continuous.cluster_edges(i, j) >= t * (1.0 - 1e-12)) {
          pattern.emplace_back(i, j);
        } else {
          cand.cluster_edges(i, j) = cand.cluster_edges(j, i) = 0.0;
        }
      }
    if (!seen.insert(pattern).second) continue;
    cand = refit_fixed_pattern(cand, stats, config.refit_newton_steps);
    const double score =
        expected_score(cand, stats, config.beta, config.include_attachments);
    if (score > best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

EmResult fixed_pattern_em(const Structure& init, const DataMatrix& data,
                          const SolverConfig& config, int max_iters) {
  EmResult out;
  out.structure = init;
  out.score = posterior_score(init, data, config.beta, config.include_attachments);
  out.score_history.push_back(out.score.total);
  for (int it = 0; it < max_iters; ++it) {
    const SuffStats stats = e_step(out.structure, data);
    Structure next = refit_fixed_pattern(out.structure, stats, config.refit_newton_steps);
    const StructureScore score =
        posterior_score(next, data, config.beta, config.include_attachments);
    const double gain = score.total - out.score.total;
    out.score_history.push_back(score.total);
    out.iterations = it + 1;
    if (gain < 0.0) break;  // round-off at convergence; keep the better point
    out.structure = std::move(next);
    out.score = score;
    if (gain < config.em_tol * std::max(1.0, std::abs(score.loglik))) break;
  }
  return out;
}

EmResult prune_edges(const EmResult& current, const DataMatrix& data,
                     const SolverConfig& config) {
  EmResult cur = current;
  for (;;) {
    const std::vector<std::pair<int, int>> edges = present_pairs(cur.structure);
    if (edges.empty()) return cur;
    auto without = [](Structure s, std::pair<int, int> e) {
      s.cluster_edges(e.first, e.second) = 0.0;
      s.cluster_edges(e.second, e.first) = 0.0;
      return s;
    };
    const std::vector<double> trial = parallel_map<double>(edges.size(), [&](std::size_t e) {
      return fixed_pattern_em(without(cur.structure, edges[e]), data, config,
                              config.prune_em_iters)
          .score.total;
    });
    // Promising deletions, best first, each re-checked against the current
    // structure before it is kept.
    std::vector<std::size_t> order;
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (trial[e] > cur.score.total) order.push_back(e);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return trial[a] > trial[b]; });
    bool accepted = false;
    for (std::size_t e : order) {
      if (!(cur.structure.cluster_edges(edges[e].first, edges[e].second) > kEdgeFloor))
        continue;
      EmResult next = fixed_pattern_em(without(cur.structure, edges[e]), data, config,
                                       config.prune_em_iters);
      if (next.score.total > cur.score.total) {
        cur = std::move(next);
        accepted = true;
      }
    }
    if (!accepted) return cur;
    EmResult settled = fixed_pattern_em(cur.structure, data, config, config.max_em_iters);
    if (settled.score.total > cur.score.total) cur = std::move(settled);
  }
}

SemResult structural_em(const std::vector<int>& partition, const DataMatrix& data,
                        const SolverConfig& config, const Structure* init) {
  config.validate();
  if (static_cast<int>(partition.size()) != data.n_objects())
    throw InvariantError("structural_em: partition size differs from object count");
  SemResult out;
  if (init != nullptr) {
    if (init->assignment != partition)
      throw InvariantError("structural_em: init structure has a different partition");
    out.structure = *init;
  } else {
    out.structure = initial_structure(partition);
  }
  validate(out.structure);
  out.score = posterior_score(out.structure, data, config.beta, config.include_attachments);
  out.score_history.push_back(out.score.total);

  for (int r = 0; r < config.max_sem_iters; ++r) {
    const SuffStats stats = e_step(out.structure, data);

    Structure best = refit_fixed_pattern(out.structure, stats, config.refit_newton_steps);
    double best_q = expected_score(best, stats, config.beta, config.include_attachments);
    for (double lambda : config.lambda_grid) {
      const MStepResult ms = m_step_l1(stats, partition, config, lambda, &out.structure);
      if (!ms.converged)
        out.warnings.push_back("m_step_l1 unconverged at lambda=" + std::to_string(lambda));
      Structure cand = threshold_pattern(ms.structure, stats, config);
      const double q = expected_score(cand, stats, config.beta, config.include_attachments);
      if (q > best_q) {
        best_q = q;
        best = std::move(cand);
      }
    }

    EmResult em = fixed_pattern_em(best, data, config, config.max_em_iters);
    const double previous = out.score.total;
    out.score_history.push_back(em.score.total);
    out.iterations = r + 1;
    out.structure = std::move(em.structure);
    out.score = em.score;
    const double gain = out.score.total - previous;
    if (gain >= config.sem_tol * std::max(1.0, std::abs(previous))) continue;
    if (!config.prune) break;

    EmResult settled;
    settled.structure = out.structure;
    settled.score = out.score;
    const EmResult pruned = prune_edges(settled, data, config);
    if (!(pruned.score.total > out.score.total + config.sem_tol * std::abs(out.score.total)))
      break;
    out.structure = pruned.structure;
    out.score = pruned.score;
    out.score_history.push_back(out.score.total);
  }
  validate(out.structure);
  return out;
}

void SemAudit::add(const SemResult& r, double tol) {
  ++calls;
  for (std::size_t i = 1; i < r.score_history.size(); ++i) {
    const double drop = r.score_history[i - 1] - r.score_history[i];
    worst_drop = std::max(worst_drop, drop);
    if (drop > tol) ++violations;
  }
}

void SemAudit::merge(const SemAudit& other) {
  calls += other.calls;
  violations += other.violations;
  worst_drop = std::max(worst_drop, other.worst_drop);
}

}  // namespace sparsestruct
