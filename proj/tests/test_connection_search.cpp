#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "sparsestruct/synthetic.hpp"

using namespace sparsestruct;

TEST_CASE("analytic gradient matches long double central differences") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 25; ++trial) {
    const int nz = 2 + trial % 3;
    const int nx = 6 - nz;
    const Structure s = oracle::random_structure(rng, nx, nz, 0.7);
    const SuffStats stats = oracle::random_stats(rng, s.n_nodes());
    CHECK(oracle::gradient_max_rel_error(s, stats, 1e-5) < 1e-5);
  }
}

TEST_CASE("e_step matches dense Gaussian conditioning") {
  std::mt19937_64 rng(202);
  std::bernoulli_distribution hide(0.25);
  for (int trial = 0; trial < 25; ++trial) {
    const int nz = 1 + trial % 4;
    const int nx = std::min(10 - nz, 2 + trial % 6);
    const Structure s = oracle::random_structure(rng, nx, nz);
    DataMatrix d = DataMatrix::from_values(MatrixX<double>::Random(nx, 15));
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < 15; ++k) d.mask(i, k) = !hide(rng) || k == i;
    const SuffStats got = e_step(s, d);
    const SuffStats want = oracle::dense_e_step(s, d);
    CHECK(got.m == 15);
    CHECK((got.H - want.H).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("e_step on complete data keeps the empirical object block") {
  std::mt19937_64 rng(7);
  const Structure s = oracle::random_structure(rng, 4, 2);
  const DataMatrix d = DataMatrix::from_values(MatrixX<double>::Random(4, 20));
  const SuffStats st = e_step(s, d);
  const MatrixX<double> emp = d.values * d.values.transpose() / 20.0;
  CHECK((st.H.topLeftCorner(4, 4) - emp).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("conditional mean of a shared parent") {
  Structure s;
  s.assignment = {0, 0};
  s.cluster_edges = MatrixX<double>::Zero(1, 1);
  s.attach_weights = VectorX<double>::Constant(2, 1.5);
  s.sigma2 = 2.0;
  MatrixX<double> v(2, 1);
  v << 0.3, -1.1;
  const DataMatrix d = DataMatrix::from_values(v);
  const MatrixX<double> f = expected_features(s, d);
  const MatrixX<double> cov = build_precision(s).inverse();
  const double want = (cov.block(2, 0, 1, 2) * cov.topLeftCorner(2, 2).inverse() * v)(0, 0);
  CHECK(f(2, 0) == doctest::Approx(want).epsilon(1e-10));
  CHECK(f(0, 0) == 0.3);
}

TEST_CASE("a fully hidden column contributes the prior second moment") {
  std::mt19937_64 rng(9);
  const Structure s = oracle::random_structure(rng, 3, 2);
  DataMatrix d = DataMatrix::from_values(MatrixX<double>::Random(3, 2));
  d.mask.col(1).setConstant(false);
  const SuffStats st = e_step(s, d);
  DataMatrix first = d;
  first.values = d.values.leftCols(1);
  first.mask = d.mask.leftCols(1);
  const SuffStats one = e_step(s, first);
  const MatrixX<double> prior = build_precision(s).inverse();
  CHECK((2.0 * st.H - one.H - prior).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("uncorrelated clusters lose their edge under a large penalty") {
  Structure s;
  s.assignment = {0, 1};
  s.cluster_edges = MatrixX<double>::Zero(2, 2);
  s.attach_weights = VectorX<double>::Ones(2);
  SuffStats st{MatrixX<double>::Identity(4, 4), 100};
  SolverConfig cfg;
  cfg.beta = 1000.0;
  const MStepResult r = m_step_l1(st, s.assignment, cfg, 1.0);
  CHECK(r.structure.cluster_edges(0, 1) == 0.0);
  for (std::size_t i = 1; i < r.objective_history.size(); ++i)
    CHECK(r.objective_history[i] >= r.objective_history[i - 1] - 1e-12);
}

TEST_CASE("l1 M-step has a unique optimum") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const Structure truth = oracle::random_structure(rng, 4, 2, 1.0);
    const SuffStats st{build_precision(truth).inverse(), 200};
    SolverConfig cfg;
    cfg.mstep_pg_tol = 1e-9;
    cfg.mstep_max_iters = 3000;
    Structure a = oracle::random_structure(rng, 4, 2, 1.0);
    Structure b = oracle::random_structure(rng, 4, 2, 1.0);
    a.assignment = b.assignment = truth.assignment;
    const MStepResult ra = m_step_l1(st, truth.assignment, cfg, 1.0, &a);
    const MStepResult rb = m_step_l1(st, truth.assignment, cfg, 1.0, &b);
    CHECK(ra.objective_history.back() ==
          doctest::Approx(rb.objective_history.back()).epsilon(1e-4));
  }
}

TEST_CASE("thresholding keeps valid structures and never loses to the full support") {
  std::mt19937_64 rng(44);
  SolverConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const Structure truth = oracle::random_structure(rng, 5, 3, 0.5);
    const DataMatrix d = sample_features(truth, 300, 10 + trial);
    const Structure start = initial_structure(truth.assignment);
    const SuffStats st = e_step(start, d);
    const MStepResult cont = m_step_l1(st, truth.assignment, cfg, 1.0);
    const Structure picked = threshold_pattern(cont.structure, st, cfg);
    CHECK_NOTHROW(validate(picked));
    const Structure full = refit_fixed_pattern(cont.structure, st, cfg.refit_newton_steps);
    CHECK(expected_score(picked, st, cfg.beta) >= expected_score(full, st, cfg.beta) - 1e-9);
  }

  Structure zero;
  zero.assignment = {0, 1, 2};
  zero.cluster_edges = MatrixX<double>::Zero(3, 3);
  zero.attach_weights = VectorX<double>::Ones(3);
  const DataMatrix d = DataMatrix::from_values(MatrixX<double>::Random(3, 50));
  const Structure out = threshold_pattern(zero, e_step(zero, d), cfg);
  CHECK(cluster_edge_count(out) == 0);
}

TEST_CASE("a negligible edge is removed by thresholding") {
  // Continuous solution {1.0, 0.9, 1e-6} on a 3-chain plus a closing edge.
  Structure truth;
  truth.assignment = {0, 1, 2};
  truth.cluster_edges = MatrixX<double>::Zero(3, 3);
  truth.cluster_edges(0, 1) = truth.cluster_edges(1, 0) = 1.0;
  truth.cluster_edges(1, 2) = truth.cluster_edges(2, 1) = 0.9;
  truth.attach_weights = VectorX<double>::Constant(3, 4.0);
  const SuffStats st{build_precision(truth).inverse(), 1000};
  Structure cont = truth;
  cont.cluster_edges(0, 2) = cont.cluster_edges(2, 0) = 1e-6;
  SolverConfig cfg;
  const Structure picked = threshold_pattern(cont, st, cfg);
  CHECK(picked.cluster_edges(0, 2) == 0.0);
  CHECK(picked.cluster_edges(0, 1) > 0.0);
  CHECK(picked.cluster_edges(1, 2) > 0.0);
}

TEST_CASE("structural EM is monotone and recovers a ring on its own partition") {
  FormSpec spec;
  spec.kind = FormKind::kRing;
  spec.n = 6;
  const Structure truth = build_form(spec);
  const DataMatrix d = sample_features(truth, 1000, 5);
  SolverConfig cfg;
  const SemResult r = structural_em(truth.assignment, d, cfg);
  for (std::size_t i = 1; i < r.score_history.size(); ++i)
    CHECK(r.score_history[i] >= r.score_history[i - 1] - 1e-6);
  CHECK((cluster_adjacency(canonicalize(r.structure)) == cluster_adjacency(canonicalize(truth))).all());
  const StructureScore exact = posterior_score(r.structure, d, cfg.beta);
  CHECK(r.score.total == doctest::Approx(exact.total).epsilon(1e-12));
}

TEST_CASE("structural EM with a single cluster converges at once") {
  const DataMatrix d = DataMatrix::from_values(MatrixX<double>::Random(3, 40));
  SolverConfig cfg;
  const SemResult r = structural_em({0, 0, 0}, d, cfg);
  CHECK(r.structure.n_clusters() == 1);
  CHECK(r.iterations <= 2);
}

TEST_CASE("pruning never lowers the exact score") {
  FormSpec spec;
  spec.kind = FormKind::kChain;
  spec.n = 5;
  const Structure truth = build_form(spec);
  const DataMatrix d = sample_features(truth, 500, 8);
  SolverConfig cfg;
  const EmResult start = fixed_pattern_em(initial_structure(truth.assignment), d, cfg, 30);
  const EmResult pruned = prune_edges(start, d, cfg);
  CHECK(pruned.score.total >= start.score.total - 1e-9);
  CHECK(cluster_edge_count(pruned.structure) <= cluster_edge_count(start.structure));
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda_grid = {};
  CHECK_THROWS_AS(cfg.validate(), InvariantError);
  SolverConfig neg;
  neg.beta = -1.0;
  CHECK_THROWS_AS(neg.validate(), InvariantError);
}
