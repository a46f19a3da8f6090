#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "sparsestruct/induction.hpp"
#include "sparsestruct/synthetic.hpp"

using namespace sparsestruct;

namespace {

// Covariance of a 3-object chain a - b - c with cluster nodes in between.
MatrixX<double> chain_covariance() {
  FormSpec spec;
  spec.kind = FormKind::kChain;
  spec.n = 3;
  spec.attach_strength = 2.0;
  spec.sigma2 = 4.0;
  return object_covariance(build_form(spec));
}

}  // namespace

TEST_CASE("object covariance equals the dense inverse block") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Structure s = oracle::random_structure(rng, 6, 3);
    const MatrixX<double> dense = build_precision(s).inverse().topLeftCorner(6, 6);
    CHECK((object_covariance(s) - dense).cwiseAbs().maxCoeff() < 1e-10);
  }
  Structure shared;
  shared.assignment = {0, 0};
  shared.cluster_edges = MatrixX<double>::Zero(1, 1);
  shared.attach_weights = VectorX<double>::Ones(2);
  CHECK(object_covariance(shared)(0, 1) > 0.0);

  Structure apart;
  apart.assignment = {0, 1};
  apart.cluster_edges = MatrixX<double>::Zero(2, 2);
  apart.attach_weights = VectorX<double>::Ones(2);
  CHECK(object_covariance(apart)(0, 1) == 0.0);
}

TEST_CASE("raw covariance baselines") {
  SimilarityMatrix sim;
  sim.values = MatrixX<double>::Identity(3, 3);
  sim.values(0, 1) = sim.values(1, 0) = 0.3;
  CHECK((raw_covariance_baseline(sim).array() == sim.values.array()).all());

  MatrixX<double> rows(2, 4);
  rows << 1, 1, 0, 0, 0, 0, 1, -1;
  const MatrixX<double> c = raw_covariance_baseline(DataMatrix::from_values(rows));
  CHECK(c(0, 1) == 0.0);
  CHECK(c(0, 0) == 0.5);

  const MatrixX<double> d = MatrixX<double>::Random(50, 85);
  const MatrixX<double> want = d * d.transpose() / 85.0;
  CHECK((raw_covariance_baseline(DataMatrix::from_values(d)) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("closed-form orthant agrees with the quadrature oracle") {
  Eigen::Matrix3d cov = chain_covariance();
  CHECK(oracle::orthant_quadrature(cov) == doctest::Approx(oracle::orthant_closed_form(cov)).epsilon(1e-6));
  Eigen::Matrix3d ind = Eigen::Matrix3d::Identity();
  CHECK(oracle::orthant_quadrature(ind) == doctest::Approx(0.125).epsilon(1e-6));
}

TEST_CASE("argument strengths on a 3-object chain") {
  const MatrixX<double> c = chain_covariance();
  const Eigen::Matrix3d cov = c;
  const FeaturePrior a(c, kDefaultInductionSamples, 1);
  const FeaturePrior b(c, kDefaultInductionSamples, 2);
  CHECK(a.n_samples() == 1000000);

  const double p3 = oracle::orthant_quadrature(cov);
  auto q = [&](int i, int j) {
    return oracle::quadrant_closed_form(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)));
  };
  struct Case {
    InductionArgument arg;
    double want;
  };
  const std::vector<Case> cases{
      {{{0}, {1}}, 2 * q(0, 1)},
      {{{0}, {2}}, 2 * q(0, 2)},
      {{{0}, {1, 2}}, 2 * p3},
      {{{0, 2}, {1}}, p3 / q(0, 2)},
      {{{1, 2}, {0}}, p3 / q(1, 2)},
  };
  for (const auto& cs : cases) {
    const double sa = argument_strength(a, cs.arg);
    const double sb = argument_strength(b, cs.arg);
    CHECK(std::abs(sa - cs.want) < 0.01);
    CHECK(std::abs(sa - sb) < 0.01);
  }
  // Entailed conclusions.
  CHECK(argument_strength(a, {{0, 1}, {1}}) == 1.0);
  CHECK(argument_strength(a, {{2}, {2}}) == 1.0);
  // Premises inside the conclusion are dropped.
  CHECK(argument_strength(a, {{0}, {0, 1}}) == argument_strength(a, {{0}, {1}}));
  // Nearer objects are stronger conclusions.
  CHECK(argument_strength(a, {{0}, {1}}) > argument_strength(a, {{0}, {2}}));
}

TEST_CASE("independent objects give one half") {
  const FeaturePrior prior(MatrixX<double>::Identity(3, 3), kDefaultInductionSamples, 9);
  CHECK(std::abs(argument_strength(prior, {{0}, {2}}) - 0.5) < 0.005);
}

TEST_CASE("determinism and block splitting") {
  const MatrixX<double> c = chain_covariance();
  const FeaturePrior a(c, 200000, 4);
  const FeaturePrior b(c, 200000, 4);
  const FeaturePrior shorter(c, FeaturePrior::kBlockSize, 4);
  const InductionArgument arg{{0}, {1, 2}};
  CHECK(argument_strength(a, arg) == argument_strength(b, arg));
  // The first block is the same draw whatever the total size.
  CHECK(shorter.count({0, 1, 2}) <= a.count({0, 1, 2}));
  const FeaturePrior c1(c, FeaturePrior::kBlockSize, 4);
  CHECK(shorter.count({0}) == c1.count({0}));
}

TEST_CASE("monotone in covariance with premise") {
  // Object 1 and 2 have equal variance; 1 covaries more with 0.
  MatrixX<double> c(3, 3);
  c << 1.0, 0.7, 0.3, 0.7, 1.0, 0.2, 0.3, 0.2, 1.0;
  const std::int64_t n = 400000;
  const FeaturePrior prior(c, n, 12);
  const double s1 = argument_strength(prior, {{0}, {1}});
  const double s2 = argument_strength(prior, {{0}, {2}});
  const double se = std::sqrt(0.25 / (n / 2.0));
  CHECK(s1 > s2 - 2 * se);
  CHECK(s1 >= 0.0);
  CHECK(s1 <= 1.0);
}

TEST_CASE("errors") {
  // Two perfectly anticorrelated objects can never both be positive.
  MatrixX<double> anti(2, 2);
  anti << 1, -1, -1, 1;
  const FeaturePrior prior(anti, 1000, 1);
  CHECK_THROWS_AS(argument_strength(prior, {{0, 1}, {}}), InsufficientSamplesError);
  CHECK_THROWS_AS(argument_strength(prior, {{}, {0}}), InvariantError);
  CHECK_THROWS_AS(argument_strength(prior, {{5}, {0}}), InvariantError);
  MatrixX<double> neg = MatrixX<double>::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(FeaturePrior(neg, 10, 1), NotPositiveDefinite);
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(evaluate_task(x, x) == doctest::Approx(1.0));
  CHECK(evaluate_task(x, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(evaluate_task({0.2, 0.4, 0.3}, {1, 3, 2}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(evaluate_task({1, 2}, {1, 2}), InvariantError);
  CHECK_THROWS_AS(evaluate_task({1, 1, 1}, {1, 2, 3}), InvariantError);
}
