#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sparsestruct/data_pipeline.hpp"

using namespace sparsestruct;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "sparsestruct_test_data";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p.string();
}

double max_gram(const DataMatrix& d) {
  return (d.values * d.values.transpose() / static_cast<double>(d.n_features())).maxCoeff();
}

}  // namespace

TEST_CASE("rescale leaves a unit matrix alone") {
  MatrixX<double> v(2, 1);
  v << 1, -1;
  auto [out, rep] = rescale(DataMatrix::from_values(v));
  CHECK(rep.shift == 0.0);
  CHECK(rep.scale == doctest::Approx(1.0));
  CHECK((out.values - v).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("rescale of [[2],[0]]") {
  MatrixX<double> v(2, 1);
  v << 2, 0;
  auto [out, rep] = rescale(DataMatrix::from_values(v));
  CHECK(rep.shift == doctest::Approx(1.0));
  CHECK(out.values.mean() == doctest::Approx(0.0));
  CHECK(max_gram(out) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rescale post-conditions and idempotence on random data") {
  const DataMatrix d = DataMatrix::from_values(MatrixX<double>::Random(7, 30).array() * 3 + 2);
  auto [once, r1] = rescale(d);
  CHECK(std::abs(once.values.mean()) < 1e-12);
  CHECK(max_gram(once) == doctest::Approx(1.0).epsilon(1e-9));
  auto [twice, r2] = rescale(once);
  CHECK((twice.values - once.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rescale uses the most common mask pattern") {
  MatrixX<double> v = MatrixX<double>::Random(3, 10);
  DataMatrix d = DataMatrix::from_values(v);
  // Columns 0..5 hide object 2; columns 6..9 are complete.
  for (int k = 0; k < 6; ++k) d.mask(2, k) = false;
  auto [out, rep] = rescale(d);
  CHECK(rep.reference_columns == 6);
  CHECK(rep.reference_mask_pattern == std::vector<bool>{true, true, false});
  const MatrixX<double> sub = v.block(0, 0, 2, 6);
  CHECK(rep.shift == doctest::Approx(sub.mean()));
  const MatrixX<double> c = sub.array() - sub.mean();
  CHECK(rep.scale == doctest::Approx(1.0 / std::sqrt((c * c.transpose() / 6.0).maxCoeff())));
  CHECK(out.values(2, 0) == 0.0);
}

TEST_CASE("rescale rejects constant data") {
  const DataMatrix d = DataMatrix::from_values(MatrixX<double>::Constant(3, 4, 2.5));
  CHECK_THROWS_AS(rescale(d), DegenerateDataError);
}

TEST_CASE("similarity sampling: identity, determinism, convergence, clipping") {
  SimilarityMatrix id;
  id.values = MatrixX<double>::Identity(4, 4);
  id.names = {"a", "b", "c", "d"};
  const SampledFeatures s = similarity_to_features(id, kDefaultSimilarityFeatures, 1);
  CHECK(kDefaultSimilarityFeatures == 2000);
  CHECK(s.data.n_features() == 2000);
  CHECK(s.data.complete());
  const MatrixX<double> cov = s.data.values * s.data.values.transpose() / 2000.0;
  CHECK((cov - id.values).cwiseAbs().maxCoeff() < 0.1);
  const SampledFeatures again = similarity_to_features(id, 2000, 1);
  CHECK((again.data.values.array() == s.data.values.array()).all());
  CHECK(s.data.object_names == id.names);

  SimilarityMatrix five;
  five.values = MatrixX<double>::Identity(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != j) five.values(i, j) = 0.8 / (1 + std::abs(i - j));
  const SampledFeatures big = similarity_to_features(five, 50000, 3);
  const MatrixX<double> c5 = big.data.values * big.data.values.transpose() / 50000.0;
  CHECK((c5 - five.values).cwiseAbs().maxCoeff() < 0.03);
  CHECK(big.clipped_eigenvalues == 0);

  SimilarityMatrix bad;
  bad.values = MatrixX<double>::Ones(3, 3);
  bad.values(0, 1) = bad.values(1, 0) = -1.0;
  const SampledFeatures clipped = similarity_to_features(bad, 10, 0);
  CHECK(clipped.clipped_eigenvalues >= 1);
  CHECK(clipped.clipped_mass > 0.0);
}

TEST_CASE("load a named feature matrix with missing cells") {
  const std::string p = temp_file("features.csv", "name,f1,f2,f3\nbat,1,NA,0\ncat,0,1,\ndog,1,1,1\n");
  const LoadedMatrix m = load_matrix(p);
  REQUIRE(std::holds_alternative<DataMatrix>(m));
  const DataMatrix& d = std::get<DataMatrix>(m);
  CHECK(d.n_objects() == 3);
  CHECK(d.n_features() == 3);
  CHECK(d.object_names == std::vector<std::string>{"bat", "cat", "dog"});
  CHECK(d.feature_names == std::vector<std::string>{"f1", "f2", "f3"});
  CHECK_FALSE(d.mask(0, 1));
  CHECK_FALSE(d.mask(1, 2));
  CHECK(d.mask(2, 2));
  CHECK(d.values(2, 2) == 1.0);

  const std::string tsv = temp_file("features.tsv", "name\tf1\tf2\na\t0.5\t-1\nb\t2\t3\n");
  CHECK(std::get<DataMatrix>(load_matrix(tsv)).values(0, 1) == -1.0);
}

TEST_CASE("load errors carry diagnostics") {
  const std::string ragged = temp_file("ragged.csv", "n,a,b\nx,1,2\ny,1\n");
  CHECK_THROWS_AS(load_matrix(ragged), ParseError);
  const std::string text = temp_file("text.csv", "n,a\nx,yes\n");
  try {
    load_matrix(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("yes") != std::string::npos);
  }
  const std::string asym = temp_file("asym.csv", "n,a,b,c\na,1,0.5,0.1\nb,0.5,1,0.2\nc,0.1,0.3,1\n");
  try {
    load_matrix(asym, MatrixKind::kSimilarity);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("(b, c)") != std::string::npos);
  }
  const std::string empty_row = temp_file("empty_row.csv", "n,a,b\nx,1,2\ny,NA,NA\n");
  CHECK_THROWS_AS(load_matrix(empty_row), ParseError);
  CHECK_THROWS_AS(load_matrix("/nonexistent/file.csv"), ParseError);
}

TEST_CASE("sidecar declares a similarity matrix") {
  const std::string p = temp_file("sim.csv", "n,a,b\na,1,0.4\nb,0.4,1\n");
  std::ofstream(p + ".json") << R"({"kind": "similarity"})";
  const LoadedMatrix m = load_matrix(p);
  REQUIRE(std::holds_alternative<SimilarityMatrix>(m));
  CHECK(std::get<SimilarityMatrix>(m).values(0, 1) == 0.4);
}

TEST_CASE("features round-trip through CSV") {
  DataMatrix d = DataMatrix::from_values(MatrixX<double>::Random(3, 4));
  d.mask(1, 2) = false;
  const fs::path p = fs::temp_directory_path() / "sparsestruct_test_data" / "roundtrip.csv";
  fs::create_directories(p.parent_path());
  write_matrix_csv(p.string(), d);
  const DataMatrix back = std::get<DataMatrix>(load_matrix(p.string()));
  CHECK_FALSE(back.mask(1, 2));
  CHECK(back.mask.count() == d.mask.count());
  CHECK((d.mask.select(back.values - d.values, 0.0)).cwiseAbs().maxCoeff() == 0.0);
}
