#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"

#include "imboost/dataset.hpp"
#include "imboost/errors.hpp"

using namespace imboost;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& csv, const std::optional<std::string>& label = "label") {
  try {
    parse_csv(csv, label);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("data-io") {

TEST_CASE("labeled two-row file") {
  const Dataset d = parse_csv("a,b,label\n1.5,2,0\n-3,4e-1,1\n", std::string("label"));
  CHECK(d.rows() == 2);
  CHECK(d.cols() == 2);
  CHECK(d.features(1, 0) == -3.0);
  CHECK(d.features(1, 1) == 0.4);
  CHECK(*d.labels == std::vector<int>{0, 1});
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("without a label column every column is a feature") {
  const Dataset d = parse_csv("a,b,label\n1,2,0\n3,4,1\n");
  CHECK_FALSE(d.has_labels());
  CHECK(d.cols() == 3);
}

TEST_CASE("errors name the data row and column") {
  const std::string bad = "a,b,label\n1,2,0\n1,2,0\n1,2,0\n1,2,0\n1,abc,0\n";
  CHECK(error_of(bad).find("row 5, column 2") != std::string::npos);
  CHECK(error_of("a,b,label\n1,,0\n").find("row 1, column 2") != std::string::npos);
  CHECK(error_of("a,b,label\n1,2,3\n").find("label must be 0 or 1") != std::string::npos);
  CHECK(error_of("a,b,label\n1,2\n").find("row 1") != std::string::npos);
  CHECK(error_of("a,b\n1,2\n").find("label column") != std::string::npos);
  CHECK(!error_of("").empty());
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), ParseError);
}

TEST_CASE("quoted headers, comments and blank lines") {
  const Dataset d = parse_csv("\"a\",\"b\"\n# note\n1,2\n\n3,4\n", std::nullopt);
  CHECK(d.rows() == 2);
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("write and load round-trip") {
  const fs::path path = fs::temp_directory_path() / "imboost_roundtrip.csv";
  Dataset d = make_synthetic(SyntheticSpec{.n = 40, .seed = 3});
  write_csv(d, path.string());
  const Dataset back = load_csv(path.string(), std::string("label"));
  CHECK(back.features == d.features);
  CHECK(*back.labels == *d.labels);
  CHECK(back.name == "imboost_roundtrip");
  fs::remove(path);
}

TEST_CASE("seven to three split") {
  Dataset d = parse_csv("a,b\n1,1\n2,4\n3,9\n4,16\n5,25\n6,36\n7,49\n8,64\n9,81\n10,100\n");
  const Dataset s = split_and_normalize(d, 0.3, 5);
  CHECK(s.train_idx.size() == 7);
  CHECK(s.test_idx.size() == 3);
  std::set<std::size_t> all(s.train_idx.begin(), s.train_idx.end());
  all.insert(s.test_idx.begin(), s.test_idx.end());
  CHECK(all.size() == 10);

  const Dataset again = split_and_normalize(d, 0.3, 5);
  CHECK(again.train_idx == s.train_idx);
  CHECK(again.features == s.features);

  const Eigen::MatrixXd train = s.train_features();
  CHECK(train.minCoeff() == 0.0);
  CHECK(train.maxCoeff() == 1.0);
  CHECK(s.features.minCoeff() >= -0.5);
  CHECK(s.features.maxCoeff() <= 1.5);
  CHECK(s.raw_features == d.features);
}

TEST_CASE("ceil on the training share") {
  Dataset d;
  d.features = Eigen::MatrixXd::Random(11, 2);
  CHECK(split_and_normalize(d, 0.3, 1).train_idx.size() == 8);  // ceil(7.7)
  d.features = Eigen::MatrixXd::Random(1000, 2);
  CHECK(split_and_normalize(d, 0.3, 1).train_idx.size() == 700);
}

TEST_CASE("a constant feature maps to zero") {
  const Dataset d = parse_csv("a,b\n5,1\n5,2\n5,3\n5,4\n5,5\n");
  const Dataset s = split_and_normalize(d, 0.3, 0);
  CHECK(s.features.col(0).isZero(0.0));
}

TEST_CASE("normalizing with refreshed stats is the identity") {
  Dataset d = make_synthetic(SyntheticSpec{.n = 300, .seed = 4});
  const Dataset s = split_and_normalize(d, 0.3, 9);
  const Eigen::MatrixXd train = s.train_features();
  const NormStats refreshed = NormStats::from_rows(train);
  CHECK((refreshed.transform(train) - train).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("synthetic outlier count is exact") {
  const Dataset d = make_synthetic(SyntheticSpec{.n = 1000, .outlier_fraction = 0.05, .seed = 1});
  CHECK(std::count(d.labels->begin(), d.labels->end(), 1) == 50);
  const Dataset e = make_synthetic(SyntheticSpec{.n = 2000, .outlier_fraction = 0.05, .seed = 1});
  CHECK(std::count(e.labels->begin(), e.labels->end(), 1) == 100);
  CHECK(e.rows() == 2000);
  CHECK(e.cols() == 2);
}

TEST_CASE("zero overlap keeps outliers away from the inlier centres") {
  const Dataset d = make_synthetic(SyntheticSpec{.n = 1000, .overlap = 0.0, .seed = 2});
  double nearest_centre = 1e9, nearest_inlier = 1e9;
  const Eigen::Vector2d c0(-1.5, 0.0), c1(1.5, 0.5);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if ((*d.labels)[i] != 1) continue;
    const Eigen::Vector2d p = d.features.row(static_cast<Eigen::Index>(i)).transpose();
    nearest_centre = std::min({nearest_centre, (p - c0).norm(), (p - c1).norm()});
    for (std::size_t j = 0; j < d.rows(); ++j)
      if ((*d.labels)[j] == 0)
        nearest_inlier = std::min(nearest_inlier, (d.features.row(static_cast<Eigen::Index>(j)).transpose() - p).norm());
  }
  CHECK(nearest_centre >= 1.5);
  CHECK(nearest_inlier > 0.0);
}

TEST_CASE("synthetic data is seeded") {
  const Dataset a = make_synthetic(SyntheticSpec{.n = 200, .seed = 7});
  const Dataset b = make_synthetic(SyntheticSpec{.n = 200, .seed = 7});
  const Dataset c = make_synthetic(SyntheticSpec{.n = 200, .seed = 8});
  CHECK(a.features == b.features);
  CHECK(*a.labels == *b.labels);
  CHECK(a.features != c.features);
}

TEST_CASE("synthetic spec strings") {
  CHECK(SyntheticSpec::parse("default").overlap == 0.5);
  CHECK(SyntheticSpec::parse("ambiguous").overlap == 0.9);
  const SyntheticSpec s = SyntheticSpec::parse("n=300,p_o=0.1,overlap=0.2,seed=4,outlier_kind=cluster");
  CHECK(s.n == 300);
  CHECK(s.outlier_fraction == 0.1);
  CHECK(s.overlap == 0.2);
  CHECK(s.seed == 4);
  CHECK(s.outlier_kind == "cluster");
  CHECK_THROWS_AS(SyntheticSpec::parse("bogus=1"), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic(SyntheticSpec{.outlier_fraction = 0.5}), std::invalid_argument);
}

}  // TEST_SUITE
