#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "imboost/metrics.hpp"
#include "oracles.hpp"

using namespace imboost;

namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Random scores on a coarse grid so ties are common; both classes present.
Instance random_instance(std::mt19937_64& rng) {
  const std::size_t n = 2 + rng() % 199;
  std::uniform_int_distribution<int> grid(0, 20);
  Instance inst;
  for (std::size_t i = 0; i < n; ++i) {
    inst.scores.push_back(grid(rng) / 7.0);
    inst.labels.push_back(static_cast<int>(rng() % 4 == 0));
  }
  inst.labels[0] = 1;
  inst.labels[1] = 0;
  return inst;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("worked examples") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.7}, std::vector<int>{1, 0, 1}) ==
        doctest::Approx(0.5 + 0.5 * 2.0 / 3.0).epsilon(1e-15));
  CHECK(auc(std::vector<double>{1, 2, 3, 4}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auc(std::vector<double>{2, 2, 2, 2}, std::vector<int>{0, 1, 0, 1}) == 0.5);
  CHECK(average_precision(std::vector<double>{5, 4, 1, 0}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  // One tied group holding everything: precision 2/4 at full recall.
  CHECK(average_precision(std::vector<double>{1, 1, 1, 1}, std::vector<int>{1, 0, 1, 0}) == 0.5);
}

TEST_CASE("single-class labels are undefined") {
  CHECK_THROWS_AS(auc(std::vector<double>{1, 2}, std::vector<int>{0, 0}), UndefinedMetric);
  CHECK_THROWS_AS(average_precision(std::vector<double>{1, 2}, std::vector<int>{1, 1}), UndefinedMetric);
}

TEST_CASE("both metrics equal brute-force oracles") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const Instance inst = random_instance(rng);
    CHECK(auc(inst.scores, inst.labels) == testing::brute_auc(inst.scores, inst.labels));
    CHECK(average_precision(inst.scores, inst.labels) == testing::brute_ap(inst.scores, inst.labels));
  }
}

TEST_CASE("strictly increasing transforms change nothing") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance inst = random_instance(rng);
    std::vector<double> t;
    for (double s : inst.scores) t.push_back(std::exp(3.0 * s) - 2.0);
    CHECK(auc(t, inst.labels) == auc(inst.scores, inst.labels));
    CHECK(average_precision(t, inst.labels) == average_precision(inst.scores, inst.labels));
  }
}

TEST_CASE("negated scores flip the AUC when there are no ties") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Instance inst = random_instance(rng);
    for (auto& s : inst.scores) s = normal(rng);
    std::vector<double> neg;
    for (double s : inst.scores) neg.push_back(-s);
    CHECK(auc(inst.scores, inst.labels) == doctest::Approx(1.0 - auc(neg, inst.labels)).epsilon(1e-14));
  }
}

TEST_CASE("evaluation report") {
  const EvalReport r = evaluate(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1});
  CHECK(r.auc == 0.75);
  CHECK(r.n_pos == 2);
  CHECK(r.n_neg == 2);
  CHECK(r.ap == doctest::Approx(average_precision(std::vector<double>{0.1, 0.4, 0.35, 0.8},
                                                  std::vector<int>{0, 0, 1, 1})));
}

TEST_CASE("mean and sample standard deviation") {
  const MeanStd a = mean_std(std::vector<double>{0.8, 0.9, 1.0});
  CHECK(a.mean == doctest::Approx(0.9));
  CHECK(a.stddev == doctest::Approx(0.1));
  const MeanStd one = mean_std(std::vector<double>{0.7});
  CHECK(one.mean == 0.7);
  CHECK(one.stddev == 0.0);
}

}  // TEST_SUITE
