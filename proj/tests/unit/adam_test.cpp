#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "imboost/adam.hpp"
#include "imboost/errors.hpp"

using namespace imboost;

namespace {

void step(AdamState& s, std::vector<double>& p, const std::vector<double>& g) {
  adam_step(s, p, g);
}

/// Textbook recursion for one coordinate.
struct ScriptedAdam {
  double m = 0, v = 0, theta = 0;
  int t = 0;
  void update(double g, double lr = 1e-3) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    theta -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

}  // namespace

TEST_SUITE("adam") {

TEST_CASE("first two steps with a unit gradient") {
  AdamState s = AdamState::zeros(1);
  std::vector<double> p{0.0};
  step(s, p, {1.0});
  // -1e-3 / (1 + 1e-8)
  CHECK(p[0] == doctest::Approx(-0.00099999999000000010).epsilon(1e-15));
  step(s, p, {1.0});
  CHECK(p[0] == doctest::Approx(-0.00199999998000000020).epsilon(1e-15));
  CHECK(s.step_count == 2);
}

TEST_CASE("defaults") {
  const AdamState s = AdamState::zeros(3);
  CHECK(s.lr == 1e-3);
  CHECK(s.beta1 == 0.9);
  CHECK(s.beta2 == 0.999);
  CHECK(s.eps == 1e-8);
  CHECK(s.m.isZero(0.0));
  CHECK(s.v.isZero(0.0));
}

TEST_CASE("matches a scripted recursion over a random gradient stream") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 3.0);
  AdamState s = AdamState::zeros(1);
  std::vector<double> p{0.0};
  ScriptedAdam ref;
  for (int i = 0; i < 200; ++i) {
    const double g = normal(rng);
    step(s, p, {g});
    ref.update(g);
    REQUIRE(std::abs(p[0] - ref.theta) < 1e-12);
  }
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  AdamState s = AdamState::zeros(4);
  std::vector<double> p{1.0, -2.0, 3.5, 0.0};
  const auto before = p;
  for (int i = 0; i < 5; ++i) step(s, p, {0, 0, 0, 0});
  CHECK(p == before);
}

TEST_CASE("non-finite gradients are rejected with the state intact") {
  AdamState s = AdamState::zeros(2);
  std::vector<double> p{1.0, 2.0};
  step(s, p, {0.5, -0.5});
  const AdamState saved = s;
  const auto before = p;
  CHECK_THROWS_AS(step(s, p, {std::numeric_limits<double>::quiet_NaN(), 0.0}), NumericError);
  CHECK_THROWS_AS(step(s, p, {0.0, std::numeric_limits<double>::infinity()}), NumericError);
  CHECK(p == before);
  CHECK(s.step_count == saved.step_count);
  CHECK(s.m == saved.m);
  CHECK(s.v == saved.v);
  CHECK_THROWS_AS(step(s, p, {1.0}), ShapeError);
}

TEST_CASE("stepping a concatenation equals stepping each slice") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  AdamState whole = AdamState::zeros(5);
  AdamState left = AdamState::zeros(2);
  AdamState right = AdamState::zeros(3);
  std::vector<double> p(5), pl(2), pr(3);
  for (int i = 0; i < 5; ++i) p[i] = normal(rng);
  std::copy(p.begin(), p.begin() + 2, pl.begin());
  std::copy(p.begin() + 2, p.end(), pr.begin());
  for (int it = 0; it < 30; ++it) {
    std::vector<double> g(5);
    for (auto& x : g) x = normal(rng);
    step(whole, p, g);
    step(left, pl, {g[0], g[1]});
    step(right, pr, {g[2], g[3], g[4]});
  }
  for (int i = 0; i < 2; ++i) CHECK(p[i] == pl[i]);
  for (int i = 0; i < 3; ++i) CHECK(p[i + 2] == pr[i]);
}

}  // TEST_SUITE
