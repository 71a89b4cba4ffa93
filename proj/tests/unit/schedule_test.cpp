#include <vector>

#include "doctest.h"

#include "imboost/schedule.hpp"

using namespace imboost;

TEST_SUITE("schedule") {

TEST_CASE("batch sizes under the default growth") {
  const BatchSchedule s;
  CHECK(s.size(1) == 128);
  CHECK(s.size(2) == 132);  // 131.84
  // 128 * 1.03^39 = 405.379...
  CHECK(s.size(40) == 405);
  // 128 * 1.03^89 = 1777.145...
  CHECK(s.size(90) == 1777);
  CHECK(batch_size(s, 40) == 405);
}

TEST_CASE("batch size is capped by the training set") {
  const BatchSchedule s{128, 1.03, 1000};
  CHECK(s.size(90) == 1000);
  CHECK(s.size(1) == 128);
  const BatchSchedule small{128, 1.03, 50};
  CHECK(small.size(1) == 50);
}

TEST_CASE("batch size never decreases") {
  const BatchSchedule s{128, 1.03, 1400};
  std::size_t last = 0;
  for (int t = 1; t <= 200; ++t) {
    CHECK(s.size(t) >= last);
    CHECK(s.size(t) <= 1400);
    last = s.size(t);
  }
}

TEST_CASE("query iterations under the defaults") {
  std::vector<int> fired;
  for (int t = 41; t <= 90; ++t)
    if (is_query_iteration(t, 40, 50, 5)) fired.push_back(t - 40);
  CHECK(fired == std::vector<int>{10, 20, 30, 40, 50});
  CHECK_FALSE(is_query_iteration(40, 40, 50, 5));
  CHECK_FALSE(is_query_iteration(100, 40, 50, 5));
  CHECK(ensemble_window(50, 5) == 10);
}

TEST_CASE("one round per polarization step when T2 = Ta") {
  int fired = 0;
  for (int t = 1; t <= 40; ++t) fired += is_query_iteration(t, 20, 7, 7);
  CHECK(fired == 7);
  CHECK(ensemble_window(7, 7) == 1);
}

}  // TEST_SUITE
