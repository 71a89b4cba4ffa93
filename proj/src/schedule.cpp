#include "imboost/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imboost {

std::size_t BatchSchedule::size(int t) const {
  if (t < 1) throw std::invalid_argument("batch schedule index starts at 1");
  const double raw = static_cast<double>(n0) * std::pow(gamma, t - 1);
  const double capped = n_train ? std::min(raw, static_cast<double>(n_train)) : raw;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(capped)));
}

std::size_t batch_size(const BatchSchedule& schedule, int t) { return schedule.size(t); }

bool is_query_iteration(int t, int t1, int t2, int rounds) {
  if (rounds <= 0 || t2 <= 0 || t2 % rounds != 0) return false;
  const int offset = t - t1;
  if (offset < 1 || offset > t2) return false;
  return offset % (t2 / rounds) == 0;
}

int ensemble_window(int t2, int rounds) {
  if (rounds <= 0) throw std::invalid_argument("at least one query round is required");
  return t2 / rounds;
}

}  // namespace imboost
