#pragma once

#include <cstddef>

namespace imboost {

/// Mini-batch growth n_t = min(round(n0 * gamma^(t-1)), n_train). n_train = 0 disables the cap.
struct BatchSchedule {
  std::size_t n0 = 128;
  double gamma = 1.03;
  std::size_t n_train = 0;

  std::size_t size(int t) const;
};

std::size_t batch_size(const BatchSchedule& schedule, int t);

/// True when polarization iteration `t` opens a query round,
/// i.e. (t - T1) is a positive multiple of T2 / Ta.
bool is_query_iteration(int t, int t1, int t2, int rounds);

/// Number of snapshots averaged for the ensembled loss (T2 / Ta).
int ensemble_window(int t2, int rounds);

}  // namespace imboost
