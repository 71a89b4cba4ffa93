#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace imboost {

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(std::size_t size, double lr = 1e-3);
};

/// One bias-corrected Adam update in place. A non-finite or mis-sized gradient
/// throws before anything is modified.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

}  // namespace imboost
