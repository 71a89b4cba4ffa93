#pragma once

#include <array>
#include <span>
#include <vector>

namespace imboost {

/// Two-component univariate Gaussian mixture. Component 0 always has the
/// smaller mean and is treated as the inlier cluster.
struct Gmm1d {
  std::array<double, 2> weights{0.5, 0.5};
  std::array<double, 2> means{0.0, 0.0};
  std::array<double, 2> variances{1.0, 1.0};
  double loglik = 0.0;
  int iterations = 0;
  /// Log-likelihood evaluated at the start of every EM iteration.
  std::vector<double> loglik_trace;

  double log_likelihood(std::span<const double> values) const;
};

struct EmOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
};

/// Deterministic starting point: means at the 25th/75th percentiles, equal
/// weights, pooled variance.
Gmm1d gmm2_initial(std::span<const double> values);

/// One EM update. Returns the responsibilities of component 0 computed in the
/// E-step (before the update).
std::vector<double> gmm2_em_step(Gmm1d& gmm, std::span<const double> values, double variance_floor);

/// EM fit. Throws DegenerateError when fewer than two distinct values exist.
/// Input order does not affect the result.
Gmm1d fit_gmm2(std::span<const double> values, const EmOptions& options = {});

/// Responsibility of the smaller-mean component at `value`.
double posterior_inlier(const Gmm1d& gmm, double value);

}  // namespace imboost
