#include "imboost/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imboost/errors.hpp"
#include "imboost/objective.hpp"

namespace imboost {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

double log_add(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double sample_variance(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / n;
}

double variance_floor_for(std::span<const double> values) {
  return 1e-12 * (sample_variance(values) + 1e-12);
}

void order_components(Gmm1d& gmm) {
  if (gmm.means[0] > gmm.means[1]) {
    std::swap(gmm.means[0], gmm.means[1]);
    std::swap(gmm.weights[0], gmm.weights[1]);
    std::swap(gmm.variances[0], gmm.variances[1]);
  }
}

}  // namespace

double Gmm1d::log_likelihood(std::span<const double> values) const {
  double total = 0.0;
  for (double x : values)
    total += log_add(std::log(weights[0]) + log_normal(x, means[0], variances[0]),
                     std::log(weights[1]) + log_normal(x, means[1], variances[1]));
  return total;
}

Gmm1d gmm2_initial(std::span<const double> values) {
  Gmm1d gmm;
  gmm.means = {quantile(values, 0.25), quantile(values, 0.75)};
  if (gmm.means[0] == gmm.means[1]) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    gmm.means = {*lo, *hi};
  }
  const double pooled = std::max(sample_variance(values), variance_floor_for(values));
  gmm.variances = {pooled, pooled};
  gmm.weights = {0.5, 0.5};
  return gmm;
}

std::vector<double> gmm2_em_step(Gmm1d& gmm, std::span<const double> values,
                                 double variance_floor) {
  const std::size_t n = values.size();
  std::vector<double> resp(n);
  const double lw0 = std::log(gmm.weights[0]);
  const double lw1 = std::log(gmm.weights[1]);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = lw0 + log_normal(values[i], gmm.means[0], gmm.variances[0]);
    const double b = lw1 + log_normal(values[i], gmm.means[1], gmm.variances[1]);
    resp[i] = std::exp(a - log_add(a, b));
  }
  double n0 = 0.0, n1 = 0.0, s0 = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    n0 += resp[i];
    n1 += 1.0 - resp[i];
    s0 += resp[i] * values[i];
    s1 += (1.0 - resp[i]) * values[i];
  }
  constexpr double kTiny = 1e-300;
  if (n0 > kTiny) gmm.means[0] = s0 / n0;
  if (n1 > kTiny) gmm.means[1] = s1 / n1;
  double v0 = 0.0, v1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d0 = values[i] - gmm.means[0];
    const double d1 = values[i] - gmm.means[1];
    v0 += resp[i] * d0 * d0;
    v1 += (1.0 - resp[i]) * d1 * d1;
  }
  if (n0 > kTiny) gmm.variances[0] = std::max(v0 / n0, variance_floor);
  if (n1 > kTiny) gmm.variances[1] = std::max(v1 / n1, variance_floor);
  const double total = static_cast<double>(n);
  constexpr double kMinWeight = 1e-12;
  gmm.weights[0] = std::clamp(n0 / total, kMinWeight, 1.0 - kMinWeight);
  gmm.weights[1] = 1.0 - gmm.weights[0];
  return resp;
}

Gmm1d fit_gmm2(std::span<const double> input, const EmOptions& options) {
  if (input.size() < 2) throw DegenerateError("GMM fit needs at least two values");
  std::vector<double> values(input.begin(), input.end());
  std::sort(values.begin(), values.end());
  if (values.front() == values.back()) throw DegenerateError("GMM fit on a constant sample");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("gmm input", "non-finite value");

  const double floor = variance_floor_for(values);
  Gmm1d gmm = gmm2_initial(values);
  double previous = 0.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const double ll = gmm.log_likelihood(values);
    gmm.loglik_trace.push_back(ll);
    if (iter > 0 && std::abs(ll - previous) < options.tolerance) break;
    previous = ll;
    gmm2_em_step(gmm, values, floor);
    gmm.iterations = iter + 1;
  }
  gmm.loglik = gmm.log_likelihood(values);
  order_components(gmm);
  return gmm;
}

double posterior_inlier(const Gmm1d& gmm, double value) {
  const double a = std::log(gmm.weights[0]) + log_normal(value, gmm.means[0], gmm.variances[0]);
  const double b = std::log(gmm.weights[1]) + log_normal(value, gmm.means[1], gmm.variances[1]);
  return std::exp(a - log_add(a, b));
}

}  // namespace imboost
