#include "imboost/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "imboost/errors.hpp"
#include "network.hpp"

namespace imboost {

namespace {

double scaled_logsumexp(std::span<const double> values, double scale) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) peak = std::max(peak, scale * v);
  double sum = 0.0;
  for (double v : values) sum += std::exp(scale * v - peak);
  return peak + std::log(sum);
}

double bound_from_log_weights(std::span<const double> log_w, int power) {
  if (log_w.empty()) throw std::invalid_argument("at least one importance sample is required");
  const double k = static_cast<double>(log_w.size());
  const double value = -(scaled_logsumexp(log_w, power) - std::log(k)) / power;
  if (!std::isfinite(value)) throw NumericError("bound", "non-finite loss");
  return value;
}

Eigen::MatrixXd as_column(const Eigen::VectorXd& x) { return x; }

}  // namespace

double iwae_from_log_weights(std::span<const double> log_w) {
  return bound_from_log_weights(log_w, 1);
}

double cubo_from_log_weights(std::span<const double> log_w, int power) {
  return bound_from_log_weights(log_w, power);
}

Eigen::VectorXd log_weights(const ParamStore& params, const Eigen::VectorXd& x,
                            const NoiseDraw& noise) {
  if (!x.allFinite()) throw NumericError("x", "non-finite input");
  const NoiseDraw draws[] = {noise};
  const NoiseBatch batch = NoiseBatch::from_draws(draws);
  const detail::BatchForward fwd = detail::batch_forward(params, as_column(x), batch);
  return fwd.log_w.col(0);
}

double iwae_loss(const ParamStore& params, const Eigen::VectorXd& x, const NoiseDraw& noise) {
  const Eigen::VectorXd lw = log_weights(params, x, noise);
  return iwae_from_log_weights({lw.data(), static_cast<std::size_t>(lw.size())});
}

double cubo_loss(const ParamStore& params, const Eigen::VectorXd& x, const NoiseDraw& noise) {
  const Eigen::VectorXd lw = log_weights(params, x, noise);
  return cubo_from_log_weights({lw.data(), static_cast<std::size_t>(lw.size())},
                               params.spec().cubo_power);
}

Eigen::VectorXd per_sample_losses(const ParamStore& params, const Eigen::MatrixXd& rows,
                                  const NoiseBatch& noise, Bound bound) {
  const Eigen::MatrixXd x = rows.transpose();
  const detail::BatchForward fwd = detail::batch_forward(params, x, noise);
  const int power = bound == Bound::kIwae ? 1 : params.spec().cubo_power;
  Eigen::VectorXd out(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double* col = fwd.log_w.col(r).data();
    out(r) = bound_from_log_weights({col, static_cast<std::size_t>(fwd.log_w.rows())}, power);
  }
  return out;
}

}  // namespace imboost
