#pragma once

#include <span>

#include <Eigen/Core>

#include "imboost/model.hpp"

namespace imboost {

enum class Bound { kIwae, kCubo };

/// log w_k = log p(x|z_k) + log p(z_k) - log q(z_k|x) with z_k = mu + sigma * eps_k.
Eigen::VectorXd log_weights(const ParamStore& params, const Eigen::VectorXd& x,
                            const NoiseDraw& noise);

/// -[logsumexp_k(log w_k) - log K]
double iwae_from_log_weights(std::span<const double> log_w);
/// -(1/v)[logsumexp_k(v * log w_k) - log K]
double cubo_from_log_weights(std::span<const double> log_w, int power = 2);

/// Negative importance-weighted lower bound for one sample (K = noise rows).
double iwae_loss(const ParamStore& params, const Eigen::VectorXd& x, const NoiseDraw& noise);
/// Negative chi upper bound (power v from the model spec) for one sample.
double cubo_loss(const ParamStore& params, const Eigen::VectorXd& x, const NoiseDraw& noise);

/// Per-row losses for `rows` (n x p, one sample per row) under the given bound.
Eigen::VectorXd per_sample_losses(const ParamStore& params, const Eigen::MatrixXd& rows,
                                  const NoiseBatch& noise, Bound bound = Bound::kIwae);

}  // namespace imboost
