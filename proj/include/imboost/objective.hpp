#pragma once

#include <optional>
#include <span>
#include <vector>

namespace imboost {

enum class LambdaSchedule {
  kConstant,  // lambda values held fixed across polarization
  kDecay,     // lambda * gamma^-(t - T1 - 1)
};

/// Weights of the composite objective and the threshold parameters.
struct LossConfig {
  double lambda1 = 2.0;
  double lambda2 = 1.0;
  double rho = 0.92;
  double xi = 0.4;
  LambdaSchedule schedule = LambdaSchedule::kConstant;

  void validate() const;
};

struct ThresholdState {
  double tau = 0.0;
  double q_rho = 0.0;
  std::optional<double> r_hat_i;
};

/// Nearest-rank quantile: the ceil(rho * n)-th smallest value (1-based).
/// Throws std::invalid_argument on empty input or rho outside (0, 1).
double quantile(std::span<const double> values, double rho);

/// (1 - xi) * q_rho + xi * r_hat_i, or q_rho when no labeled inliers exist.
double adaptive_threshold(double q_rho, std::optional<double> r_hat_i, double xi);
ThresholdState make_threshold(std::span<const double> batch_losses, double rho,
                              std::optional<double> r_hat_i, double xi);

struct TrimmedLoss {
  double value = 0.0;
  std::vector<bool> kept;
  std::size_t kept_count() const;
};

/// Mean of the losses that are <= tau. Zero when nothing survives.
TrimmedLoss trimmed_loss(std::span<const double> losses, double tau);

/// trimmed + lambda1 * r_hat_i - lambda2 * r_hat_o; absent terms contribute 0.
double polarization_loss(double trimmed, std::optional<double> r_hat_i,
                         std::optional<double> r_hat_o, double lambda1, double lambda2);

}  // namespace imboost
