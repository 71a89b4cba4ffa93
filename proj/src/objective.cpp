#include "imboost/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imboost {

void LossConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw std::invalid_argument("lambda1 and lambda2 must be non-negative");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in [0, 1]");
}

double quantile(std::span<const double> values, double rho) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  const auto n = values.size();
  // The 1e-9 slack keeps e.g. 0.92 * 100 from rounding up to rank 93.
  auto rank = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::vector<double> copy(values.begin(), values.end());
  auto nth = copy.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(copy.begin(), nth, copy.end());
  return *nth;
}

double adaptive_threshold(double q_rho, std::optional<double> r_hat_i, double xi) {
  if (!r_hat_i) return q_rho;
  return (1.0 - xi) * q_rho + xi * *r_hat_i;
}

ThresholdState make_threshold(std::span<const double> batch_losses, double rho,
                              std::optional<double> r_hat_i, double xi) {
  ThresholdState state;
  state.q_rho = quantile(batch_losses, rho);
  state.r_hat_i = r_hat_i;
  state.tau = adaptive_threshold(state.q_rho, r_hat_i, xi);
  return state;
}

std::size_t TrimmedLoss::kept_count() const {
  return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true));
}

TrimmedLoss trimmed_loss(std::span<const double> losses, double tau) {
  TrimmedLoss out;
  out.kept.assign(losses.size(), false);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] <= tau) {
      out.kept[i] = true;
      sum += losses[i];
      ++count;
    }
  }
  out.value = count ? sum / static_cast<double>(count) : 0.0;
  return out;
}

double polarization_loss(double trimmed, std::optional<double> r_hat_i,
                         std::optional<double> r_hat_o, double lambda1, double lambda2) {
  double value = trimmed;
  if (r_hat_i) value += lambda1 * *r_hat_i;
  if (r_hat_o) value -= lambda2 * *r_hat_o;
  return value;
}

}  // namespace imboost
