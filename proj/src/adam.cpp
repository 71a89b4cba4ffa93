#include "imboost/adam.hpp"

#include <cmath>
#include <string>

#include "imboost/errors.hpp"

namespace imboost {

AdamState AdamState::zeros(std::size_t size, double lr) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  s.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  if (grad.size() != params.size() || static_cast<Eigen::Index>(params.size()) != state.m.size())
    throw ShapeError("adam_step: params, gradient and moments differ in length");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericError("gradient", "non-finite entry at " + std::to_string(i));

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    const double g = grad[i];
    state.m(j) = state.beta1 * state.m(j) + (1.0 - state.beta1) * g;
    state.v(j) = state.beta2 * state.v(j) + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m(j) / correction1;
    const double v_hat = state.v(j) / correction2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace imboost
