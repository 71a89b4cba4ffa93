#include "imboost/gradient.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "imboost/bounds.hpp"
#include "imboost/errors.hpp"
#include "imboost/objective.hpp"
#include "network.hpp"

namespace imboost {

namespace {

std::optional<double> group_mean(const Eigen::VectorXd& v, std::size_t begin, std::size_t count) {
  if (count == 0) return std::nullopt;
  return v.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)).mean();
}

// d loss / d log w_k for a bound of the given power: -softmax(power * log w)_k.
Eigen::VectorXd bound_sensitivity(const Eigen::VectorXd& log_w, int power) {
  const Eigen::ArrayXd scaled = power * log_w.array();
  const Eigen::ArrayXd e = (scaled - scaled.maxCoeff()).exp();
  return -(e / e.sum()).matrix();
}

LossResult evaluate(const ParamStore& params, const Eigen::MatrixXd& rows,
                    const NoiseBatch& noise, const LossSpec& spec, bool with_grad) {
  if (static_cast<std::size_t>(rows.rows()) != spec.total_rows())
    throw ShapeError("loss_and_grad: " + std::to_string(rows.rows()) + " rows given, spec covers " +
                     std::to_string(spec.total_rows()));
  const Eigen::MatrixXd x = rows.transpose();
  const detail::BatchForward fwd = detail::batch_forward(params, x, noise);
  const int cubo_power = params.spec().cubo_power;
  const std::size_t outlier_begin = spec.batch_rows + spec.inlier_rows;

  LossResult out;
  out.per_sample.resize(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const bool outlier_row = static_cast<std::size_t>(r) >= outlier_begin;
    const double* lw = fwd.log_w.col(r).data();
    const std::span<const double> weights(lw, static_cast<std::size_t>(fwd.log_w.rows()));
    out.per_sample(r) = outlier_row ? cubo_from_log_weights(weights, cubo_power)
                                    : iwae_from_log_weights(weights);
  }
  out.inlier_risk = group_mean(out.per_sample, spec.batch_rows, spec.inlier_rows);
  out.outlier_risk = group_mean(out.per_sample, outlier_begin, spec.outlier_rows);

  const std::span<const double> batch_losses(out.per_sample.data(), spec.batch_rows);
  TrimmedLoss trimmed;
  switch (spec.threshold.kind) {
    case ThresholdRule::Kind::kNone:
      trimmed = trimmed_loss(batch_losses, std::numeric_limits<double>::infinity());
      break;
    case ThresholdRule::Kind::kQuantile:
      if (!batch_losses.empty()) out.tau = quantile(batch_losses, spec.threshold.rho);
      break;
    case ThresholdRule::Kind::kAdaptive:
      if (!batch_losses.empty())
        out.tau = make_threshold(batch_losses, spec.threshold.rho, out.inlier_risk,
                                 spec.threshold.xi)
                      .tau;
      break;
    case ThresholdRule::Kind::kFixed:
      out.tau = spec.threshold.tau;
      break;
  }
  if (out.tau) trimmed = trimmed_loss(batch_losses, *out.tau);
  if (trimmed.kept.size() != spec.batch_rows) trimmed.kept.assign(spec.batch_rows, false);
  out.kept = trimmed.kept;
  out.objective = polarization_loss(trimmed.value, out.inlier_risk, out.outlier_risk, spec.lambda1,
                                    spec.lambda2);
  if (!std::isfinite(out.objective)) throw NumericError("objective", "non-finite loss value");
  if (!with_grad) return out;

  const std::size_t kept = trimmed.kept_count();
  Eigen::MatrixXd dlog_w = Eigen::MatrixXd::Zero(fwd.log_w.rows(), fwd.log_w.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const auto row = static_cast<std::size_t>(r);
    double coef = 0.0;
    int power = 1;
    if (row < spec.batch_rows) {
      if (trimmed.kept[row]) coef = 1.0 / static_cast<double>(kept);
    } else if (row < outlier_begin) {
      coef = spec.lambda1 / static_cast<double>(spec.inlier_rows);
    } else {
      coef = -spec.lambda2 / static_cast<double>(spec.outlier_rows);
      power = cubo_power;
    }
    if (coef != 0.0) dlog_w.col(r) = coef * bound_sensitivity(fwd.log_w.col(r), power);
  }
  out.grad = detail::batch_backward(params, x, noise, fwd, dlog_w);
  if (!out.grad.allFinite()) throw NumericError("gradient", "non-finite gradient");
  return out;
}

}  // namespace

LossResult loss_and_grad(const ParamStore& params, const Eigen::MatrixXd& rows,
                         const NoiseBatch& noise, const LossSpec& spec) {
  return evaluate(params, rows, noise, spec, true);
}

LossResult loss_only(const ParamStore& params, const Eigen::MatrixXd& rows,
                     const NoiseBatch& noise, const LossSpec& spec) {
  return evaluate(params, rows, noise, spec, false);
}

}  // namespace imboost
