#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "imboost/model.hpp"

namespace imboost {

/// How the mini-batch rows are thresholded before averaging.
struct ThresholdRule {
  enum class Kind {
    kNone,      // plain mean over the batch
    kQuantile,  // tau = rho-quantile of the batch losses
    kAdaptive,  // tau = (1 - xi) q_rho + xi * mean labeled-inlier loss
    kFixed,     // tau supplied by the caller
  };
  Kind kind = Kind::kNone;
  double rho = 0.92;
  double xi = 0.4;
  double tau = 0.0;

  static ThresholdRule none() { return {}; }
  static ThresholdRule quantile(double rho) { return {Kind::kQuantile, rho, 0.0, 0.0}; }
  static ThresholdRule adaptive(double rho, double xi) { return {Kind::kAdaptive, rho, xi, 0.0}; }
  static ThresholdRule fixed(double tau) { return {Kind::kFixed, 0.0, 0.0, tau}; }
};

/// Row layout of one objective evaluation. Rows are ordered
/// [mini-batch | labeled inliers | labeled outliers]; the first two groups use
/// the IWAE loss and the last the CUBO loss.
struct LossSpec {
  std::size_t batch_rows = 0;
  std::size_t inlier_rows = 0;
  std::size_t outlier_rows = 0;
  ThresholdRule threshold;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  std::size_t total_rows() const { return batch_rows + inlier_rows + outlier_rows; }
};

struct LossResult {
  double objective = 0.0;
  Eigen::VectorXd per_sample;  // one loss per row, bound chosen by row group
  Eigen::VectorXd grad;
  std::optional<double> tau;
  std::vector<bool> kept;  // mini-batch rows that entered the trimmed mean
  std::optional<double> inlier_risk;
  std::optional<double> outlier_risk;
};

/// Composite objective and its exact gradient with the noise held fixed.
/// The trimming mask and threshold are constants of the gradient.
LossResult loss_and_grad(const ParamStore& params, const Eigen::MatrixXd& rows,
                         const NoiseBatch& noise, const LossSpec& spec);

/// Same objective without the backward pass.
LossResult loss_only(const ParamStore& params, const Eigen::MatrixXd& rows,
                     const NoiseBatch& noise, const LossSpec& spec);

}  // namespace imboost
