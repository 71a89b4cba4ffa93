#pragma once

// Batched forward/backward passes shared by the loss, gradient and scoring code.
// Samples are stored as columns throughout.

#include <vector>

#include <Eigen/Core>

#include "imboost/model.hpp"

namespace imboost::detail {

struct MlpTrace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> act;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd log_var_raw;
  Eigen::MatrixXd log_var;
};

void mlp_forward(const ParamStore& params, const NetworkLayout& net, const Eigen::MatrixXd& input,
                 MlpTrace& trace);

/// Accumulates parameter gradients into `grad`. `dlog_var` is w.r.t. the clamped
/// head output; the clamp mask is applied here. Returns d/d(input) when requested.
Eigen::MatrixXd mlp_backward(const ParamStore& params, const NetworkLayout& net,
                             const Eigen::MatrixXd& input, const MlpTrace& trace,
                             const Eigen::MatrixXd& dmean, const Eigen::MatrixXd& dlog_var,
                             Eigen::VectorXd& grad, bool need_input_grad);

struct BatchForward {
  MlpTrace encoder;
  MlpTrace decoder;
  Eigen::MatrixXd z;      // latent_dim x (rows * K)
  Eigen::MatrixXd log_w;  // K x rows
};

/// `x` is input_dim x rows.
BatchForward batch_forward(const ParamStore& params, const Eigen::MatrixXd& x,
                           const NoiseBatch& noise);

/// Gradient of sum_{k,r} dlog_w(k, r) * log_w(k, r) with the noise held fixed.
Eigen::VectorXd batch_backward(const ParamStore& params, const Eigen::MatrixXd& x,
                               const NoiseBatch& noise, const BatchForward& fwd,
                               const Eigen::MatrixXd& dlog_w);

void check_batch_shapes(const ParamStore& params, const Eigen::MatrixXd& x,
                        const NoiseBatch& noise);

}  // namespace imboost::detail
