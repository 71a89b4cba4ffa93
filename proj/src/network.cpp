#include "network.hpp"

#include <string>

#include "imboost/errors.hpp"

namespace imboost::detail {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd affine(const ParamStore& params, const DenseSlices& d, const Eigen::MatrixXd& in) {
  Eigen::MatrixXd out = params.tensor(d.weight) * in;
  out.colwise() += params.tensor(d.bias).col(0);
  return out;
}

void accumulate_dense(const DenseSlices& d, const Eigen::MatrixXd& dout,
                      const Eigen::MatrixXd& in, Eigen::VectorXd& grad) {
  Eigen::Map<Eigen::MatrixXd>(grad.data() + d.weight.offset, d.weight.rows, d.weight.cols)
      .noalias() += dout * in.transpose();
  Eigen::Map<Eigen::VectorXd>(grad.data() + d.bias.offset, d.bias.rows) += dout.rowwise().sum();
}

Eigen::MatrixXd clamp_mask(const Eigen::MatrixXd& raw) {
  return ((raw.array() >= kLogVarMin) && (raw.array() <= kLogVarMax)).cast<double>().matrix();
}

}  // namespace

void mlp_forward(const ParamStore& params, const NetworkLayout& net, const Eigen::MatrixXd& input,
                 MlpTrace& trace) {
  const double slope = params.spec().leaky_slope;
  trace.pre.resize(net.hidden.size());
  trace.act.resize(net.hidden.size());
  const Eigen::MatrixXd* prev = &input;
  for (std::size_t l = 0; l < net.hidden.size(); ++l) {
    trace.pre[l] = affine(params, net.hidden[l], *prev);
    trace.act[l] = trace.pre[l].cwiseMax(slope * trace.pre[l]);
    prev = &trace.act[l];
  }
  trace.mean = affine(params, net.mean, *prev);
  trace.log_var_raw = affine(params, net.log_var, *prev);
  trace.log_var = trace.log_var_raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
}

Eigen::MatrixXd mlp_backward(const ParamStore& params, const NetworkLayout& net,
                             const Eigen::MatrixXd& input, const MlpTrace& trace,
                             const Eigen::MatrixXd& dmean, const Eigen::MatrixXd& dlog_var,
                             Eigen::VectorXd& grad, bool need_input_grad) {
  const double slope = params.spec().leaky_slope;
  const Eigen::MatrixXd dlog_var_raw = dlog_var.cwiseProduct(clamp_mask(trace.log_var_raw));
  const std::size_t depth = net.hidden.size();
  const Eigen::MatrixXd& last = depth ? trace.act.back() : input;
  accumulate_dense(net.mean, dmean, last, grad);
  accumulate_dense(net.log_var, dlog_var_raw, last, grad);
  Eigen::MatrixXd dact = params.tensor(net.mean.weight).transpose() * dmean;
  dact.noalias() += params.tensor(net.log_var.weight).transpose() * dlog_var_raw;
  for (std::size_t l = depth; l-- > 0;) {
    const Eigen::MatrixXd dpre =
        ((trace.pre[l].array() > 0.0).select(dact.array(), slope * dact.array())).matrix();
    const Eigen::MatrixXd& in = l ? trace.act[l - 1] : input;
    accumulate_dense(net.hidden[l], dpre, in, grad);
    if (l > 0 || need_input_grad) dact = params.tensor(net.hidden[l].weight).transpose() * dpre;
  }
  if (!need_input_grad) return {};
  return dact;
}

void check_batch_shapes(const ParamStore& params, const Eigen::MatrixXd& x,
                        const NoiseBatch& noise) {
  const ModelSpec& spec = params.spec();
  if (x.rows() != spec.input_dim)
    throw ShapeError("batch has " + std::to_string(x.rows()) + " features, model expects " +
                     std::to_string(spec.input_dim));
  if (noise.rows() != x.cols())
    throw ShapeError("noise covers " + std::to_string(noise.rows()) + " rows, batch has " +
                     std::to_string(x.cols()));
  if (noise.rows() > 0 && (noise.latent_dim() != spec.latent_dim || noise.samples() < 1))
    throw ShapeError("noise shape does not match (K, latent_dim)");
}

BatchForward batch_forward(const ParamStore& params, const Eigen::MatrixXd& x,
                           const NoiseBatch& noise) {
  check_batch_shapes(params, x, noise);
  const Eigen::Index rows = x.cols();
  const int samples = noise.samples();
  const Eigen::Index cols = rows * samples;
  BatchForward fwd;
  mlp_forward(params, params.encoder(), x, fwd.encoder);

  const Eigen::MatrixXd& eps = noise.packed();
  const Eigen::MatrixXd std_dev = (0.5 * fwd.encoder.log_var.array()).exp().matrix();
  fwd.z.resize(params.spec().latent_dim, cols);
  Eigen::MatrixXd x_rep(x.rows(), cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int k = 0; k < samples; ++k) {
      const Eigen::Index c = r * samples + k;
      fwd.z.col(c) = fwd.encoder.mean.col(r) + std_dev.col(r).cwiseProduct(eps.col(c));
      x_rep.col(c) = x.col(r);
    }
  }
  mlp_forward(params, params.decoder(), fwd.z, fwd.decoder);

  const Eigen::ArrayXXd diff = x_rep.array() - fwd.decoder.mean.array();
  const Eigen::RowVectorXd log_px =
      -0.5 * (kLog2Pi + fwd.decoder.log_var.array() +
              diff.square() * (-fwd.decoder.log_var.array()).exp())
                 .colwise()
                 .sum()
                 .matrix();
  const Eigen::RowVectorXd log_pz =
      -0.5 * (kLog2Pi + fwd.z.array().square()).colwise().sum().matrix();
  const Eigen::RowVectorXd log_q_eps = -0.5 * (kLog2Pi + eps.array().square()).colwise().sum().matrix();
  const Eigen::RowVectorXd half_log_var_sum = 0.5 * fwd.encoder.log_var.colwise().sum();

  fwd.log_w.resize(samples, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int k = 0; k < samples; ++k) {
      const Eigen::Index c = r * samples + k;
      // log q(z|x) = sum_j [-0.5 log 2pi - 0.5 lv_j - 0.5 eps_j^2] under the reparameterization.
      const double log_q = log_q_eps(c) - half_log_var_sum(r);
      fwd.log_w(k, r) = log_px(c) + log_pz(c) - log_q;
    }
  }
  if (!fwd.log_w.allFinite()) throw NumericError("log_weight", "non-finite importance weight");
  return fwd;
}

Eigen::VectorXd batch_backward(const ParamStore& params, const Eigen::MatrixXd& x,
                               const NoiseBatch& noise, const BatchForward& fwd,
                               const Eigen::MatrixXd& dlog_w) {
  const Eigen::Index rows = x.cols();
  const int samples = noise.samples();
  const Eigen::Index cols = rows * samples;
  const int latent = params.spec().latent_dim;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  if (rows == 0) return grad;

  Eigen::RowVectorXd g(cols);
  Eigen::MatrixXd x_rep(x.rows(), cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (int k = 0; k < samples; ++k) {
      g(r * samples + k) = dlog_w(k, r);
      x_rep.col(r * samples + k) = x.col(r);
    }

  // log p(x|z) through the decoder heads.
  const Eigen::ArrayXXd inv_var = (-fwd.decoder.log_var.array()).exp();
  const Eigen::ArrayXXd diff = x_rep.array() - fwd.decoder.mean.array();
  const Eigen::MatrixXd dmean_x = (diff * inv_var).rowwise() * g.array();
  const Eigen::MatrixXd dlog_var_x = ((0.5 * diff.square() * inv_var - 0.5)).rowwise() * g.array();
  Eigen::MatrixXd dz = mlp_backward(params, params.decoder(), fwd.z, fwd.decoder, dmean_x,
                                    dlog_var_x, grad, true);
  // log p(z) = -0.5 |z|^2 + const.
  dz -= (fwd.z.array().rowwise() * g.array()).matrix();

  // z = mu + exp(lv / 2) * eps, and -log q contributes +0.5 lv per draw.
  const Eigen::MatrixXd& eps = noise.packed();
  const Eigen::MatrixXd half_std = 0.5 * (0.5 * fwd.encoder.log_var.array()).exp().matrix();
  Eigen::MatrixXd dmu = Eigen::MatrixXd::Zero(latent, rows);
  Eigen::MatrixXd dlog_var = Eigen::MatrixXd::Zero(latent, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int k = 0; k < samples; ++k) {
      const Eigen::Index c = r * samples + k;
      dmu.col(r) += dz.col(c);
      dlog_var.col(r) += dz.col(c).cwiseProduct(eps.col(c)).cwiseProduct(half_std.col(r));
      dlog_var.col(r).array() += 0.5 * g(c);
    }
  }
  mlp_backward(params, params.encoder(), x, fwd.encoder, dmu, dlog_var, grad, false);
  return grad;
}

}  // namespace imboost::detail
