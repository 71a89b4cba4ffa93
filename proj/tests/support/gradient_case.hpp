#pragma once

// Random small models for checking the composite-objective gradient against
// central finite differences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "imboost/gradient.hpp"
#include "imboost/model.hpp"
#include "oracles.hpp"

namespace imboost::testing {

struct GradientCase {
  ParamStore params;
  Eigen::MatrixXd rows;
  NoiseBatch noise;
  LossSpec spec;
};

/// Smallest distance of any hidden pre-activation from the leaky-ReLU kink.
inline double kink_margin(const ParamStore& params, const Eigen::MatrixXd& rows, const NoiseBatch& noise) {
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const Eigen::RowVectorXd xr = rows.row(r);
    const NaiveHeads q = naive_forward(params, "encoder",
                                       std::vector<double>(xr.data(), xr.data() + xr.size()), &margin);
    const NoiseDraw eps = noise.draw(static_cast<int>(r));
    for (Eigen::Index k = 0; k < eps.eps.rows(); ++k) {
      std::vector<double> z(q.mean.size());
      for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = q.mean[j] + std::exp(0.5 * q.log_var[j]) * eps.eps(k, static_cast<Eigen::Index>(j));
      naive_forward(params, "decoder", z, &margin);
    }
  }
  return margin;
}

/// p = 3, d = 2, hidden 4/4, a 6-row batch, 2 labeled inliers and 2 labeled
/// outliers. Draws are repeated until every hidden pre-activation sits at least
/// 1e-3 from the kink, and tau sits in the widest gap of the batch losses, so
/// central differences never straddle a non-differentiable point.
inline GradientCase random_gradient_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelSpec spec;
  spec.input_dim = 3;
  spec.latent_dim = 2;
  spec.encoder_hidden = {4, 4};
  spec.decoder_hidden = {4, 4};
  spec.iwae_samples = 1 + static_cast<int>(rng() % 3);
  GradientCase c{ParamStore(spec), {}, {}, {}};
  c.spec.batch_rows = 6;
  c.spec.inlier_rows = 2;
  c.spec.outlier_rows = 2;
  c.spec.lambda1 = 2.0;
  c.spec.lambda2 = 1.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  do {
    c.params = initialize_params(spec, rng());
    c.rows = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(c.spec.total_rows()), 3,
                                          [&] { return unit(rng); });
    c.noise = NoiseBatch::standard_normal(rng, static_cast<int>(c.spec.total_rows()),
                                          spec.iwae_samples, spec.latent_dim);
  } while (kink_margin(c.params, c.rows, c.noise) < 1e-3);

  LossSpec probe = c.spec;
  probe.threshold = ThresholdRule::none();
  const LossResult base = loss_only(c.params, c.rows, c.noise, probe);
  std::vector<double> batch(base.per_sample.data(), base.per_sample.data() + c.spec.batch_rows);
  std::sort(batch.begin(), batch.end());
  std::size_t gap = 1;
  for (std::size_t i = 1; i + 1 < batch.size(); ++i)
    if (batch[i + 1] - batch[i] > batch[gap + 1] - batch[gap]) gap = i;
  c.spec.threshold = ThresholdRule::fixed(0.5 * (batch[gap] + batch[gap + 1]));
  return c;
}

/// Max relative error between the analytic gradient and central differences (h = 1e-5).
inline double gradient_case_error(const GradientCase& c) {
  const LossResult analytic = loss_and_grad(c.params, c.rows, c.noise, c.spec);
  ParamStore probe = c.params;
  auto objective = [&](const Eigen::VectorXd& theta) {
    probe.values() = theta;
    return loss_only(probe, c.rows, c.noise, c.spec).objective;
  };
  const Eigen::VectorXd fd = central_difference(objective, c.params.values(), 1e-5);
  return max_relative_error(analytic.grad, fd);
}

}  // namespace imboost::testing
