#include "imboost/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "imboost/errors.hpp"
#include "network.hpp"

namespace imboost {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)

void require_positive(int value, const char* what) {
  if (value <= 0) throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace

ModelSpec ModelSpec::for_input(int input_dim) {
  ModelSpec spec;
  spec.input_dim = input_dim;
  spec.latent_dim = std::max(2, std::min(32, (input_dim + 3) / 4));
  return spec;
}

void ModelSpec::validate() const {
  require_positive(input_dim, "input_dim");
  require_positive(latent_dim, "latent_dim");
  if (encoder_hidden.empty() || decoder_hidden.empty())
    throw std::invalid_argument("each network needs at least one hidden layer");
  for (int h : encoder_hidden) require_positive(h, "encoder hidden width");
  for (int h : decoder_hidden) require_positive(h, "decoder hidden width");
  if (!(leaky_slope >= 0.0 && leaky_slope <= 1.0))
    throw std::invalid_argument("leaky_slope must lie in [0, 1]");
  require_positive(iwae_samples, "iwae_samples");
  if (cubo_power < 2) throw std::invalid_argument("cubo_power must be >= 2");
}

ParamStore::ParamStore(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  encoder_ = add_network("encoder", spec_.input_dim, spec_.encoder_hidden, spec_.latent_dim, offset);
  decoder_ = add_network("decoder", spec_.latent_dim, spec_.decoder_hidden, spec_.input_dim, offset);
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

NetworkLayout ParamStore::add_network(const std::string& prefix, int in,
                                      const std::vector<int>& hidden, int out,
                                      std::size_t& offset) {
  auto dense = [&](const std::string& name, int fan_in, int fan_out) {
    DenseSlices d;
    d.weight = Slice{offset, fan_out, fan_in};
    offset += d.weight.size();
    d.bias = Slice{offset, fan_out, 1};
    offset += d.bias.size();
    layout_.emplace(prefix + "." + name + ".weight", d.weight);
    layout_.emplace(prefix + "." + name + ".bias", d.bias);
    return d;
  };
  NetworkLayout net;
  int fan_in = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    net.hidden.push_back(dense("hidden" + std::to_string(i), fan_in, hidden[i]));
    fan_in = hidden[i];
  }
  net.mean = dense("mean", fan_in, out);
  net.log_var = dense("log_var", fan_in, out);
  return net;
}

const Slice& ParamStore::slice(const std::string& name) const {
  auto it = layout_.find(name);
  if (it == layout_.end()) throw std::out_of_range("unknown parameter slice " + name);
  return it->second;
}

Eigen::Map<Eigen::MatrixXd> ParamStore::tensor(const Slice& s) {
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamStore::tensor(const Slice& s) const {
  return {values_.data() + s.offset, s.rows, s.cols};
}

ParamStore initialize_params(const ModelSpec& spec, std::uint64_t seed) {
  ParamStore params(spec);
  std::mt19937_64 rng(seed);
  auto fill = [&](const NetworkLayout& net) {
    auto fill_dense = [&](const DenseSlices& d) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(d.weight.cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto* s : {&d.weight, &d.bias}) {
        auto t = params.tensor(*s);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
      }
    };
    for (const auto& h : net.hidden) fill_dense(h);
    fill_dense(net.mean);
    fill_dense(net.log_var);
  };
  fill(params.encoder());
  fill(params.decoder());
  return params;
}

NoiseBatch::NoiseBatch(int rows, int samples, int latent_dim)
    : rows_(rows), samples_(samples),
      packed_(Eigen::MatrixXd::Zero(latent_dim, static_cast<Eigen::Index>(rows) * samples)) {}

NoiseBatch NoiseBatch::standard_normal(std::mt19937_64& rng, int rows, int samples,
                                       int latent_dim) {
  NoiseBatch batch(rows, samples, latent_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  double* data = batch.packed_.data();
  for (Eigen::Index i = 0; i < batch.packed_.size(); ++i) data[i] = normal(rng);
  return batch;
}

NoiseBatch NoiseBatch::from_draws(std::span<const NoiseDraw> draws) {
  if (draws.empty()) return {};
  const auto samples = static_cast<int>(draws.front().eps.rows());
  const auto latent = static_cast<int>(draws.front().eps.cols());
  NoiseBatch batch(static_cast<int>(draws.size()), samples, latent);
  for (std::size_t r = 0; r < draws.size(); ++r) {
    if (draws[r].eps.rows() != samples || draws[r].eps.cols() != latent)
      throw ShapeError("noise draws must share one K x d shape");
    for (int k = 0; k < samples; ++k)
      batch.packed_.col(static_cast<Eigen::Index>(r) * samples + k) = draws[r].eps.row(k).transpose();
  }
  return batch;
}

NoiseDraw NoiseBatch::draw(int row) const {
  NoiseDraw d{Eigen::MatrixXd(samples_, packed_.rows())};
  for (int k = 0; k < samples_; ++k)
    d.eps.row(k) = packed_.col(static_cast<Eigen::Index>(row) * samples_ + k).transpose();
  return d;
}

namespace {

DiagGaussian single_forward(const ParamStore& params, const NetworkLayout& net,
                            const Eigen::VectorXd& input, int expected_dim, const char* what) {
  if (input.size() != expected_dim)
    throw ShapeError(std::string(what) + ": expected input of size " +
                     std::to_string(expected_dim) + ", got " + std::to_string(input.size()));
  if (!input.allFinite()) throw NumericError(what, "non-finite input");
  detail::MlpTrace trace;
  detail::mlp_forward(params, net, input, trace);
  return {trace.mean.col(0), trace.log_var.col(0)};
}

}  // namespace

DiagGaussian encode(const ParamStore& params, const Eigen::VectorXd& x) {
  return single_forward(params, params.encoder(), x, params.spec().input_dim, "encode");
}

DiagGaussian decode(const ParamStore& params, const Eigen::VectorXd& z) {
  return single_forward(params, params.decoder(), z, params.spec().latent_dim, "decode");
}

double diag_gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& log_var) {
  const Eigen::ArrayXd diff = (x - mean).array();
  return -0.5 * (kLog2Pi + log_var.array() + diff.square() * (-log_var.array()).exp()).sum();
}

LogJointTerms log_joint_terms(const ParamStore& params, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& z) {
  if (z.size() != params.spec().latent_dim)
    throw ShapeError("log_joint_terms: latent vector has wrong size");
  const DiagGaussian q = encode(params, x);
  const DiagGaussian px = decode(params, z);
  LogJointTerms t;
  t.log_p_x_given_z = diag_gaussian_log_density(x, px.mean, px.log_var);
  t.log_p_z = -0.5 * (kLog2Pi * static_cast<double>(z.size()) + z.squaredNorm());
  t.log_q_z_given_x = diag_gaussian_log_density(z, q.mean, q.log_var);
  if (!std::isfinite(t.log_p_x_given_z)) throw NumericError("log_p_x_given_z", "non-finite");
  if (!std::isfinite(t.log_p_z)) throw NumericError("log_p_z", "non-finite");
  if (!std::isfinite(t.log_q_z_given_x)) throw NumericError("log_q_z_given_x", "non-finite");
  return t;
}

}  // namespace imboost
