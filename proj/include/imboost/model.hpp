#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace imboost {

/// Architecture of the encoder/decoder pair. Both networks are MLPs with
/// leaky-relu hidden layers and separate linear heads for mean and log-variance.
struct ModelSpec {
  int input_dim = 0;
  int latent_dim = 0;
  std::vector<int> encoder_hidden{64, 64};
  std::vector<int> decoder_hidden{64, 64};
  double leaky_slope = 0.01;
  int iwae_samples = 2;  // K
  int cubo_power = 2;    // v

  /// Default architecture for `input_dim` features:
  /// latent = max(2, min(32, ceil(p / 4))), hidden 64/64.
  static ModelSpec for_input(int input_dim);

  /// Throws std::invalid_argument on non-positive sizes, K < 1 or v < 2.
  void validate() const;
};

inline constexpr double kLogVarMin = -8.0;
inline constexpr double kLogVarMax = 8.0;

/// Offset and shape of one parameter tensor in the flat vector.
/// Matrices are stored column-major with rows = fan-out.
struct Slice {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct DenseSlices {
  Slice weight;
  Slice bias;
};

struct NetworkLayout {
  std::vector<DenseSlices> hidden;
  DenseSlices mean;
  DenseSlices log_var;
};

/// Flat parameter vector for encoder (phi) and decoder (theta) with named
/// slices such as "encoder.hidden0.weight" or "decoder.log_var.bias".
class ParamStore {
 public:
  ParamStore() = default;
  /// All-zero parameters for `spec`.
  explicit ParamStore(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  const std::map<std::string, Slice>& layout() const { return layout_; }
  const NetworkLayout& encoder() const { return encoder_; }
  const NetworkLayout& decoder() const { return decoder_; }

  /// Throws std::out_of_range for unknown names.
  const Slice& slice(const std::string& name) const;
  Eigen::Map<Eigen::MatrixXd> tensor(const Slice& s);
  Eigen::Map<const Eigen::MatrixXd> tensor(const Slice& s) const;
  Eigen::Map<Eigen::MatrixXd> tensor(const std::string& name) { return tensor(slice(name)); }
  Eigen::Map<const Eigen::MatrixXd> tensor(const std::string& name) const {
    return tensor(slice(name));
  }

  bool all_finite() const { return values_.allFinite(); }

 private:
  NetworkLayout add_network(const std::string& prefix, int in, const std::vector<int>& hidden,
                            int out, std::size_t& offset);

  ModelSpec spec_;
  Eigen::VectorXd values_;
  std::map<std::string, Slice> layout_;
  NetworkLayout encoder_;
  NetworkLayout decoder_;
};

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
ParamStore initialize_params(const ModelSpec& spec, std::uint64_t seed);

/// Standard-normal draws for one sample: K rows, latent_dim columns.
struct NoiseDraw {
  Eigen::MatrixXd eps;
};

/// Noise for a batch of rows. Column r*K + k holds draw k of row r.
class NoiseBatch {
 public:
  NoiseBatch() = default;
  NoiseBatch(int rows, int samples, int latent_dim);

  static NoiseBatch standard_normal(std::mt19937_64& rng, int rows, int samples, int latent_dim);
  static NoiseBatch from_draws(std::span<const NoiseDraw> draws);

  int rows() const { return rows_; }
  int samples() const { return samples_; }
  int latent_dim() const { return static_cast<int>(packed_.rows()); }
  const Eigen::MatrixXd& packed() const { return packed_; }
  Eigen::MatrixXd& packed() { return packed_; }
  NoiseDraw draw(int row) const;

 private:
  int rows_ = 0;
  int samples_ = 0;
  Eigen::MatrixXd packed_;
};

struct DiagGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_var;
};

/// q(z|x): encoder forward pass. log_var is clamped to [-8, 8].
DiagGaussian encode(const ParamStore& params, const Eigen::VectorXd& x);
/// p(x|z): decoder forward pass. log_var is clamped to [-8, 8].
DiagGaussian decode(const ParamStore& params, const Eigen::VectorXd& z);

struct LogJointTerms {
  double log_p_x_given_z = 0.0;
  double log_p_z = 0.0;
  double log_q_z_given_x = 0.0;
  double log_weight() const { return log_p_x_given_z + log_p_z - log_q_z_given_x; }
};

/// Log densities entering the importance weight p(x, z) / q(z | x).
LogJointTerms log_joint_terms(const ParamStore& params, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& z);

/// Sum over coordinates of log N(x_j; mean_j, exp(log_var_j)).
double diag_gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& log_var);

}  // namespace imboost
