#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "imboost/bounds.hpp"
#include "imboost/errors.hpp"
#include "imboost/model.hpp"
#include "linear_gaussian.hpp"
#include "oracles.hpp"

using namespace imboost;

namespace {

ModelSpec small_spec(int p, int d) {
  ModelSpec s;
  s.input_dim = p;
  s.latent_dim = d;
  s.encoder_hidden = {7, 6};
  s.decoder_hidden = {5, 8};
  return s;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_SUITE("dgm-core") {

TEST_CASE("zero parameters give a standard normal in both directions") {
  ParamStore p(small_spec(3, 2));
  const DiagGaussian q = encode(p, Eigen::Vector3d(0.3, -4.0, 12.0));
  CHECK(q.mean.isZero(0.0));
  CHECK(q.log_var.isZero(0.0));
  const DiagGaussian x = decode(p, Eigen::Vector2d(1.5, -2.0));
  CHECK(x.mean.size() == 3);
  CHECK(x.mean.isZero(0.0));
  CHECK(x.log_var.isZero(0.0));
}

TEST_CASE("identity layers pass positive inputs through") {
  ModelSpec s;
  s.input_dim = 2;
  s.latent_dim = 2;
  s.encoder_hidden = {2};
  s.decoder_hidden = {1};
  ParamStore p(s);
  p.tensor("encoder.hidden0.weight") = Eigen::Matrix2d::Identity();
  p.tensor("encoder.mean.weight") = Eigen::Matrix2d::Identity();
  CHECK(encode(p, Eigen::Vector2d(1.0, 2.0)).mean.isApprox(Eigen::Vector2d(1.0, 2.0)));

  ModelSpec s1;
  s1.input_dim = 1;
  s1.latent_dim = 1;
  s1.encoder_hidden = {1};
  s1.decoder_hidden = {1};
  ParamStore q(s1);
  q.tensor("decoder.hidden0.weight")(0, 0) = 1.0;
  q.tensor("decoder.mean.weight")(0, 0) = 1.0;
  CHECK(decode(q, Eigen::VectorXd::Constant(1, 0.5)).mean(0) == 0.5);
}

TEST_CASE("seeded forward passes match a scalar-loop oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ParamStore p = initialize_params(small_spec(5, 3), seed);
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> normal;
    Eigen::VectorXd x(5), z(3);
    for (auto& v : x) v = normal(rng);
    for (auto& v : z) v = normal(rng);

    const DiagGaussian q = encode(p, x);
    const auto q_ref = testing::naive_forward(p, "encoder", to_std(x));
    const DiagGaussian g = decode(p, z);
    const auto g_ref = testing::naive_forward(p, "decoder", to_std(z));
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(q.mean(j) - q_ref.mean[j]) < 1e-12);
      CHECK(std::abs(q.log_var(j) - q_ref.log_var[j]) < 1e-12);
    }
    for (int j = 0; j < 5; ++j) {
      CHECK(std::abs(g.mean(j) - g_ref.mean[j]) < 1e-12);
      CHECK(std::abs(g.log_var(j) - g_ref.log_var[j]) < 1e-12);
    }
  }
}

TEST_CASE("log-variances are clamped") {
  ParamStore p(small_spec(2, 2));
  p.tensor("encoder.log_var.bias").setConstant(100.0);
  p.tensor("decoder.log_var.bias").setConstant(-100.0);
  CHECK((encode(p, Eigen::Vector2d(0.1, 0.2)).log_var.array() == kLogVarMax).all());
  CHECK((decode(p, Eigen::Vector2d(0.1, 0.2)).log_var.array() == kLogVarMin).all());

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ParamStore r = initialize_params(small_spec(4, 2), seed);
    r.values() *= 50.0;
    const DiagGaussian q = encode(r, Eigen::Vector4d(1, -2, 3, -4));
    const DiagGaussian g = decode(r, q.mean);
    CHECK(q.log_var.minCoeff() >= kLogVarMin);
    CHECK(q.log_var.maxCoeff() <= kLogVarMax);
    CHECK(g.log_var.minCoeff() >= kLogVarMin);
    CHECK(g.log_var.maxCoeff() <= kLogVarMax);
  }
}

TEST_CASE("log-joint terms at the origin") {
  const double half_log_2pi = -0.9189385332046727;
  ModelSpec s = small_spec(1, 1);
  ParamStore zero(s);
  const LogJointTerms a = log_joint_terms(zero, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  CHECK(a.log_p_z == doctest::Approx(half_log_2pi).epsilon(1e-12));
  CHECK(a.log_q_z_given_x == doctest::Approx(half_log_2pi).epsilon(1e-12));

  const ParamStore lg = testing::linear_gaussian_model();
  const LogJointTerms b = log_joint_terms(lg, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  CHECK(b.log_p_x_given_z == doctest::Approx(half_log_2pi).epsilon(1e-12));
  CHECK(b.log_weight() == doctest::Approx(b.log_p_x_given_z + b.log_p_z - b.log_q_z_given_x));
}

TEST_CASE("diagonal Gaussian density") {
  CHECK(diag_gaussian_log_density(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)) ==
        doctest::Approx(-1.8378770664093453));
  // N(1; 0, e^2) = -0.5 log(2 pi) - 1 - 0.5 e^-2
  CHECK(diag_gaussian_log_density(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1),
                                  Eigen::VectorXd::Constant(1, 2.0)) ==
        doctest::Approx(-0.9189385332046727 - 1.0 - 0.5 * std::exp(-2.0)));
}

TEST_CASE("losses are a deterministic function of params, input and noise") {
  const ParamStore p = initialize_params(small_spec(4, 2), 7);
  std::mt19937_64 rng(3);
  const NoiseBatch noise = NoiseBatch::standard_normal(rng, 5, 3, 2);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Random(5, 4);
  const Eigen::VectorXd a = per_sample_losses(p, rows, noise);
  const Eigen::VectorXd b = per_sample_losses(p, rows, noise);
  CHECK((a.array() == b.array()).all());
  for (int r = 0; r < 5; ++r) {
    CHECK(iwae_loss(p, rows.row(r).transpose(), noise.draw(r)) == a(r));
  }
}

TEST_CASE("initialization is seeded and bounded by the fan-in") {
  const ModelSpec s = small_spec(6, 3);
  const ParamStore a = initialize_params(s, 11);
  const ParamStore b = initialize_params(s, 11);
  const ParamStore c = initialize_params(s, 12);
  CHECK((a.values().array() == b.values().array()).all());
  CHECK_FALSE((a.values().array() == c.values().array()).all());
  for (const auto& [name, slice] : a.layout()) {
    const bool bias = name.size() > 5 && name.substr(name.size() - 5) == ".bias";
    const int fan_in = bias ? a.slice(name.substr(0, name.size() - 5) + ".weight").cols : slice.cols;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    CHECK(a.tensor(slice).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("parameter slices tile the flat vector") {
  const ParamStore p(small_spec(3, 2));
  std::vector<bool> covered(p.size(), false);
  for (const auto& [name, s] : p.layout())
    for (std::size_t i = s.offset; i < s.offset + s.size(); ++i) {
      CHECK_FALSE(covered[i]);
      covered[i] = true;
    }
  CHECK(std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }));
  CHECK_THROWS_AS(p.slice("encoder.hidden9.weight"), std::out_of_range);
}

TEST_CASE("default architecture for an input size") {
  CHECK(ModelSpec::for_input(1).latent_dim == 2);
  CHECK(ModelSpec::for_input(8).latent_dim == 2);
  CHECK(ModelSpec::for_input(9).latent_dim == 3);
  CHECK(ModelSpec::for_input(100).latent_dim == 25);
  CHECK(ModelSpec::for_input(128).latent_dim == 32);
  CHECK(ModelSpec::for_input(500).latent_dim == 32);
  const ModelSpec s = ModelSpec::for_input(30);
  CHECK(s.encoder_hidden == std::vector<int>{64, 64});
  CHECK(s.decoder_hidden == std::vector<int>{64, 64});
  CHECK(s.iwae_samples == 2);
  CHECK(s.cubo_power == 2);
  CHECK(s.leaky_slope == 0.01);
}

TEST_CASE("invalid specs and shapes are rejected") {
  ModelSpec s = small_spec(3, 2);
  s.iwae_samples = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = small_spec(3, 2);
  s.cubo_power = 1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  const ParamStore p(small_spec(3, 2));
  CHECK_THROWS_AS(encode(p, Eigen::Vector2d(0, 0)), ShapeError);
  CHECK_THROWS_AS(decode(p, Eigen::Vector3d(0, 0, 0)), ShapeError);
}

TEST_CASE("noise batches pack draws row by row") {
  std::vector<NoiseDraw> draws;
  for (int r = 0; r < 3; ++r) {
    NoiseDraw d{Eigen::MatrixXd(2, 4)};
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 4; ++j) d.eps(k, j) = 100 * r + 10 * k + j;
    draws.push_back(d);
  }
  const NoiseBatch b = NoiseBatch::from_draws(draws);
  CHECK(b.rows() == 3);
  CHECK(b.samples() == 2);
  CHECK(b.latent_dim() == 4);
  CHECK(b.packed()(3, 2 * 2 + 1) == 213);
  for (int r = 0; r < 3; ++r) CHECK(b.draw(r).eps == draws[static_cast<std::size_t>(r)].eps);

  draws[1].eps.resize(3, 4);
  CHECK_THROWS_AS(NoiseBatch::from_draws(draws), ShapeError);
}

}  // TEST_SUITE
