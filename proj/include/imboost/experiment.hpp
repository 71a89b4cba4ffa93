#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "imboost/dataset.hpp"
#include "imboost/metrics.hpp"
#include "imboost/trainer.hpp"

namespace imboost {

/// Every tunable of a run. Serialized next to every output file.
struct RunConfig {
  TrainerConfig trainer;
  std::optional<int> latent_dim;  // default: max(2, min(32, ceil(p / 4)))
  std::vector<int> hidden{64, 64};
  int iwae_samples = 2;
  double test_fraction = 0.3;
  std::string oracle = "simulated";  // simulated | human

  void validate() const;
  ModelSpec model_spec(int input_dim) const;
};

nlohmann::json to_json(const RunConfig& config);
/// Keys absent from `j` keep their defaults. Throws std::invalid_argument on
/// unknown keys or out-of-range values.
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainerConfig& config);
TrainerConfig trainer_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

struct RunResult {
  RunConfig config;
  std::uint64_t seed = 0;
  std::string dataset;
  Dataset data;  // split and normalized
  Eigen::VectorXd train_scores;
  Eigen::VectorXd test_scores;
  std::optional<EvalReport> train_metrics;
  std::optional<EvalReport> test_metrics;
  std::vector<RoundMetrics> per_round;
  RiskTrace risk_trace;
  std::size_t labeled_inliers = 0;
  std::size_t labeled_outliers = 0;
  ParamStore params;
};

/// Metrics over a score vector; nullopt when a class is missing.
std::optional<EvalReport> try_evaluate(const Eigen::VectorXd& scores, const std::vector<int>& labels);

/// Records per-round metrics into `sink`; both must outlive the trainer run.
Trainer::RoundHook round_metrics_hook(const Dataset& data, std::vector<RoundMetrics>& sink);

/// Final scores, metrics and label counts of a finished trainer over split `data`.
RunResult collect_result(const Trainer& trainer, const Dataset& data, const RunConfig& config,
                         std::uint64_t seed);

/// Split with `seed`, train with a simulated oracle backed by the labels, score
/// both splits and record metrics after each round.
RunResult run_experiment(const Dataset& raw, const RunConfig& config, std::uint64_t seed);

/// Final scores for train and test rows of a split dataset.
void score_splits(const ParamStore& params, const Dataset& data, const TrainerConfig& config,
                  Eigen::VectorXd& train_scores, Eigen::VectorXd& test_scores);

nlohmann::json metrics_json(const RunResult& result);
/// row_index, split, score[, label]; preceded by "# config:" and "# seed:" lines.
void write_scores_csv(const RunResult& result, const std::string& path);

}  // namespace imboost
