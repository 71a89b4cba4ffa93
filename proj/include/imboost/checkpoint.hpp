#pragma once

#include <string>

#include "json.hpp"

#include "imboost/trainer.hpp"

namespace imboost {

inline constexpr int kCheckpointVersion = 1;

/// Structured-text dump of config, parameters, optimizer moments, labels,
/// pending queries, snapshots and both RNG streams. Doubles round-trip exactly.
nlohmann::json checkpoint_json(const Trainer& trainer);
void save_checkpoint(const Trainer& trainer, const std::string& path);

struct Checkpoint {
  TrainerConfig config;
  TrainerState state;
};

/// Throws ParseError on a wrong format tag or version.
Checkpoint checkpoint_from_json(const nlohmann::json& j);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds a trainer over `train` from a checkpoint.
Trainer restore_trainer(Checkpoint checkpoint, Eigen::MatrixXd train,
                        std::optional<std::vector<int>> ground_truth = {});

}  // namespace imboost
