#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "imboost/adam.hpp"
#include "imboost/model.hpp"
#include "imboost/objective.hpp"
#include "imboost/query.hpp"
#include "imboost/schedule.hpp"

namespace imboost {

/// What one iteration index t stands for.
enum class IterationUnit {
  kStep,   // one mini-batch gradient step per t
  kEpoch,  // one pass over the training set in mini-batches of size n_t
};

struct TrainerConfig {
  std::size_t n0 = 128;
  double gamma = 1.03;
  int t0 = 10;      // plain-mean warm-up steps
  int t1 = 40;      // trimmed warm-up steps
  int t2 = 50;      // polarization steps
  int rounds = 5;   // Ta, query rounds during polarization
  std::uint64_t seed = 0;
  int score_mc = 16;
  double lr = 1e-3;
  LossConfig loss;
  double alpha = 0.4;
  QueryStrategy strategy = QueryStrategy::kMixtureModel;
  BudgetMode budget_mode = BudgetMode::kPerRound;
  std::optional<std::size_t> budget_per_round;  // overrides the 1% rule
  bool trace_warmup = false;  // also trace risks during the trimmed warm-up
  IterationUnit unit = IterationUnit::kStep;

  void validate() const;
};

enum class Phase { kWarmup, kPolarizing, kAwaitingLabels, kDone, kFailed };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& name);

struct PendingQuery {
  std::size_t index = 0;
  double ensemble_loss = 0.0;
  std::optional<double> posterior_inlier;
};

struct Snapshot {
  int t = 0;
  Eigen::VectorXd losses;
};

/// Ring of the most recent full-training-set loss vectors.
class SnapshotBuffer {
 public:
  explicit SnapshotBuffer(std::size_t capacity = 1);

  void push(int t, Eigen::VectorXd losses);
  std::size_t size() const { return snapshots_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Snapshot>& snapshots() const { return snapshots_; }
  std::vector<int> iterations() const;

 private:
  std::size_t capacity_;
  std::deque<Snapshot> snapshots_;
};

/// Elementwise mean of the buffered snapshots. Throws std::logic_error when empty.
Eigen::VectorXd ensemble_scores(const SnapshotBuffer& buffer);

struct RiskPoint {
  int t = 0;
  std::optional<double> inlier;   // mean loss over true inliers
  std::optional<double> outlier;  // mean loss over true outliers
};
using RiskTrace = std::vector<RiskPoint>;

RiskPoint measure_risks(int t, std::span<const double> losses, std::span<const int> labels);

struct TrainerState {
  Phase phase = Phase::kWarmup;
  int steps_done = 0;
  int rounds_done = 0;
  int last_query_t = 0;
  ParamStore params;
  AdamState adam;
  LabelStore labels;
  std::vector<std::size_t> reserved;  // every index ever queried
  std::vector<PendingQuery> pending;
  SnapshotBuffer snapshots;
  RiskTrace risk_trace;
  std::vector<double> objective_history;
  std::mt19937_64 rng;
  std::mt19937_64 diagnostics_rng;
  std::string failure;
};

/// Per-sample IWAE loss averaged over `score_mc` noise draws seeded by `seed`.
Eigen::VectorXd final_scores(const ParamStore& params, const Eigen::MatrixXd& rows, int score_mc,
                             std::uint64_t seed);

/// Seed used for final scoring, derived from the run seed.
std::uint64_t scoring_seed(std::uint64_t run_seed);

/// Warm-up then polarization as a resumable state machine. Training-set
/// indices (0 .. n_train-1) are used throughout, including in queries.
class Trainer {
 public:
  /// Called with the round number once that round's training is complete.
  using RoundHook = std::function<void(const Trainer&, int round)>;

  Trainer(TrainerConfig config, ModelSpec spec, Eigen::MatrixXd train,
          std::optional<std::vector<int>> ground_truth = {});
  Trainer(TrainerConfig config, Eigen::MatrixXd train, std::optional<std::vector<int>> ground_truth,
          TrainerState restored);

  const TrainerConfig& config() const { return config_; }
  const TrainerState& state() const { return state_; }
  const ParamStore& params() const { return state_.params; }
  Phase phase() const { return state_.phase; }
  std::size_t n_train() const { return static_cast<std::size_t>(train_.rows()); }
  const Eigen::MatrixXd& train_features() const { return train_; }
  const QueryBudget& budget() const { return budget_; }
  const BatchSchedule& schedule() const { return schedule_; }
  int total_steps() const { return config_.t0 + config_.t1 + config_.t2; }
  /// Iteration index of the last completed step (T0 steps carry no index: 0).
  int current_t() const;

  void set_round_hook(RoundHook hook) { hook_ = std::move(hook); }

  /// Runs both warm-up stages and records the snapshot at t = T1.
  void run_warmup();
  /// Performs one unit of work: a gradient step, opening a query round, or a
  /// phase transition. Throws std::logic_error while awaiting labels.
  void step();
  /// Steps until DONE, or until labels are needed and `oracle` is null.
  Phase advance(Oracle* oracle);

  /// Applies answers for pending indices; partial deliveries are allowed.
  /// Throws LabelConflict (state unchanged) for indices not pending.
  void deliver(std::span<const OracleAnswer> answers);
  /// Drops pending indices without labeling them; they stay reserved.
  void skip(std::span<const std::size_t> indices);

  Eigen::VectorXd ensemble() const { return ensemble_scores(state_.snapshots); }

 private:
  void plain_step();
  void trimmed_step(int t);
  void enter_polarization();
  void polarization_step(int t);
  void open_query_round(int t);
  void finish();
  void record_snapshot(int t);
  void trace(int t, const Eigen::VectorXd& losses);
  std::vector<std::size_t> draw_batch(std::size_t size);
  /// Mini-batches for iteration t: one draw, or a shuffled pass in epoch mode.
  std::vector<std::vector<std::size_t>> draw_batches(std::size_t size);
  Eigen::VectorXd full_train_losses(std::mt19937_64& rng) const;
  void apply_gradient(const Eigen::VectorXd& grad);
  void guard(const std::function<void()>& body);

  TrainerConfig config_;
  Eigen::MatrixXd train_;
  std::optional<std::vector<int>> ground_truth_;
  BatchSchedule schedule_;
  QueryBudget budget_;
  TrainerState state_;
  RoundHook hook_;
};

}  // namespace imboost
