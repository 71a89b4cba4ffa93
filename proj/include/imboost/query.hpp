#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace imboost {

enum class QueryStrategy { kRandom, kConfidencePoles, kMixtureModel };

std::string to_string(QueryStrategy strategy);
/// Accepts "rd", "cp", "mm" (case-insensitive). Throws std::invalid_argument.
QueryStrategy parse_strategy(const std::string& name);

enum class Label { kInlier, kOutlier };

std::string to_string(Label label);
Label parse_label(const std::string& name);

struct OracleAnswer {
  std::size_t index = 0;
  Label label = Label::kInlier;
};

/// Labeled inliers and outliers. Both sets are kept sorted and disjoint.
class LabelStore {
 public:
  const std::vector<std::size_t>& inliers() const { return inliers_; }
  const std::vector<std::size_t>& outliers() const { return outliers_; }
  std::size_t size() const { return inliers_.size() + outliers_.size(); }
  bool contains(std::size_t index) const;

  /// All-or-nothing: throws LabelConflict for an index already labeled or
  /// appearing twice in `answers`.
  void apply(std::span<const OracleAnswer> answers);

  static LabelStore from_sets(std::vector<std::size_t> inliers, std::vector<std::size_t> outliers);

 private:
  std::vector<std::size_t> inliers_;
  std::vector<std::size_t> outliers_;
};

LabelStore apply_answers(LabelStore store, std::span<const OracleAnswer> answers);

enum class BudgetMode {
  kPerRound,  // ceil(1% of n_train) per round, 6 when n_train < 500
  kTotal,     // the 1% (or 6) is spread across all rounds
};

struct QueryBudget {
  std::size_t per_round = 6;
  int rounds_total = 5;

  static QueryBudget for_training_size(std::size_t n_train, int rounds,
                                       BudgetMode mode = BudgetMode::kPerRound);
};

/// Uniform sample without replacement from the indices not excluded.
std::vector<std::size_t> select_random(std::size_t pool_size, const std::vector<bool>& excluded,
                                       std::size_t budget, std::mt19937_64& rng);
/// ceil(b/2) lowest-scoring then floor(b/2) highest-scoring eligible indices.
std::vector<std::size_t> select_confidence_poles(std::span<const double> scores,
                                                 const std::vector<bool>& excluded,
                                                 std::size_t budget);
/// The b eligible indices with posterior closest to alpha; ties go to the lower index.
std::vector<std::size_t> select_mixture_model(std::span<const double> posteriors,
                                              const std::vector<bool>& excluded,
                                              std::size_t budget, double alpha);

struct QuerySelection {
  std::vector<std::size_t> indices;
  /// Inlier posterior for every sample when the GMM fit succeeded.
  std::optional<std::vector<double>> posteriors;
  /// MM requested but the loss sample was degenerate; RD was used instead.
  bool fell_back_to_random = false;
};

/// Runs one strategy on ensembled losses over the training set.
QuerySelection select_queries(QueryStrategy strategy, std::span<const double> scores,
                              const std::vector<bool>& excluded, std::size_t budget, double alpha,
                              std::mt19937_64& rng);

/// Source of labels for queried training indices.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::vector<OracleAnswer> answer(std::span<const std::size_t> indices) = 0;
};

/// Answers from ground truth (1 = outlier) over the training set.
class SimulatedOracle : public Oracle {
 public:
  explicit SimulatedOracle(std::vector<int> labels) : labels_(std::move(labels)) {}
  std::vector<OracleAnswer> answer(std::span<const std::size_t> indices) override;

 private:
  std::vector<int> labels_;
};

}  // namespace imboost
