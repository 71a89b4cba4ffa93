#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace imboost {

/// A ranking metric was requested on single-class labels.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mann-Whitney AUC with outliers (label 1) as positives; ties earn half credit.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Step-wise average precision, sum_k (R_k - R_{k-1}) P_k over descending
/// distinct score thresholds; tied scores form one step.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct RoundMetrics {
  int round = 0;
  double auc_train = 0.0;
  double ap_train = 0.0;
  double auc_test = 0.0;
  double ap_test = 0.0;
};

struct EvalReport {
  double auc = 0.0;
  double ap = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::vector<RoundMetrics> per_round;
};

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels);

/// Mean and sample standard deviation (n - 1 denominator; 0 for n < 2).
struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};
MeanStd mean_std(std::span<const double> values);

}  // namespace imboost
