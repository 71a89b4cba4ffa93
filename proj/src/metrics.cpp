#include "imboost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace imboost {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts count_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  ClassCounts c;
  for (int l : labels) {
    if (l == 1) ++c.pos;
    else if (l == 0) ++c.neg;
    else throw std::invalid_argument("labels must be 0 or 1");
  }
  if (c.pos == 0 || c.neg == 0) throw UndefinedMetric("ranking metric needs both classes present");
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return order;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = count_classes(scores, labels);
  const auto order = order_by_score(scores, false);
  // Twice the positive rank sum, with tied groups sharing the doubled mid-rank.
  std::uint64_t doubled_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      pos_in_group += labels[order[j]] == 1;
      ++j;
    }
    // Ranks i+1 .. j; doubled mid-rank = i + 1 + j.
    doubled_rank_sum += static_cast<std::uint64_t>(pos_in_group) * (i + 1 + j);
    i = j;
  }
  const std::uint64_t pos = c.pos;
  // 2U = 2R - pos (pos + 1) counts concordant pairs twice and ties once.
  const std::uint64_t doubled_u = doubled_rank_sum - pos * (pos + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(c.pos * c.neg));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = count_classes(scores, labels);
  const auto order = order_by_score(scores, true);
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t new_tp = 0;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      new_tp += labels[order[j]] == 1;
      ++j;
    }
    tp += new_tp;
    seen = j;
    if (new_tp > 0)
      ap += (static_cast<double>(new_tp) / static_cast<double>(c.pos)) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    i = j;
  }
  return ap;
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels) {
  EvalReport r;
  r.auc = auc(scores, labels);
  r.ap = average_precision(scores, labels);
  for (int l : labels) (l == 1 ? r.n_pos : r.n_neg)++;
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace imboost
