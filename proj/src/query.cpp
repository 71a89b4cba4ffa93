#include "imboost/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "imboost/errors.hpp"
#include "imboost/gmm.hpp"

namespace imboost {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::size_t> eligible(std::size_t n, const std::vector<bool>& excluded) {
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (i >= excluded.size() || !excluded[i]) out.push_back(i);
  return out;
}

void insert_sorted(std::vector<std::size_t>& v, std::size_t value) {
  v.insert(std::lower_bound(v.begin(), v.end(), value), value);
}

}  // namespace

std::string to_string(QueryStrategy strategy) {
  switch (strategy) {
    case QueryStrategy::kRandom: return "rd";
    case QueryStrategy::kConfidencePoles: return "cp";
    case QueryStrategy::kMixtureModel: return "mm";
  }
  return "?";
}

QueryStrategy parse_strategy(const std::string& name) {
  const std::string s = lower(name);
  if (s == "rd" || s == "random") return QueryStrategy::kRandom;
  if (s == "cp" || s == "poles") return QueryStrategy::kConfidencePoles;
  if (s == "mm" || s == "mixture") return QueryStrategy::kMixtureModel;
  throw std::invalid_argument("unknown query strategy '" + name + "' (expected rd, cp or mm)");
}

std::string to_string(Label label) { return label == Label::kInlier ? "inlier" : "outlier"; }

Label parse_label(const std::string& name) {
  const std::string s = lower(name);
  if (s == "inlier") return Label::kInlier;
  if (s == "outlier") return Label::kOutlier;
  throw std::invalid_argument("label must be 'inlier' or 'outlier', got '" + name + "'");
}

bool LabelStore::contains(std::size_t index) const {
  return std::binary_search(inliers_.begin(), inliers_.end(), index) ||
         std::binary_search(outliers_.begin(), outliers_.end(), index);
}

void LabelStore::apply(std::span<const OracleAnswer> answers) {
  std::vector<std::size_t> seen;
  for (const auto& a : answers) {
    if (contains(a.index))
      throw LabelConflict("index " + std::to_string(a.index) + " is already labeled");
    if (std::find(seen.begin(), seen.end(), a.index) != seen.end())
      throw LabelConflict("index " + std::to_string(a.index) + " answered twice");
    seen.push_back(a.index);
  }
  for (const auto& a : answers)
    insert_sorted(a.label == Label::kInlier ? inliers_ : outliers_, a.index);
}

LabelStore LabelStore::from_sets(std::vector<std::size_t> inliers,
                                 std::vector<std::size_t> outliers) {
  LabelStore store;
  std::vector<OracleAnswer> answers;
  for (auto i : inliers) answers.push_back({i, Label::kInlier});
  for (auto i : outliers) answers.push_back({i, Label::kOutlier});
  store.apply(answers);
  return store;
}

LabelStore apply_answers(LabelStore store, std::span<const OracleAnswer> answers) {
  store.apply(answers);
  return store;
}

QueryBudget QueryBudget::for_training_size(std::size_t n_train, int rounds, BudgetMode mode) {
  if (rounds <= 0) throw std::invalid_argument("rounds must be positive");
  const std::size_t one_percent =
      n_train >= 500 ? static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(n_train)))
                     : 6;
  QueryBudget budget;
  budget.rounds_total = rounds;
  budget.per_round = mode == BudgetMode::kPerRound
                         ? one_percent
                         : std::max<std::size_t>(1, (one_percent + rounds - 1) / rounds);
  return budget;
}

std::vector<std::size_t> select_random(std::size_t pool_size, const std::vector<bool>& excluded,
                                       std::size_t budget, std::mt19937_64& rng) {
  std::vector<std::size_t> pool = eligible(pool_size, excluded);
  const std::size_t take = std::min(budget, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

std::vector<std::size_t> select_confidence_poles(std::span<const double> scores,
                                                 const std::vector<bool>& excluded,
                                                 std::size_t budget) {
  std::vector<std::size_t> pool = eligible(scores.size(), excluded);
  std::stable_sort(pool.begin(), pool.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  if (pool.size() <= budget) return pool;
  const std::size_t low = (budget + 1) / 2;
  const std::size_t high = budget / 2;
  std::vector<std::size_t> out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(low));
  for (std::size_t i = 0; i < high; ++i) out.push_back(pool[pool.size() - 1 - i]);
  return out;
}

std::vector<std::size_t> select_mixture_model(std::span<const double> posteriors,
                                              const std::vector<bool>& excluded,
                                              std::size_t budget, double alpha) {
  std::vector<std::size_t> pool = eligible(posteriors.size(), excluded);
  std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(posteriors[a] - alpha) < std::abs(posteriors[b] - alpha);
  });
  if (pool.size() > budget) pool.resize(budget);
  return pool;
}

QuerySelection select_queries(QueryStrategy strategy, std::span<const double> scores,
                              const std::vector<bool>& excluded, std::size_t budget, double alpha,
                              std::mt19937_64& rng) {
  QuerySelection out;
  if (budget == 0) return out;
  try {
    const Gmm1d gmm = fit_gmm2(scores);
    std::vector<double> post(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) post[i] = posterior_inlier(gmm, scores[i]);
    out.posteriors = std::move(post);
  } catch (const DegenerateError&) {
  }
  switch (strategy) {
    case QueryStrategy::kRandom:
      out.indices = select_random(scores.size(), excluded, budget, rng);
      break;
    case QueryStrategy::kConfidencePoles:
      out.indices = select_confidence_poles(scores, excluded, budget);
      break;
    case QueryStrategy::kMixtureModel:
      if (out.posteriors) {
        out.indices = select_mixture_model(*out.posteriors, excluded, budget, alpha);
      } else {
        out.fell_back_to_random = true;
        out.indices = select_random(scores.size(), excluded, budget, rng);
      }
      break;
  }
  return out;
}

std::vector<OracleAnswer> SimulatedOracle::answer(std::span<const std::size_t> indices) {
  std::vector<OracleAnswer> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= labels_.size()) throw std::out_of_range("oracle index outside the training set");
    out.push_back({i, labels_[i] == 1 ? Label::kOutlier : Label::kInlier});
  }
  return out;
}

}  // namespace imboost
