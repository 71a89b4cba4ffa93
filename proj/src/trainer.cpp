#include "imboost/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "imboost/bounds.hpp"
#include "imboost/errors.hpp"
#include "imboost/gradient.hpp"

namespace imboost {

void TrainerConfig::validate() const {
  if (n0 == 0) throw std::invalid_argument("n0 must be positive");
  if (!(gamma >= 1.0)) throw std::invalid_argument("gamma must be >= 1");
  if (t0 < 0 || t1 < 0 || t2 < 0) throw std::invalid_argument("step counts must be non-negative");
  if (rounds <= 0) throw std::invalid_argument("Ta must be positive");
  if (t2 % rounds != 0) throw std::invalid_argument("Ta must divide T2");
  if (score_mc <= 0) throw std::invalid_argument("score_mc must be positive");
  if (!(lr >= 0.0)) throw std::invalid_argument("lr must be non-negative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  loss.validate();
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kWarmup: return "WARMUP";
    case Phase::kPolarizing: return "POLARIZING";
    case Phase::kAwaitingLabels: return "AWAITING_LABELS";
    case Phase::kDone: return "DONE";
    case Phase::kFailed: return "FAILED";
  }
  return "?";
}

Phase parse_phase(const std::string& name) {
  for (Phase p : {Phase::kWarmup, Phase::kPolarizing, Phase::kAwaitingLabels, Phase::kDone,
                  Phase::kFailed})
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown phase " + name);
}

SnapshotBuffer::SnapshotBuffer(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

void SnapshotBuffer::push(int t, Eigen::VectorXd losses) {
  snapshots_.push_back({t, std::move(losses)});
  while (snapshots_.size() > capacity_) snapshots_.pop_front();
}

std::vector<int> SnapshotBuffer::iterations() const {
  std::vector<int> out;
  for (const auto& s : snapshots_) out.push_back(s.t);
  return out;
}

Eigen::VectorXd ensemble_scores(const SnapshotBuffer& buffer) {
  if (buffer.size() == 0) throw std::logic_error("ensemble of an empty snapshot buffer");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(buffer.snapshots().front().losses.size());
  for (const auto& s : buffer.snapshots()) sum += s.losses;
  return sum / static_cast<double>(buffer.size());
}

RiskPoint measure_risks(int t, std::span<const double> losses, std::span<const int> labels) {
  RiskPoint p;
  p.t = t;
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < losses.size() && i < labels.size(); ++i) {
    const int c = labels[i] == 1 ? 1 : 0;
    sum[c] += losses[i];
    ++count[c];
  }
  if (count[0]) p.inlier = sum[0] / static_cast<double>(count[0]);
  if (count[1]) p.outlier = sum[1] / static_cast<double>(count[1]);
  return p;
}

std::uint64_t scoring_seed(std::uint64_t run_seed) { return run_seed ^ 0x5C0E5EEDULL; }

Eigen::VectorXd final_scores(const ParamStore& params, const Eigen::MatrixXd& rows, int score_mc,
                             std::uint64_t seed) {
  if (score_mc <= 0) throw std::invalid_argument("score_mc must be positive");
  std::mt19937_64 rng(seed);
  const ModelSpec& spec = params.spec();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(rows.rows());
  for (int m = 0; m < score_mc; ++m) {
    const NoiseBatch noise = NoiseBatch::standard_normal(rng, static_cast<int>(rows.rows()),
                                                         spec.iwae_samples, spec.latent_dim);
    total += per_sample_losses(params, rows, noise, Bound::kIwae);
  }
  return total / static_cast<double>(score_mc);
}

Trainer::Trainer(TrainerConfig config, ModelSpec spec, Eigen::MatrixXd train,
                 std::optional<std::vector<int>> ground_truth)
    : config_(std::move(config)), train_(std::move(train)), ground_truth_(std::move(ground_truth)) {
  config_.validate();
  if (train_.rows() == 0) throw std::invalid_argument("empty training set");
  if (spec.input_dim != train_.cols()) throw ShapeError("model input_dim differs from data");
  if (ground_truth_ && ground_truth_->size() != n_train())
    throw ShapeError("ground truth length differs from the training set");
  schedule_ = {config_.n0, config_.gamma, n_train()};
  budget_ = QueryBudget::for_training_size(n_train(), config_.rounds, config_.budget_mode);
  if (config_.budget_per_round) budget_.per_round = *config_.budget_per_round;

  state_.params = initialize_params(spec, config_.seed);
  state_.adam = AdamState::zeros(state_.params.size(), config_.lr);
  state_.snapshots = SnapshotBuffer(static_cast<std::size_t>(ensemble_window(config_.t2, config_.rounds)));
  state_.rng.seed(config_.seed);
  state_.diagnostics_rng.seed(config_.seed ^ 0xD1A6ULL);
}

Trainer::Trainer(TrainerConfig config, Eigen::MatrixXd train,
                 std::optional<std::vector<int>> ground_truth, TrainerState restored)
    : config_(std::move(config)), train_(std::move(train)), ground_truth_(std::move(ground_truth)) {
  config_.validate();
  if (restored.params.spec().input_dim != train_.cols())
    throw ShapeError("restored model input_dim differs from data");
  schedule_ = {config_.n0, config_.gamma, n_train()};
  budget_ = QueryBudget::for_training_size(n_train(), config_.rounds, config_.budget_mode);
  if (config_.budget_per_round) budget_.per_round = *config_.budget_per_round;
  state_ = std::move(restored);
}

int Trainer::current_t() const {
  return std::max(0, state_.steps_done - config_.t0);
}

void Trainer::guard(const std::function<void()>& body) {
  try {
    body();
  } catch (const NumericError& e) {
    state_.phase = Phase::kFailed;
    state_.failure = e.what();
    throw;
  }
}

void Trainer::run_warmup() {
  while (state_.phase == Phase::kWarmup) step();
}

void Trainer::step() {
  switch (state_.phase) {
    case Phase::kAwaitingLabels: throw std::logic_error("trainer is awaiting labels");
    case Phase::kDone:
    case Phase::kFailed: return;
    default: break;
  }
  guard([&] {
    const int s = state_.steps_done;
    if (s < config_.t0) {
      plain_step();
    } else if (s < config_.t0 + config_.t1) {
      trimmed_step(s - config_.t0 + 1);
    } else if (state_.phase == Phase::kWarmup) {
      enter_polarization();
    } else if (s < total_steps()) {
      const int t = s - config_.t0 + 1;
      if (is_query_iteration(t, config_.t1, config_.t2, config_.rounds) && state_.last_query_t != t) {
        open_query_round(t);
      } else {
        polarization_step(t);
        if (state_.steps_done == total_steps()) finish();
      }
    } else {
      finish();
    }
  });
}

Phase Trainer::advance(Oracle* oracle) {
  while (state_.phase != Phase::kDone && state_.phase != Phase::kFailed) {
    if (state_.phase == Phase::kAwaitingLabels) {
      if (!oracle) return state_.phase;
      std::vector<std::size_t> idx;
      for (const auto& q : state_.pending) idx.push_back(q.index);
      const std::vector<OracleAnswer> answers = oracle->answer(idx);
      deliver(answers);
      if (state_.phase == Phase::kAwaitingLabels)
        throw std::runtime_error("oracle left queried samples unanswered");
      continue;
    }
    step();
  }
  return state_.phase;
}

void Trainer::deliver(std::span<const OracleAnswer> answers) {
  if (state_.phase != Phase::kAwaitingLabels) throw LabelConflict("no query round is pending");
  for (const auto& a : answers) {
    auto it = std::find_if(state_.pending.begin(), state_.pending.end(),
                           [&](const PendingQuery& q) { return q.index == a.index; });
    if (it == state_.pending.end())
      throw LabelConflict("index " + std::to_string(a.index) + " is not pending");
  }
  state_.labels.apply(answers);
  for (const auto& a : answers)
    std::erase_if(state_.pending, [&](const PendingQuery& q) { return q.index == a.index; });
  if (state_.pending.empty()) state_.phase = Phase::kPolarizing;
}

void Trainer::skip(std::span<const std::size_t> indices) {
  if (state_.phase != Phase::kAwaitingLabels) throw LabelConflict("no query round is pending");
  for (auto i : indices)
    if (std::none_of(state_.pending.begin(), state_.pending.end(),
                     [&](const PendingQuery& q) { return q.index == i; }))
      throw LabelConflict("index " + std::to_string(i) + " is not pending");
  for (auto i : indices)
    std::erase_if(state_.pending, [&](const PendingQuery& q) { return q.index == i; });
  if (state_.pending.empty()) state_.phase = Phase::kPolarizing;
}

std::vector<std::size_t> Trainer::draw_batch(std::size_t size) {
  size = std::min(size, n_train());
  std::vector<std::size_t> all(n_train());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(size);
  std::sample(all.begin(), all.end(), std::back_inserter(out), size, state_.rng);
  return out;
}

std::vector<std::vector<std::size_t>> Trainer::draw_batches(std::size_t size) {
  if (config_.unit == IterationUnit::kStep) return {draw_batch(size)};
  size = std::max<std::size_t>(1, std::min(size, n_train()));
  std::vector<std::size_t> order(n_train());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), state_.rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < order.size(); begin += size) {
    const std::size_t end = std::min(order.size(), begin + size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Eigen::VectorXd Trainer::full_train_losses(std::mt19937_64& rng) const {
  const ModelSpec& spec = state_.params.spec();
  const NoiseBatch noise = NoiseBatch::standard_normal(rng, static_cast<int>(n_train()),
                                                       spec.iwae_samples, spec.latent_dim);
  return per_sample_losses(state_.params, train_, noise, Bound::kIwae);
}

void Trainer::apply_gradient(const Eigen::VectorXd& grad) {
  Eigen::VectorXd& values = state_.params.values();
  adam_step(state_.adam, {values.data(), static_cast<std::size_t>(values.size())},
            {grad.data(), static_cast<std::size_t>(grad.size())});
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& source,
                            std::initializer_list<const std::vector<std::size_t>*> groups) {
  Eigen::Index total = 0;
  for (const auto* g : groups) total += static_cast<Eigen::Index>(g->size());
  Eigen::MatrixXd out(total, source.cols());
  Eigen::Index r = 0;
  for (const auto* g : groups)
    for (auto i : *g) out.row(r++) = source.row(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace

void Trainer::plain_step() {
  const ModelSpec& spec = state_.params.spec();
  for (const auto& batch : draw_batches(config_.n0)) {
    const Eigen::MatrixXd rows = gather_rows(train_, {&batch});
    const NoiseBatch noise = NoiseBatch::standard_normal(state_.rng, static_cast<int>(rows.rows()),
                                                         spec.iwae_samples, spec.latent_dim);
    LossSpec loss;
    loss.batch_rows = batch.size();
    loss.threshold = ThresholdRule::none();
    const LossResult result = loss_and_grad(state_.params, rows, noise, loss);
    apply_gradient(result.grad);
    state_.objective_history.push_back(result.objective);
  }
  ++state_.steps_done;
}

void Trainer::trimmed_step(int t) {
  const ModelSpec& spec = state_.params.spec();
  for (const auto& batch : draw_batches(schedule_.size(t))) {
    const Eigen::MatrixXd rows = gather_rows(train_, {&batch});
    const NoiseBatch noise = NoiseBatch::standard_normal(state_.rng, static_cast<int>(rows.rows()),
                                                         spec.iwae_samples, spec.latent_dim);
    LossSpec loss;
    loss.batch_rows = batch.size();
    loss.threshold = ThresholdRule::quantile(config_.loss.rho);
    const LossResult result = loss_and_grad(state_.params, rows, noise, loss);
    apply_gradient(result.grad);
    state_.objective_history.push_back(result.objective);
  }
  ++state_.steps_done;
  if (config_.trace_warmup && ground_truth_ && t < config_.t1)
    trace(t, full_train_losses(state_.diagnostics_rng));
}

void Trainer::enter_polarization() {
  if (config_.t2 == 0) {
    finish();
    return;
  }
  record_snapshot(config_.t1);
  state_.phase = Phase::kPolarizing;
}

void Trainer::record_snapshot(int t) {
  Eigen::VectorXd losses = full_train_losses(state_.rng);
  trace(t, losses);
  state_.snapshots.push(t, std::move(losses));
}

void Trainer::trace(int t, const Eigen::VectorXd& losses) {
  if (!ground_truth_) return;
  state_.risk_trace.push_back(measure_risks(
      t, {losses.data(), static_cast<std::size_t>(losses.size())}, *ground_truth_));
}

void Trainer::polarization_step(int t) {
  const auto& inliers = state_.labels.inliers();
  const auto& outliers = state_.labels.outliers();
  const ModelSpec& spec = state_.params.spec();
  double scale = 1.0;
  if (config_.loss.schedule == LambdaSchedule::kDecay)
    scale = std::pow(config_.gamma, -(t - config_.t1 - 1));
  for (const auto& batch : draw_batches(schedule_.size(t))) {
    const Eigen::MatrixXd rows = gather_rows(train_, {&batch, &inliers, &outliers});
    const NoiseBatch noise = NoiseBatch::standard_normal(state_.rng, static_cast<int>(rows.rows()),
                                                         spec.iwae_samples, spec.latent_dim);
    LossSpec loss;
    loss.batch_rows = batch.size();
    loss.inlier_rows = inliers.size();
    loss.outlier_rows = outliers.size();
    loss.threshold = ThresholdRule::adaptive(config_.loss.rho, config_.loss.xi);
    loss.lambda1 = config_.loss.lambda1 * scale;
    loss.lambda2 = config_.loss.lambda2 * scale;
    const LossResult result = loss_and_grad(state_.params, rows, noise, loss);
    apply_gradient(result.grad);
    state_.objective_history.push_back(result.objective);
  }
  ++state_.steps_done;
  record_snapshot(t);
}

void Trainer::open_query_round(int t) {
  if (state_.rounds_done > 0 && hook_) hook_(*this, state_.rounds_done);
  const Eigen::VectorXd scores = ensemble();
  std::vector<bool> excluded(n_train(), false);
  for (auto i : state_.labels.inliers()) excluded[i] = true;
  for (auto i : state_.labels.outliers()) excluded[i] = true;
  for (auto i : state_.reserved) excluded[i] = true;
  const QuerySelection selection =
      select_queries(config_.strategy, {scores.data(), static_cast<std::size_t>(scores.size())},
                     excluded, budget_.per_round, config_.alpha, state_.rng);
  state_.last_query_t = t;
  ++state_.rounds_done;
  if (selection.indices.empty()) return;
  state_.pending.clear();
  for (auto i : selection.indices) {
    PendingQuery q;
    q.index = i;
    q.ensemble_loss = scores(static_cast<Eigen::Index>(i));
    if (selection.posteriors) q.posterior_inlier = (*selection.posteriors)[i];
    state_.pending.push_back(q);
    state_.reserved.push_back(i);
  }
  state_.phase = Phase::kAwaitingLabels;
}

void Trainer::finish() {
  state_.phase = Phase::kDone;
  if (hook_) hook_(*this, state_.rounds_done);
}

}  // namespace imboost
