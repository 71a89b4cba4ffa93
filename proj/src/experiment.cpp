#include "imboost/experiment.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "imboost/errors.hpp"

namespace imboost {

using nlohmann::json;

namespace {

std::string schedule_name(LambdaSchedule s) { return s == LambdaSchedule::kDecay ? "decay" : "constant"; }

LambdaSchedule parse_schedule(const std::string& s) {
  if (s == "constant") return LambdaSchedule::kConstant;
  if (s == "decay") return LambdaSchedule::kDecay;
  throw std::invalid_argument("lambda_schedule must be constant or decay");
}

std::string budget_name(BudgetMode m) { return m == BudgetMode::kTotal ? "total" : "per-round"; }

BudgetMode parse_budget(const std::string& s) {
  if (s == "per-round" || s == "per_round") return BudgetMode::kPerRound;
  if (s == "total") return BudgetMode::kTotal;
  throw std::invalid_argument("budget_mode must be per-round or total");
}

const std::set<std::string>& trainer_keys() {
  static const std::set<std::string> keys = {
      "n0",  "gamma",   "t0",     "t1",     "t2",       "ta",           "seed",
      "score_mc", "lr", "lambda1", "lambda2", "rho", "xi", "lambda_schedule", "alpha",
      "strategy", "budget_mode", "budget_per_round", "trace_warmup", "unit"};
  return keys;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(std::string("config key '") + key + "': " + e.what());
    }
  }
}

json metrics_or_null(const std::optional<EvalReport>& r, double EvalReport::*field) {
  if (!r) return nullptr;
  return (*r).*field;
}

}  // namespace

json to_json(const TrainerConfig& c) {
  json j = {{"n0", c.n0},
            {"gamma", c.gamma},
            {"t0", c.t0},
            {"t1", c.t1},
            {"t2", c.t2},
            {"ta", c.rounds},
            {"seed", c.seed},
            {"score_mc", c.score_mc},
            {"lr", c.lr},
            {"lambda1", c.loss.lambda1},
            {"lambda2", c.loss.lambda2},
            {"rho", c.loss.rho},
            {"xi", c.loss.xi},
            {"lambda_schedule", schedule_name(c.loss.schedule)},
            {"alpha", c.alpha},
            {"strategy", to_string(c.strategy)},
            {"budget_mode", budget_name(c.budget_mode)},
            {"budget_per_round", nullptr},
            {"trace_warmup", c.trace_warmup},
            {"unit", c.unit == IterationUnit::kEpoch ? "epoch" : "step"}};
  if (c.budget_per_round) j["budget_per_round"] = *c.budget_per_round;
  return j;
}

TrainerConfig trainer_config_from_json(const json& j) {
  TrainerConfig c;
  read(j, "n0", c.n0);
  read(j, "gamma", c.gamma);
  read(j, "t0", c.t0);
  read(j, "t1", c.t1);
  read(j, "t2", c.t2);
  read(j, "ta", c.rounds);
  read(j, "seed", c.seed);
  read(j, "score_mc", c.score_mc);
  read(j, "lr", c.lr);
  read(j, "lambda1", c.loss.lambda1);
  read(j, "lambda2", c.loss.lambda2);
  read(j, "rho", c.loss.rho);
  read(j, "xi", c.loss.xi);
  read(j, "alpha", c.alpha);
  read(j, "trace_warmup", c.trace_warmup);
  if (j.contains("lambda_schedule")) c.loss.schedule = parse_schedule(j.at("lambda_schedule").get<std::string>());
  if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("budget_mode")) c.budget_mode = parse_budget(j.at("budget_mode").get<std::string>());
  if (j.contains("unit")) {
    const auto unit = j.at("unit").get<std::string>();
    if (unit != "step" && unit != "epoch") throw std::invalid_argument("unit must be step or epoch");
    c.unit = unit == "epoch" ? IterationUnit::kEpoch : IterationUnit::kStep;
  }
  if (j.contains("budget_per_round") && !j.at("budget_per_round").is_null())
    c.budget_per_round = j.at("budget_per_round").get<std::size_t>();
  return c;
}

json to_json(const ModelSpec& s) {
  return {{"input_dim", s.input_dim},         {"latent_dim", s.latent_dim},
          {"encoder_hidden", s.encoder_hidden}, {"decoder_hidden", s.decoder_hidden},
          {"leaky_slope", s.leaky_slope},     {"iwae_samples", s.iwae_samples},
          {"cubo_power", s.cubo_power}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  read(j, "input_dim", s.input_dim);
  read(j, "latent_dim", s.latent_dim);
  read(j, "encoder_hidden", s.encoder_hidden);
  read(j, "decoder_hidden", s.decoder_hidden);
  read(j, "leaky_slope", s.leaky_slope);
  read(j, "iwae_samples", s.iwae_samples);
  read(j, "cubo_power", s.cubo_power);
  return s;
}

void RunConfig::validate() const {
  trainer.validate();
  if (latent_dim && *latent_dim <= 0) throw std::invalid_argument("latent_dim must be positive");
  if (hidden.empty()) throw std::invalid_argument("hidden needs at least one layer");
  for (int h : hidden)
    if (h <= 0) throw std::invalid_argument("hidden widths must be positive");
  if (iwae_samples < 1) throw std::invalid_argument("iwae_samples must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  if (oracle != "simulated" && oracle != "human")
    throw std::invalid_argument("oracle must be simulated or human");
}

ModelSpec RunConfig::model_spec(int input_dim) const {
  ModelSpec spec = ModelSpec::for_input(input_dim);
  if (latent_dim) spec.latent_dim = *latent_dim;
  spec.encoder_hidden = hidden;
  spec.decoder_hidden = hidden;
  spec.iwae_samples = iwae_samples;
  return spec;
}

json to_json(const RunConfig& c) {
  json j = to_json(c.trainer);
  j["latent_dim"] = c.latent_dim ? json(*c.latent_dim) : json(nullptr);
  j["hidden"] = c.hidden;
  j["iwae_samples"] = c.iwae_samples;
  j["test_fraction"] = c.test_fraction;
  j["oracle"] = c.oracle;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> extra = {"latent_dim", "hidden", "iwae_samples",
                                                "test_fraction", "oracle"};
    if (!trainer_keys().count(key) && !extra.count(key))
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
  RunConfig c;
  c.trainer = trainer_config_from_json(j);
  if (j.contains("latent_dim") && !j.at("latent_dim").is_null()) c.latent_dim = j.at("latent_dim").get<int>();
  read(j, "hidden", c.hidden);
  read(j, "iwae_samples", c.iwae_samples);
  read(j, "test_fraction", c.test_fraction);
  read(j, "oracle", c.oracle);
  c.validate();
  return c;
}

std::optional<EvalReport> try_evaluate(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  try {
    return evaluate({scores.data(), static_cast<std::size_t>(scores.size())}, labels);
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

void score_splits(const ParamStore& params, const Dataset& data, const TrainerConfig& config,
                  Eigen::VectorXd& train_scores, Eigen::VectorXd& test_scores) {
  const std::uint64_t seed = scoring_seed(config.seed);
  train_scores = final_scores(params, data.train_features(), config.score_mc, seed);
  test_scores = data.test_idx.empty()
                    ? Eigen::VectorXd()
                    : final_scores(params, data.test_features(), config.score_mc, seed + 1);
}

Trainer::RoundHook round_metrics_hook(const Dataset& data, std::vector<RoundMetrics>& sink) {
  return [&data, &sink](const Trainer& t, int round) {
    if (round <= 0 || !data.labels) return;
    Eigen::VectorXd train_scores, test_scores;
    score_splits(t.params(), data, t.config(), train_scores, test_scores);
    const auto tr = try_evaluate(train_scores, data.gather_labels(data.train_idx));
    const auto te = try_evaluate(test_scores, data.gather_labels(data.test_idx));
    RoundMetrics m;
    m.round = round;
    m.auc_train = tr ? tr->auc : std::nan("");
    m.ap_train = tr ? tr->ap : std::nan("");
    m.auc_test = te ? te->auc : std::nan("");
    m.ap_test = te ? te->ap : std::nan("");
    sink.push_back(m);
  };
}

RunResult collect_result(const Trainer& trainer, const Dataset& data, const RunConfig& config,
                         std::uint64_t seed) {
  RunResult result;
  result.config = config;
  result.config.trainer.seed = seed;
  result.seed = seed;
  result.dataset = data.name;
  result.data = data;
  score_splits(trainer.params(), data, trainer.config(), result.train_scores, result.test_scores);
  if (data.labels) {
    result.train_metrics = try_evaluate(result.train_scores, data.gather_labels(data.train_idx));
    result.test_metrics = try_evaluate(result.test_scores, data.gather_labels(data.test_idx));
  }
  result.risk_trace = trainer.state().risk_trace;
  result.labeled_inliers = trainer.state().labels.inliers().size();
  result.labeled_outliers = trainer.state().labels.outliers().size();
  result.params = trainer.params();
  return result;
}

RunResult run_experiment(const Dataset& raw, const RunConfig& config, std::uint64_t seed) {
  config.validate();
  if (!raw.labels) throw std::invalid_argument("a simulated oracle needs a label column");
  RunConfig resolved = config;
  resolved.trainer.seed = seed;
  const Dataset data = split_and_normalize(raw, config.test_fraction, seed);
  const std::vector<int> train_labels = data.gather_labels(data.train_idx);

  Trainer trainer(resolved.trainer, config.model_spec(static_cast<int>(data.cols())),
                  data.train_features(), train_labels);
  std::vector<RoundMetrics> per_round;
  trainer.set_round_hook(round_metrics_hook(data, per_round));
  SimulatedOracle oracle(train_labels);
  trainer.advance(&oracle);
  if (trainer.phase() == Phase::kFailed)
    throw NumericError("training", trainer.state().failure);

  RunResult result = collect_result(trainer, data, resolved, seed);
  result.per_round = std::move(per_round);
  return result;
}

json metrics_json(const RunResult& r) {
  json rounds = json::array();
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  for (const auto& m : r.per_round)
    rounds.push_back({{"round", m.round},
                      {"auc_train", num(m.auc_train)},
                      {"ap_train", num(m.ap_train)},
                      {"auc_test", num(m.auc_test)},
                      {"ap_test", num(m.ap_test)}});
  return {{"dataset", r.dataset},
          {"seed", r.seed},
          {"strategy", to_string(r.config.trainer.strategy)},
          {"config", to_json(r.config)},
          {"n_train", r.data.train_idx.size()},
          {"n_test", r.data.test_idx.size()},
          {"auc_train", metrics_or_null(r.train_metrics, &EvalReport::auc)},
          {"auc_test", metrics_or_null(r.test_metrics, &EvalReport::auc)},
          {"ap_train", metrics_or_null(r.train_metrics, &EvalReport::ap)},
          {"ap_test", metrics_or_null(r.test_metrics, &EvalReport::ap)},
          {"labeled_inliers", r.labeled_inliers},
          {"labeled_outliers", r.labeled_outliers},
          {"per_round", rounds}};
}

void write_scores_csv(const RunResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "# config: " << to_json(r.config).dump() << '\n';
  out << "# seed: " << r.seed << '\n';
  const bool labeled = r.data.labels.has_value();
  out << "row_index,split,score" << (labeled ? ",label" : "") << '\n';
  auto emit = [&](const std::vector<std::size_t>& idx, const Eigen::VectorXd& scores,
                  const char* split) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out << idx[i] << ',' << split << ',' << scores(static_cast<Eigen::Index>(i));
      if (labeled) out << ',' << (*r.data.labels)[idx[i]];
      out << '\n';
    }
  };
  emit(r.data.train_idx, r.train_scores, "train");
  emit(r.data.test_idx, r.test_scores, "test");
}

}  // namespace imboost
