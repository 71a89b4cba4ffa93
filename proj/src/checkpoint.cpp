#include "imboost/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "imboost/errors.hpp"
#include "imboost/experiment.hpp"

namespace imboost {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "imboost-checkpoint";

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

std::mt19937_64 rng_from(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream in(s);
  in >> rng;
  if (!in) throw ParseError("corrupt RNG state in checkpoint");
  return rng;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

json checkpoint_json(const Trainer& trainer) {
  const TrainerState& s = trainer.state();
  json pending = json::array();
  for (const auto& q : s.pending)
    pending.push_back({{"index", q.index},
                       {"ensemble_loss", q.ensemble_loss},
                       {"posterior_inlier", optional_number(q.posterior_inlier)}});
  json snapshots = json::array();
  for (const auto& snap : s.snapshots.snapshots())
    snapshots.push_back({{"t", snap.t}, {"losses", vec(snap.losses)}});
  json trace = json::array();
  for (const auto& p : s.risk_trace)
    trace.push_back({{"t", p.t}, {"inlier", optional_number(p.inlier)}, {"outlier", optional_number(p.outlier)}});

  return {{"format", kFormat},
          {"version", kCheckpointVersion},
          {"config", to_json(trainer.config())},
          {"model", to_json(s.params.spec())},
          {"phase", to_string(s.phase)},
          {"steps_done", s.steps_done},
          {"rounds_done", s.rounds_done},
          {"last_query_t", s.last_query_t},
          {"params", vec(s.params.values())},
          {"adam",
           {{"m", vec(s.adam.m)},
            {"v", vec(s.adam.v)},
            {"step_count", s.adam.step_count},
            {"lr", s.adam.lr},
            {"beta1", s.adam.beta1},
            {"beta2", s.adam.beta2},
            {"eps", s.adam.eps}}},
          {"labels", {{"inliers", s.labels.inliers()}, {"outliers", s.labels.outliers()}}},
          {"reserved", s.reserved},
          {"pending", pending},
          {"snapshot_capacity", s.snapshots.capacity()},
          {"snapshots", snapshots},
          {"risk_trace", trace},
          {"objective_history", s.objective_history},
          {"rng", rng_state(s.rng)},
          {"diagnostics_rng", rng_state(s.diagnostics_rng)},
          {"failure", s.failure}};
}

void save_checkpoint(const Trainer& trainer, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << checkpoint_json(trainer).dump();
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot move checkpoint into place at " + path);
}

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != kFormat)
    throw ParseError("not an imboost checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  try {
    Checkpoint c;
    c.config = trainer_config_from_json(j.at("config"));
    TrainerState& s = c.state;
    s.params = ParamStore(model_spec_from_json(j.at("model")));
    const Eigen::VectorXd values = vec_from(j.at("params"));
    if (values.size() != s.params.values().size()) throw ParseError("parameter count mismatch");
    s.params.values() = values;
    const json& adam = j.at("adam");
    s.adam.m = vec_from(adam.at("m"));
    s.adam.v = vec_from(adam.at("v"));
    s.adam.step_count = adam.at("step_count").get<std::uint64_t>();
    s.adam.lr = adam.at("lr").get<double>();
    s.adam.beta1 = adam.at("beta1").get<double>();
    s.adam.beta2 = adam.at("beta2").get<double>();
    s.adam.eps = adam.at("eps").get<double>();
    s.phase = parse_phase(j.at("phase").get<std::string>());
    s.steps_done = j.at("steps_done").get<int>();
    s.rounds_done = j.at("rounds_done").get<int>();
    s.last_query_t = j.at("last_query_t").get<int>();
    s.labels = LabelStore::from_sets(j.at("labels").at("inliers").get<std::vector<std::size_t>>(),
                                     j.at("labels").at("outliers").get<std::vector<std::size_t>>());
    s.reserved = j.at("reserved").get<std::vector<std::size_t>>();
    for (const auto& q : j.at("pending"))
      s.pending.push_back({q.at("index").get<std::size_t>(), q.at("ensemble_loss").get<double>(),
                           optional_from(q.at("posterior_inlier"))});
    s.snapshots = SnapshotBuffer(j.at("snapshot_capacity").get<std::size_t>());
    for (const auto& snap : j.at("snapshots"))
      s.snapshots.push(snap.at("t").get<int>(), vec_from(snap.at("losses")));
    for (const auto& p : j.at("risk_trace"))
      s.risk_trace.push_back({p.at("t").get<int>(), optional_from(p.at("inlier")),
                              optional_from(p.at("outlier"))});
    s.objective_history = j.at("objective_history").get<std::vector<double>>();
    s.rng = rng_from(j.at("rng").get<std::string>());
    s.diagnostics_rng = rng_from(j.at("diagnostics_rng").get<std::string>());
    s.failure = j.at("failure").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

Trainer restore_trainer(Checkpoint checkpoint, Eigen::MatrixXd train,
                        std::optional<std::vector<int>> ground_truth) {
  return Trainer(std::move(checkpoint.config), std::move(train), std::move(ground_truth),
                 std::move(checkpoint.state));
}

}  // namespace imboost
