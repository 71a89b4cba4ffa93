#include "imboost/service.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "imboost/checkpoint.hpp"
#include "imboost/errors.hpp"

namespace imboost {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ApiResponse error(int status, const std::string& message) { return {status, {{"error", message}}}; }

struct LabelMessage {
  std::vector<OracleAnswer> answers;
  std::vector<std::size_t> skips;
};

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json row_json(const Eigen::MatrixXd& m, Eigen::Index row) {
  json out = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(row, c));
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

}  // namespace

struct Session {
  std::string id;
  RunConfig config;
  std::uint64_t seed = 0;
  Dataset data;  // split and normalized
  std::optional<fs::path> dir;

  // Worker-owned.
  std::unique_ptr<Trainer> trainer;
  std::vector<RoundMetrics> per_round;

  // Guarded by mu.
  mutable std::mutex mu;
  mutable std::condition_variable cv;
  Phase phase = Phase::kWarmup;
  int t = 0;
  int steps_done = 0;
  int rounds_done = 0;
  std::vector<PendingQuery> pending;
  std::set<std::size_t> labeled;
  std::optional<Eigen::VectorXd> ensemble;
  std::optional<RunResult> result;
  std::string failure;
  std::deque<LabelMessage> inbox;
  bool stop = false;

  std::thread worker;
  std::string worker_error;  // worker-owned

  void publish() {
    const TrainerState& s = trainer->state();
    std::lock_guard lock(mu);
    phase = s.phase;
    // Answers queued but not yet applied stay hidden from readers.
    if (phase == Phase::kAwaitingLabels && !inbox.empty()) {
      phase = pending.empty() ? Phase::kPolarizing : Phase::kAwaitingLabels;
    } else {
      pending = s.pending;
    }
    t = trainer->current_t();
    steps_done = s.steps_done;
    rounds_done = s.rounds_done;
    failure = s.failure;
    if (!worker_error.empty()) {
      phase = Phase::kFailed;
      if (failure.empty()) failure = worker_error;
      pending.clear();
    }
    labeled.clear();
    labeled.insert(s.labels.inliers().begin(), s.labels.inliers().end());
    labeled.insert(s.labels.outliers().begin(), s.labels.outliers().end());
    cv.notify_all();
  }

  void persist() const {
    if (!dir) return;
    save_checkpoint(*trainer, (*dir / "checkpoint.json").string());
    auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    json rounds = json::array();
    for (const auto& m : per_round)
      rounds.push_back({m.round, num(m.auc_train), num(m.ap_train), num(m.auc_test), num(m.ap_test)});
    json meta = {{"id", id},
                 {"seed", seed},
                 {"name", data.name},
                 {"has_labels", data.labels.has_value()},
                 {"config", to_json(config)},
                 {"per_round", rounds}};
    write_file_atomic(*dir / "session.json", meta.dump(2));
  }

  void run() {
    std::optional<SimulatedOracle> oracle;
    if (config.oracle == "simulated") oracle.emplace(data.gather_labels(data.train_idx));
    publish();
    for (;;) {
      std::deque<LabelMessage> batch;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] {
          return stop || !inbox.empty() || trainer->phase() != Phase::kAwaitingLabels || oracle;
        });
        if (stop) return;
        batch.swap(inbox);
      }
      for (const auto& msg : batch) {
        try {
          if (!msg.answers.empty()) trainer->deliver(msg.answers);
          if (!msg.skips.empty()) trainer->skip(msg.skips);
        } catch (const std::exception&) {
          // Messages are validated against the published snapshot before queueing.
        }
      }
      if (!batch.empty()) {
        publish();
        persist_quietly();
      }
      const Phase p = trainer->phase();
      if (p == Phase::kDone || p == Phase::kFailed) break;
      try {
        if (p == Phase::kAwaitingLabels) {
          if (oracle) deliver_simulated(*oracle);
          continue;
        }
        trainer->step();
      } catch (const std::exception& e) {
        worker_error = e.what();
        break;
      }
      if (trainer->phase() == Phase::kAwaitingLabels) {
        Eigen::VectorXd ens = trainer->ensemble();
        {
          std::lock_guard lock(mu);
          ensemble = std::move(ens);
        }
        publish();
        persist_quietly();
      } else {
        publish();
      }
    }
    finalize();
  }

  void deliver_simulated(SimulatedOracle& oracle) {
    std::vector<std::size_t> idx;
    for (const auto& q : trainer->state().pending) idx.push_back(q.index);
    const std::vector<OracleAnswer> answers = oracle.answer(idx);
    trainer->deliver(answers);
    publish();
  }

  void persist_quietly() {
    try {
      persist();
    } catch (const std::exception&) {
      // Persistence is best effort; the in-memory session stays authoritative.
    }
  }

  void finalize() {
    std::optional<RunResult> r;
    if (trainer->phase() == Phase::kDone) {
      r = collect_result(*trainer, data, config, seed);
      r->per_round = per_round;
    }
    persist_quietly();
    {
      std::lock_guard lock(mu);
      result = std::move(r);
    }
    publish();
  }

  json summary() const {
    std::lock_guard lock(mu);
    return {{"id", id},
            {"phase", to_string(phase)},
            {"t", t},
            {"steps_done", steps_done},
            {"total_steps", config.trainer.t0 + config.trainer.t1 + config.trainer.t2},
            {"round", rounds_done},
            {"rounds", config.trainer.rounds},
            {"pending", pending.size()},
            {"labeled", labeled.size()},
            {"n_train", data.train_idx.size()},
            {"n_test", data.test_idx.size()},
            {"dataset", data.name},
            {"seed", seed},
            {"oracle", config.oracle},
            {"failure", failure.empty() ? json(nullptr) : json(failure)}};
  }
};

SessionManager::SessionManager(std::optional<fs::path> state_dir) : state_dir_(std::move(state_dir)) {
  if (state_dir_) {
    fs::create_directories(*state_dir_);
    restore_all();
  }
}

SessionManager::~SessionManager() {
  std::lock_guard lock(mu_);
  for (auto& [id, s] : sessions_) {
    {
      std::lock_guard slock(s->mu);
      s->stop = true;
    }
    s->cv.notify_all();
  }
  for (auto& [id, s] : sessions_)
    if (s->worker.joinable()) s->worker.join();
}

std::string SessionManager::new_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream os;
  os << std::hex << rng() << '-' << ++id_counter_;
  return os.str();
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::string SessionManager::start(Dataset raw, RunConfig config, std::uint64_t seed,
                                  json* initial_state) {
  config.trainer.seed = seed;
  config.validate();
  if (config.oracle == "simulated" && !raw.labels)
    throw std::invalid_argument("a simulated oracle needs a label column");
  auto s = std::make_shared<Session>();
  s->config = config;
  s->seed = seed;
  s->data = split_and_normalize(raw, config.test_fraction, seed);
  std::optional<std::vector<int>> truth;
  if (s->data.labels) truth = s->data.gather_labels(s->data.train_idx);
  s->trainer = std::make_unique<Trainer>(config.trainer,
                                         config.model_spec(static_cast<int>(s->data.cols())),
                                         s->data.train_features(), truth);
  s->trainer->set_round_hook(round_metrics_hook(s->data, s->per_round));

  std::lock_guard lock(mu_);
  s->id = new_id();
  if (state_dir_) {
    s->dir = *state_dir_ / s->id;
    fs::create_directories(*s->dir);
    write_csv(raw, (*s->dir / "dataset.csv").string());
    s->persist_quietly();
  }
  if (initial_state) *initial_state = s->summary();
  s->worker = std::thread([s] { s->run(); });
  sessions_.emplace(s->id, s);
  return s->id;
}

void SessionManager::restore_all() {
  for (const auto& entry : fs::directory_iterator(*state_dir_)) {
    if (!entry.is_directory()) continue;
    const fs::path dir = entry.path();
    if (!fs::exists(dir / "session.json") || !fs::exists(dir / "dataset.csv")) continue;
    try {
      const json meta = json::parse(read_file(dir / "session.json"));
      auto s = std::make_shared<Session>();
      s->id = meta.at("id").get<std::string>();
      s->seed = meta.at("seed").get<std::uint64_t>();
      s->config = run_config_from_json(meta.at("config"));
      std::optional<std::string> label_column;
      if (meta.value("has_labels", false)) label_column = "label";
      Dataset raw = load_csv((dir / "dataset.csv").string(), label_column);
      raw.name = meta.value("name", raw.name);
      s->data = split_and_normalize(raw, s->config.test_fraction, s->seed);
      auto num = [](const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
      for (const auto& r : meta.at("per_round"))
        s->per_round.push_back({r[0].get<int>(), num(r[1]), num(r[2]), num(r[3]), num(r[4])});
      std::optional<std::vector<int>> truth;
      if (s->data.labels) truth = s->data.gather_labels(s->data.train_idx);
      if (fs::exists(dir / "checkpoint.json")) {
        s->trainer = std::make_unique<Trainer>(restore_trainer(
            load_checkpoint((dir / "checkpoint.json").string()), s->data.train_features(), truth));
      } else {
        s->trainer = std::make_unique<Trainer>(
            s->config.trainer, s->config.model_spec(static_cast<int>(s->data.cols())),
            s->data.train_features(), truth);
      }
      s->trainer->set_round_hook(round_metrics_hook(s->data, s->per_round));
      if (s->trainer->phase() == Phase::kAwaitingLabels && !s->trainer->state().snapshots.snapshots().empty())
        s->ensemble = s->trainer->ensemble();
      s->dir = dir;
      s->worker = std::thread([s] { s->run(); });
      std::lock_guard lock(mu_);
      sessions_.emplace(s->id, s);
    } catch (const std::exception&) {
      // A damaged session directory is left on disk and ignored.
    }
  }
}

namespace {

Dataset dataset_from_request(const json& body) {
  const std::string name = body.value("name", std::string());
  if (body.contains("synthetic")) {
    SyntheticSpec spec = SyntheticSpec::parse(body.at("synthetic").get<std::string>());
    if (body.contains("synthetic_seed")) spec.seed = body.at("synthetic_seed").get<std::uint64_t>();
    Dataset d = make_synthetic(spec);
    if (!name.empty()) d.name = name;
    return d;
  }
  if (body.contains("csv")) {
    std::optional<std::string> label_column;
    if (body.contains("label_column") && !body.at("label_column").is_null())
      label_column = body.at("label_column").get<std::string>();
    Dataset d = parse_csv(body.at("csv").get<std::string>(), label_column);
    d.name = name.empty() ? "upload" : name;
    return d;
  }
  throw std::invalid_argument("body needs a \"synthetic\" spec or a \"csv\" text");
}

}  // namespace

ApiResponse SessionManager::create(const json& body) {
  if (!body.is_object()) return error(400, "body must be a JSON object");
  try {
    json config_json = body.value("config", json::object());
    if (!config_json.is_object()) return error(400, "config must be an object");
    if (!config_json.contains("oracle")) config_json["oracle"] = "human";
    RunConfig config = run_config_from_json(config_json);
    const std::uint64_t seed = body.value("seed", std::uint64_t{0});
    Dataset raw = dataset_from_request(body);
    json initial;
    start(std::move(raw), std::move(config), seed, &initial);
    return {201, initial};
  } catch (const std::exception& e) {
    return error(400, e.what());
  }
}

ApiResponse SessionManager::create_from_csv(const std::string& csv, const json& options) {
  json body = options.is_object() ? options : json::object();
  body["csv"] = csv;
  return create(body);
}

ApiResponse SessionManager::list() const {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  json out = json::array();
  for (const auto& s : all) out.push_back(s->summary());
  return {200, {{"sessions", out}}};
}

ApiResponse SessionManager::state(const std::string& id) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  return {200, s->summary()};
}

ApiResponse SessionManager::queries(const std::string& id) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  std::lock_guard lock(s->mu);
  if (s->pending.empty()) return error(404, "no pending queries");
  json items = json::array();
  for (const auto& q : s->pending) {
    const std::size_t row = s->data.train_idx[q.index];
    json item = {{"index", q.index},
                 {"row_index", row},
                 {"features", row_json(s->data.features, static_cast<Eigen::Index>(row))},
                 {"ensemble_loss", q.ensemble_loss},
                 {"posterior_inlier",
                  q.posterior_inlier ? json(*q.posterior_inlier) : json(nullptr)}};
    if (s->data.raw_features.rows() == s->data.features.rows())
      item["raw_features"] = row_json(s->data.raw_features, static_cast<Eigen::Index>(row));
    items.push_back(std::move(item));
  }
  return {200,
          {{"round", s->rounds_done},
           {"feature_names", s->data.feature_names},
           {"queries", items}}};
}

ApiResponse SessionManager::post_labels(const std::string& id, const std::string& body) {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  LabelMessage msg;
  try {
    const json j = json::parse(body);
    if (!j.is_object()) return error(400, "body must be a JSON object");
    for (const auto& key : j.items())
      if (key.key() != "labels" && key.key() != "skip")
        return error(400, "unknown field " + key.key());
    if (j.contains("labels")) {
      if (!j.at("labels").is_array()) return error(400, "labels must be an array");
      for (const auto& item : j.at("labels")) {
        if (!item.is_object() || !item.contains("index") || !item.contains("label") ||
            !item.at("index").is_number_unsigned() || !item.at("label").is_string())
          return error(400, "each label needs a non-negative index and a label string");
        const std::string name = item.at("label").get<std::string>();
        if (name != "inlier" && name != "outlier")
          return error(400, "label must be inlier or outlier, got " + name);
        msg.answers.push_back({item.at("index").get<std::size_t>(), parse_label(name)});
      }
    }
    if (j.contains("skip")) {
      if (!j.at("skip").is_array()) return error(400, "skip must be an array");
      for (const auto& v : j.at("skip")) {
        if (!v.is_number_unsigned()) return error(400, "skip holds non-negative indices");
        msg.skips.push_back(v.get<std::size_t>());
      }
    }
  } catch (const json::exception& e) {
    return error(400, std::string("malformed body: ") + e.what());
  }
  if (msg.answers.empty() && msg.skips.empty()) return error(400, "no labels given");

  std::set<std::size_t> seen;
  for (const auto& a : msg.answers)
    if (!seen.insert(a.index).second) return error(400, "index repeated in one request");
  for (auto i : msg.skips)
    if (!seen.insert(i).second) return error(400, "index repeated in one request");

  std::size_t remaining = 0;
  Phase phase;
  {
    std::lock_guard lock(s->mu);
    auto is_pending = [&](std::size_t i) {
      return std::any_of(s->pending.begin(), s->pending.end(),
                         [&](const PendingQuery& q) { return q.index == i; });
    };
    for (auto i : seen) {
      if (s->labeled.count(i)) return error(409, "index " + std::to_string(i) + " is already labeled");
      if (!is_pending(i)) return error(409, "index " + std::to_string(i) + " is not pending");
    }
    std::erase_if(s->pending, [&](const PendingQuery& q) { return seen.count(q.index) > 0; });
    for (const auto& a : msg.answers) s->labeled.insert(a.index);
    if (s->pending.empty()) s->phase = Phase::kPolarizing;
    remaining = s->pending.size();
    phase = s->phase;
    s->inbox.push_back(std::move(msg));
  }
  s->cv.notify_all();
  return {200, {{"accepted", seen.size()}, {"remaining", remaining}, {"phase", to_string(phase)}}};
}

ApiResponse SessionManager::scores(const std::string& id) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  std::lock_guard lock(s->mu);
  json out = {{"phase", to_string(s->phase)}, {"train_index", s->data.train_idx}};
  if (s->result) {
    const RunResult& r = *s->result;
    out["kind"] = "final";
    out["train_scores"] = vector_json(r.train_scores);
    out["test_index"] = s->data.test_idx;
    out["test_scores"] = vector_json(r.test_scores);
    if (r.train_metrics || r.test_metrics) out["metrics"] = metrics_json(r);
  } else if (s->ensemble) {
    out["kind"] = "ensemble";
    out["train_scores"] = vector_json(*s->ensemble);
  } else {
    out["kind"] = "none";
  }
  return {200, out};
}

std::optional<Phase> SessionManager::wait_for(const std::string& id,
                                              const std::function<bool(Phase)>& done,
                                              std::chrono::milliseconds timeout) const {
  auto s = find(id);
  if (!s) return std::nullopt;
  std::unique_lock lock(s->mu);
  s->cv.wait_for(lock, timeout, [&] {
    const bool finished = s->phase == Phase::kDone || s->phase == Phase::kFailed;
    // A DONE phase is published before the final result lands.
    return done(s->phase) && (!finished || s->result || s->phase == Phase::kFailed);
  });
  return s->phase;
}

std::optional<RunResult> SessionManager::result(const std::string& id) const {
  auto s = find(id);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mu);
  return s->result;
}

struct HttpService::Impl {
  SessionManager& sessions;
  httplib::Server server;
  explicit Impl(SessionManager& s) : sessions(s) {}
};

namespace {

void reply(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

json options_from_query(const httplib::Request& req) {
  json options = json::object();
  if (req.has_param("seed")) options["seed"] = std::stoull(req.get_param_value("seed"));
  if (req.has_param("label_column")) options["label_column"] = req.get_param_value("label_column");
  if (req.has_param("name")) options["name"] = req.get_param_value("name");
  if (req.has_param("config")) options["config"] = json::parse(req.get_param_value("config"));
  return options;
}

}  // namespace

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {
  auto& srv = impl_->server;
  SessionManager& mgr = impl_->sessions;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Post("/v1/sessions", [&mgr](const httplib::Request& req, httplib::Response& res) {
    try {
      if (req.is_multipart_form_data()) {
        if (!req.has_file("data")) return reply(res, error(400, "multipart upload needs a data part"));
        json options = options_from_query(req);
        for (const char* key : {"seed", "label_column", "name", "config"}) {
          if (!req.has_file(key)) continue;
          const std::string v = req.get_file_value(key).content;
          if (std::string(key) == "seed") options[key] = std::stoull(v);
          else if (std::string(key) == "config") options[key] = json::parse(v);
          else options[key] = v;
        }
        return reply(res, mgr.create_from_csv(req.get_file_value("data").content, options));
      }
      const std::string type = req.get_header_value("Content-Type");
      if (type.rfind("text/csv", 0) == 0)
        return reply(res, mgr.create_from_csv(req.body, options_from_query(req)));
      json body = json::parse(req.body);
      reply(res, mgr.create(body));
    } catch (const std::exception& e) {
      reply(res, error(400, std::string("malformed request: ") + e.what()));
    }
  });
  srv.Get("/v1/sessions", [&mgr](const httplib::Request&, httplib::Response& res) {
    reply(res, mgr.list());
  });
  srv.Get(R"(/v1/sessions/([^/]+))", [&mgr](const httplib::Request& req, httplib::Response& res) {
    reply(res, mgr.state(req.matches[1]));
  });
  srv.Get(R"(/v1/sessions/([^/]+)/queries)",
          [&mgr](const httplib::Request& req, httplib::Response& res) {
            reply(res, mgr.queries(req.matches[1]));
          });
  srv.Post(R"(/v1/sessions/([^/]+)/labels)",
           [&mgr](const httplib::Request& req, httplib::Response& res) {
             reply(res, mgr.post_labels(req.matches[1], req.body));
           });
  srv.Get(R"(/v1/sessions/([^/]+)/scores)",
          [&mgr](const httplib::Request& req, httplib::Response& res) {
            reply(res, mgr.scores(req.matches[1]));
          });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(json{{"error", "not found"}}.dump(), "application/json");
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpService::serve() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace imboost
