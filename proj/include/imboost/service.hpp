#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "imboost/dataset.hpp"
#include "imboost/experiment.hpp"
#include "imboost/trainer.hpp"

namespace imboost {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct Session;

/// Owns training sessions, each driven by its own worker thread. Every method
/// reads or updates a published snapshot and never waits on a training step.
class SessionManager {
 public:
  /// With `state_dir`, sessions are checkpointed there and restored on construction.
  explicit SessionManager(std::optional<std::filesystem::path> state_dir = {});
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  /// JSON body: {"synthetic": spec} or {"csv": text, "label_column": name},
  /// plus optional "config", "seed" and "name". Oracle defaults to human.
  ApiResponse create(const nlohmann::json& body);
  /// Raw CSV upload; `options` carries the remaining create fields.
  ApiResponse create_from_csv(const std::string& csv, const nlohmann::json& options);
  /// Starts a session over an unsplit dataset and returns its id.
  /// `initial_state` receives the summary taken before training begins.
  std::string start(Dataset raw, RunConfig config, std::uint64_t seed,
                    nlohmann::json* initial_state = nullptr);

  ApiResponse list() const;
  ApiResponse state(const std::string& id) const;
  ApiResponse queries(const std::string& id) const;
  /// Body: {"labels": [{"index": i, "label": "inlier"|"outlier"}], "skip": [i, ...]}.
  ApiResponse post_labels(const std::string& id, const std::string& body);
  ApiResponse scores(const std::string& id) const;

  /// Blocks the caller until the published phase satisfies `done` or the timeout
  /// passes. Returns the last published phase; nullopt for an unknown id.
  std::optional<Phase> wait_for(const std::string& id, const std::function<bool(Phase)>& done,
                                std::chrono::milliseconds timeout) const;
  /// Final result once the session is DONE.
  std::optional<RunResult> result(const std::string& id) const;

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  void restore_all();
  std::string new_id();

  std::optional<std::filesystem::path> state_dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_counter_ = 0;
};

/// HTTP front end for a SessionManager under /v1.
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace imboost
