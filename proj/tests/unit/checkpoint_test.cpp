#include <filesystem>
#include <vector>

#include "doctest.h"

#include "imboost/checkpoint.hpp"
#include "imboost/dataset.hpp"
#include "imboost/errors.hpp"

using namespace imboost;
namespace fs = std::filesystem;

namespace {

struct Setup {
  Dataset data;
  Eigen::MatrixXd train;
  std::vector<int> truth;
  TrainerConfig config;
  ModelSpec spec;
};

Setup make_setup() {
  Setup s;
  s.data = split_and_normalize(make_synthetic(SyntheticSpec{.n = 300, .seed = 12}), 0.3, 12);
  s.train = s.data.train_features();
  s.truth = s.data.gather_labels(s.data.train_idx);
  s.config.n0 = 32;
  s.config.t0 = 2;
  s.config.t1 = 4;
  s.config.t2 = 10;
  s.config.score_mc = 2;
  s.config.seed = 12;
  s.config.strategy = QueryStrategy::kRandom;
  s.spec = ModelSpec::for_input(2);
  s.spec.encoder_hidden = {8, 8};
  s.spec.decoder_hidden = {8, 8};
  return s;
}

void answer_pending(Trainer& t, SimulatedOracle& oracle) {
  std::vector<std::size_t> idx;
  for (const auto& q : t.state().pending) idx.push_back(q.index);
  t.deliver(oracle.answer(idx));
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("suspend at a query round and resume to the same scores") {
  const Setup s = make_setup();
  SimulatedOracle oracle(s.truth);

  Trainer straight(s.config, s.spec, s.train, s.truth);
  straight.advance(&oracle);
  REQUIRE(straight.phase() == Phase::kDone);

  Trainer first(s.config, s.spec, s.train, s.truth);
  REQUIRE(first.advance(nullptr) == Phase::kAwaitingLabels);
  answer_pending(first, oracle);
  REQUIRE(first.advance(nullptr) == Phase::kAwaitingLabels);

  const fs::path path = fs::temp_directory_path() / "imboost_checkpoint_test.json";
  save_checkpoint(first, path.string());
  Trainer resumed = restore_trainer(load_checkpoint(path.string()), s.train, s.truth);
  fs::remove(path);
  CHECK(resumed.phase() == Phase::kAwaitingLabels);
  CHECK(resumed.state().pending.size() == first.state().pending.size());
  resumed.advance(&oracle);
  REQUIRE(resumed.phase() == Phase::kDone);

  CHECK((resumed.params().values().array() == straight.params().values().array()).all());
  const Eigen::VectorXd a = final_scores(resumed.params(), s.train, 4, 1);
  const Eigen::VectorXd b = final_scores(straight.params(), s.train, 4, 1);
  CHECK((a.array() == b.array()).all());
  CHECK(resumed.state().risk_trace.size() == straight.state().risk_trace.size());
}

TEST_CASE("json round trip preserves the state exactly") {
  const Setup s = make_setup();
  Trainer t(s.config, s.spec, s.train, s.truth);
  t.advance(nullptr);
  const nlohmann::json j = checkpoint_json(t);
  const Checkpoint c = checkpoint_from_json(nlohmann::json::parse(j.dump()));
  CHECK(c.state.params.values() == t.params().values());
  CHECK(c.state.adam.m == t.state().adam.m);
  CHECK(c.state.adam.v == t.state().adam.v);
  CHECK(c.state.adam.step_count == t.state().adam.step_count);
  CHECK(c.state.steps_done == t.state().steps_done);
  CHECK(c.state.snapshots.iterations() == t.state().snapshots.iterations());
  CHECK(c.state.reserved == t.state().reserved);
  CHECK(c.state.rng == t.state().rng);
  CHECK(c.state.diagnostics_rng == t.state().diagnostics_rng);
  CHECK(c.config.t2 == s.config.t2);
  CHECK(c.config.strategy == QueryStrategy::kRandom);
}

TEST_CASE("foreign or future files are rejected") {
  const Setup s = make_setup();
  Trainer t(s.config, s.spec, s.train, s.truth);
  nlohmann::json j = checkpoint_json(t);
  nlohmann::json wrong_tag = j;
  wrong_tag["format"] = "something-else";
  CHECK_THROWS_AS(checkpoint_from_json(wrong_tag), ParseError);
  nlohmann::json future = j;
  future["version"] = kCheckpointVersion + 1;
  CHECK_THROWS_AS(checkpoint_from_json(future), ParseError);
  CHECK_THROWS_AS(checkpoint_from_json(nlohmann::json::array()), ParseError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/checkpoint.json"), ParseError);
}

}  // TEST_SUITE
