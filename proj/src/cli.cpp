#include "imboost/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "imboost/dataset.hpp"
#include "imboost/errors.hpp"
#include "imboost/experiment.hpp"
#include "imboost/metrics.hpp"
#include "imboost/service.hpp"

namespace imboost {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FlagKind { kNumber, kString, kBool, kIntList };

struct ConfigFlag {
  const char* flag;
  const char* key;
  FlagKind kind;
  const char* help;
};

constexpr ConfigFlag kConfigFlags[] = {
    {"--n0", "n0", FlagKind::kNumber, "initial batch size"},
    {"--gamma", "gamma", FlagKind::kNumber, "batch growth factor"},
    {"--t0", "t0", FlagKind::kNumber, "plain warm-up iterations"},
    {"--t1", "t1", FlagKind::kNumber, "trimmed warm-up iterations"},
    {"--t2", "t2", FlagKind::kNumber, "polarization iterations"},
    {"--ta", "ta", FlagKind::kNumber, "query rounds"},
    {"--score-mc", "score_mc", FlagKind::kNumber, "noise draws averaged for final scores"},
    {"--lr", "lr", FlagKind::kNumber, "Adam learning rate"},
    {"--lambda1", "lambda1", FlagKind::kNumber, "weight of the labeled-inlier term"},
    {"--lambda2", "lambda2", FlagKind::kNumber, "weight of the labeled-outlier term"},
    {"--rho", "rho", FlagKind::kNumber, "trimming quantile"},
    {"--xi", "xi", FlagKind::kNumber, "adaptive threshold mixing weight"},
    {"--lambda-schedule", "lambda_schedule", FlagKind::kString, "constant | decay"},
    {"--alpha", "alpha", FlagKind::kNumber, "posterior target of the mm strategy"},
    {"--strategy", "strategy", FlagKind::kString, "rd | cp | mm"},
    {"--budget-mode", "budget_mode", FlagKind::kString, "per-round | total"},
    {"--budget-per-round", "budget_per_round", FlagKind::kNumber, "queries per round"},
    {"--trace-warmup", "trace_warmup", FlagKind::kBool, "trace risks during warm-up"},
    {"--unit", "unit", FlagKind::kString, "step | epoch"},
    {"--latent-dim", "latent_dim", FlagKind::kNumber, "latent size"},
    {"--hidden", "hidden", FlagKind::kIntList, "hidden widths, e.g. 64,64"},
    {"--iwae-samples", "iwae_samples", FlagKind::kNumber, "importance samples K"},
    {"--test-fraction", "test_fraction", FlagKind::kNumber, "held-out share"},
    {"--oracle", "oracle", FlagKind::kString, "simulated | human"},
};

/// Config file plus per-field flag overrides.
struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file; flags override it")
        ->check(CLI::ExistingFile);
    for (const auto& f : kConfigFlags) app->add_option(f.flag, values[f.key], f.help);
  }

  json resolve(const CLI::App* app) const {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw UsageError("cannot parse " + config_path + ": " + e.what());
      }
      if (!j.is_object()) throw UsageError(config_path + " must hold a JSON object");
    }
    for (const auto& f : kConfigFlags) {
      if (app->count(f.flag) == 0) continue;
      const std::string& v = values.at(f.key);
      j[f.key] = flag_value(f, v);
    }
    return j;
  }

  static json flag_value(const ConfigFlag& f, const std::string& v) {
    switch (f.kind) {
      case FlagKind::kString:
        return v;
      case FlagKind::kBool:
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw UsageError(std::string(f.flag) + " expects true or false");
      case FlagKind::kIntList: {
        json list = json::array();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            list.push_back(std::stoi(item));
          } catch (const std::exception&) {
            throw UsageError(std::string(f.flag) + " expects comma-separated integers");
          }
        }
        return list;
      }
      case FlagKind::kNumber:
        break;
    }
    json n;
    try {
      n = json::parse(v);
    } catch (const json::exception&) {
    }
    if (!n.is_number()) throw UsageError(std::string(f.flag) + " expects a number, got " + v);
    return n;
  }
};

RunConfig config_from(const json& j) {
  try {
    return run_config_from_json(j);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::string> csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      c.erase(0, c.find_first_not_of(" \t\r\""));
      c.erase(c.find_last_not_of(" \t\r\"") + 1);
      cols.push_back(c);
    }
    return cols;
  }
  return {};
}

/// Loads a CSV, taking labels from `label_column` when the header has it.
Dataset load_dataset(const std::string& path, const std::string& label_column) {
  const auto header = csv_header(path);
  const bool labeled = std::find(header.begin(), header.end(), label_column) != header.end();
  Dataset d = load_csv(path, labeled ? std::optional<std::string>(label_column) : std::nullopt);
  d.name = fs::path(path).stem().string();
  return d;
}

struct DataSource {
  std::string data;
  std::string synthetic;
  std::string label_column = "label";

  void attach(CLI::App* app) {
    auto* d = app->add_option("--data", data, "CSV file with a header row");
    auto* s = app->add_option("--synthetic", synthetic, "synthetic spec: default | ambiguous | key=value,...");
    d->excludes(s);
    app->add_option("--label-column", label_column, "name of the 0/1 label column");
  }

  Dataset load() const {
    if (data.empty() == synthetic.empty()) throw UsageError("give exactly one of --data or --synthetic");
    if (!data.empty()) return load_dataset(data, label_column);
    SyntheticSpec spec;
    try {
      spec = SyntheticSpec::parse(synthetic);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    Dataset d = make_synthetic(spec);
    d.name = "synthetic:" + synthetic;
    return d;
  }
};

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

void write_artifacts(const RunResult& r, const fs::path& dir, std::ostream& out) {
  fs::create_directories(dir);
  write_scores_csv(r, (dir / "scores.csv").string());
  std::ofstream m(dir / "metrics.json");
  if (!m) throw std::runtime_error("cannot write " + (dir / "metrics.json").string());
  m << std::setprecision(17) << metrics_json(r).dump(2) << '\n';
  out << "dataset=" << r.dataset << " seed=" << r.seed
      << " strategy=" << to_string(r.config.trainer.strategy);
  if (r.test_metrics) out << " auc_test=" << fmt(r.test_metrics->auc) << " ap_test=" << fmt(r.test_metrics->ap);
  out << " labeled=" << r.labeled_inliers << "/" << r.labeled_outliers << " -> " << dir.string() << '\n';
}

std::vector<std::uint64_t> seed_list(int count, std::uint64_t first) {
  if (count < 1) throw UsageError("--seeds must be at least 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(first + static_cast<std::uint64_t>(i));
  return seeds;
}

struct RunArgs {
  DataSource source;
  ConfigOptions config;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool serve = false;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string state_dir;
};

int cmd_run(const RunArgs& a, const CLI::App* app, std::ostream& out, std::ostream& err) {
  const RunConfig config = config_from(a.config.resolve(app));
  if (config.oracle == "human" && !a.serve) throw UsageError("a human oracle needs --serve");
  if (config.oracle == "simulated" && a.serve) throw UsageError("--serve is for a human oracle");
  const Dataset raw = a.source.load();
  if (config.oracle == "simulated" && !raw.labels)
    throw UsageError("a simulated oracle needs the label column '" + a.source.label_column + "'");

  if (config.oracle == "simulated") {
    write_artifacts(run_experiment(raw, config, a.seed), a.out_dir, out);
    return kExitOk;
  }

  std::optional<fs::path> state_dir;
  if (!a.state_dir.empty()) state_dir = a.state_dir;
  SessionManager sessions(state_dir);
  HttpService http(sessions);
  const int port = http.bind(a.host, a.port);
  if (port < 0) {
    err << "cannot bind " << a.host << ":" << a.port << '\n';
    return kExitFailure;
  }
  const std::string id = sessions.start(raw, config, a.seed);
  out << "session " << id << " at http://" << a.host << ":" << port << "/v1/sessions/" << id
      << std::endl;
  std::thread server([&] { http.serve(); });
  std::optional<Phase> phase;
  auto finished = [](Phase p) { return p == Phase::kDone || p == Phase::kFailed; };
  while (!(phase && finished(*phase))) phase = sessions.wait_for(id, finished, std::chrono::seconds(1));
  http.stop();
  server.join();
  const auto result = sessions.result(id);
  if (*phase == Phase::kFailed || !result) {
    err << "session failed: " << sessions.state(id).body.value("failure", json()).dump() << '\n';
    return kExitFailure;
  }
  write_artifacts(*result, a.out_dir, out);
  return kExitOk;
}

struct BenchArgs {
  std::string data_dir;
  std::string label_column = "label";
  ConfigOptions config;
  int seeds = 3;
  std::uint64_t first_seed = 1;
  std::string out_path;
};

int cmd_bench(const BenchArgs& a, const CLI::App* app, std::ostream& out) {
  const RunConfig config = config_from(a.config.resolve(app));
  if (config.oracle != "simulated") throw UsageError("bench needs the simulated oracle");
  if (!fs::is_directory(a.data_dir)) throw UsageError(a.data_dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.data_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no .csv files in " + a.data_dir);
  const auto seeds = seed_list(a.seeds, a.first_seed);

  std::ostringstream table;
  table << "# config: " << to_json(config).dump() << '\n';
  table << "# seeds:";
  for (auto s : seeds) table << ' ' << s;
  table << '\n';
  table << "dataset,seed,round,split,auc,ap,auc_std,ap_std,note\n";
  std::vector<double> dataset_means_auc, dataset_means_ap;
  for (const auto& file : files) {
    const std::string name = file.stem().string();
    Dataset raw;
    try {
      raw = load_dataset(file.string(), a.label_column);
      if (!raw.labels) throw std::runtime_error("no label column '" + a.label_column + "'");
    } catch (const std::exception& e) {
      std::string note = e.what();
      std::replace(note.begin(), note.end(), ',', ';');
      table << name << ",,,,,,,,skipped: " << note << '\n';
      continue;
    }
    std::vector<double> aucs, aps;
    std::string failure;
    for (auto seed : seeds) {
      RunResult r;
      try {
        r = run_experiment(raw, config, seed);
      } catch (const std::exception& e) {
        failure = e.what();
        std::replace(failure.begin(), failure.end(), ',', ';');
        table << name << ',' << seed << ",,,,,,,failed: " << failure << '\n';
        continue;
      }
      for (const auto& m : r.per_round)
        table << name << ',' << seed << ',' << m.round << ",test," << fmt(m.auc_test) << ','
              << fmt(m.ap_test) << ",,,\n";
      if (r.test_metrics) {
        aucs.push_back(r.test_metrics->auc);
        aps.push_back(r.test_metrics->ap);
      }
    }
    if (aucs.empty()) continue;
    const MeanStd auc = mean_std(aucs);
    const MeanStd ap = mean_std(aps);
    dataset_means_auc.push_back(auc.mean);
    dataset_means_ap.push_back(ap.mean);
    table << name << ",mean," << config.trainer.rounds << ",test," << fmt(auc.mean) << ','
          << fmt(ap.mean) << ',' << fmt(aucs.size() > 1 ? auc.stddev : std::nan("")) << ','
          << fmt(aps.size() > 1 ? ap.stddev : std::nan("")) << ",aggregate over " << aucs.size()
          << " seeds\n";
  }
  if (dataset_means_auc.size() > 1) {
    const MeanStd auc = mean_std(dataset_means_auc);
    const MeanStd ap = mean_std(dataset_means_ap);
    table << "ALL,mean," << config.trainer.rounds << ",test," << fmt(auc.mean) << ','
          << fmt(ap.mean) << ',' << fmt(auc.stddev) << ',' << fmt(ap.stddev)
          << ",average over " << dataset_means_auc.size() << " datasets\n";
  }
  out << table.str();
  if (!a.out_path.empty()) {
    std::ofstream f(a.out_path);
    if (!f) throw std::runtime_error("cannot write " + a.out_path);
    f << table.str();
  }
  return kExitOk;
}

struct SweepArgs {
  DataSource source;
  ConfigOptions config;
  std::vector<std::string> grid;
  int seeds = 5;
  std::uint64_t first_seed = 1;
  std::string out_path;
};

int cmd_sweep(const SweepArgs& a, const CLI::App* app, std::ostream& out) {
  if (a.grid.size() != 1) throw UsageError("a sweep varies exactly one parameter (--grid name=v1,v2,...)");
  const std::string& spec = a.grid.front();
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--grid expects name=v1,v2,...");
  std::string param = spec.substr(0, eq);
  std::replace(param.begin(), param.end(), '-', '_');
  if (param.find_first_of(";& ") != std::string::npos) throw UsageError("a sweep varies exactly one parameter");
  std::vector<json> values;
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find('=') != std::string::npos)
      throw UsageError("a sweep varies exactly one parameter");
    json v;
    try {
      v = json::parse(item);
    } catch (const json::exception&) {
      v = item;
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("--grid has no values");

  const json base = a.config.resolve(app);
  std::vector<RunConfig> configs;
  for (const auto& v : values) {
    json j = base;
    j[param] = v;
    configs.push_back(config_from(j));
  }
  for (const auto& c : configs)
    if (c.oracle != "simulated") throw UsageError("sweep needs the simulated oracle");
  const Dataset raw = a.source.load();
  if (!raw.labels) throw UsageError("sweep needs a label column");
  const auto seeds = seed_list(a.seeds, a.first_seed);

  std::ostringstream table;
  table << "# config: " << to_json(config_from(base)).dump() << '\n';
  table << "# grid: " << param << '\n';
  table << "param,value,seed,auc_test,ap_test,auc_train,ap_train\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (auto seed : seeds) {
      const RunResult r = run_experiment(raw, configs[i], seed);
      auto get = [](const std::optional<EvalReport>& e, double EvalReport::*f) {
        return e ? fmt((*e).*f) : std::string();
      };
      table << param << ',' << values[i].dump() << ',' << seed << ','
            << get(r.test_metrics, &EvalReport::auc) << ',' << get(r.test_metrics, &EvalReport::ap)
            << ',' << get(r.train_metrics, &EvalReport::auc) << ','
            << get(r.train_metrics, &EvalReport::ap) << '\n';
    }
  }
  out << table.str();
  if (!a.out_path.empty()) {
    std::ofstream f(a.out_path);
    if (!f) throw std::runtime_error("cannot write " + a.out_path);
    f << table.str();
  }
  return kExitOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string state_dir;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<fs::path> state_dir;
  if (!a.state_dir.empty()) state_dir = a.state_dir;
  SessionManager sessions(state_dir);
  HttpService http(sessions);
  const int port = http.bind(a.host, a.port);
  if (port < 0) {
    err << "cannot bind " << a.host << ":" << a.port << '\n';
    return kExitFailure;
  }
  out << "listening on http://" << a.host << ":" << port << "/v1" << std::endl;
  http.serve();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active outlier detection with an importance-weighted VAE", "imboost"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "train once and write scores.csv and metrics.json");
  run.source.attach(run_cmd);
  run.config.attach(run_cmd);
  run_cmd->add_option("--seed", run.seed, "run seed");
  run_cmd->add_option("--out", run.out_dir, "output directory");
  run_cmd->add_flag("--serve", run.serve, "serve the session over HTTP for a human oracle");
  run_cmd->add_option("--host", run.host, "bind address for --serve");
  run_cmd->add_option("--port", run.port, "port for --serve (0 picks one)");
  run_cmd->add_option("--state-dir", run.state_dir, "session checkpoint directory for --serve");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "run every labeled CSV in a directory over several seeds");
  bench_cmd->add_option("--data-dir", bench.data_dir, "directory of CSV files")->required();
  bench_cmd->add_option("--label-column", bench.label_column, "name of the 0/1 label column");
  bench.config.attach(bench_cmd);
  bench_cmd->add_option("--seeds", bench.seeds, "number of seeds");
  bench_cmd->add_option("--first-seed", bench.first_seed, "first seed");
  bench_cmd->add_option("--out", bench.out_path, "also write the table to this file");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "vary one parameter over a grid");
  sweep.source.attach(sweep_cmd);
  sweep.config.attach(sweep_cmd);
  sweep_cmd->add_option("--grid", sweep.grid, "name=v1,v2,... (exactly one)")->required();
  sweep_cmd->add_option("--seeds", sweep.seeds, "number of seeds");
  sweep_cmd->add_option("--first-seed", sweep.first_seed, "first seed");
  sweep_cmd->add_option("--out", sweep.out_path, "also write the table to this file");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "start the labeling service");
  serve_cmd->add_option("--host", serve.host, "bind address");
  serve_cmd->add_option("--port", serve.port, "port (0 picks one)");
  serve_cmd->add_option("--state-dir", serve.state_dir, "session checkpoint directory");

  std::vector<std::string> argv_store{"imboost"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run, run_cmd, out, err);
    if (bench_cmd->parsed()) return cmd_bench(bench, bench_cmd, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, sweep_cmd, out);
    if (serve_cmd->parsed()) return cmd_serve(serve, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace imboost
