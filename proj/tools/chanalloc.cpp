// Copyright 2026 The chanalloc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// chanalloc command-line tool.
//
//   chanalloc train | eval | reproduce <scenario> | gradcheck |
//             equivariance-check | dist-check | oracle
//
// Every subcommand takes --seed, --config <json> and --out <dir>. Without
// --out, results go under $CHANALLOC_OUT (default "runs") in a directory
// named after the subcommand. An existing non-empty output directory is an
// error unless --force is given.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 check failure,
// 3 experiment finished with failed jobs.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chanalloc/baselines.hpp"
#include "chanalloc/checks.hpp"
#include "chanalloc/harness.hpp"

namespace fs = std::filesystem;
using namespace chanalloc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kCheckFailed = 2, kPartial = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "run seed")->each([&c](const std::string&) { c.seed_set = true; });
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--out", c.out, "output directory");
  app->add_flag("--force", c.force, "reuse a non-empty output directory");
}

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

/// Resolves and claims the output directory.
fs::path prepare_out(const Common& c, const std::string& name) {
  fs::path dir = c.out;
  if (dir.empty()) {
    const char* root = std::getenv("CHANALLOC_OUT");
    dir = fs::path(root && *root ? root : "runs") / name;
  }
  if (fs::exists(dir) && !fs::is_empty(dir) && !c.force) {
    throw UsageError("output directory " + dir.string() + " exists and is not empty (use --force)");
  }
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw LoadError("cannot write " + p.string());
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Graph selection shared by train and eval.
struct GraphArgs {
  int n = 10;
  double q = 0.25;
  std::optional<std::uint64_t> graph_seed;
  bool colorable = false;
  std::string topology;
};

void add_graph(CLI::App* app, GraphArgs& g) {
  app->add_option("--n", g.n, "number of APs")->check(CLI::PositiveNumber);
  app->add_option("--q", g.q, "edge probability")->check(CLI::Range(0.0, 1.0));
  app->add_option("--graph-seed", g.graph_seed, "graph seed (default: --seed)");
  app->add_flag("--colorable", g.colorable, "resample until 4-colorable");
  app->add_option("--topology", g.topology, "topology JSON file (overrides --n/--q)");
}

Topology make_graph(const GraphArgs& g, std::uint64_t seed, int channels) {
  if (!g.topology.empty()) return topology_from_json(read_text(g.topology));
  return experiment_topology(g.n, g.q, g.graph_seed.value_or(seed), g.colorable, channels);
}

int report(const CheckReport& r, const Common& c, const std::string& name) {
  std::printf("%s: %s  cases=%d worst=%.6g tolerance=%.6g %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.cases, r.worst,
              r.tolerance, r.detail.c_str());
  if (!c.out.empty() || std::getenv("CHANALLOC_OUT")) {
    const fs::path dir = prepare_out(c, name);
    nlohmann::ordered_json j{{"check", r.name}, {"pass", r.pass}, {"cases", r.cases},
                             {"worst", r.worst}, {"tolerance", r.tolerance}, {"detail", r.detail}, {"seed", c.seed}};
    write_text(dir / "report.json", j.dump(2) + "\n");
  }
  return r.pass ? kOk : kCheckFailed;
}

template <typename T>
void override_from(const nlohmann::json& cfg, const char* field, T& value) {
  if (!cfg.contains(field)) return;
  try {
    value = cfg.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field ") + field + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel allocation with graph neural network policies"};
  app.require_subcommand(1);

  // train
  Common train_c;
  GraphArgs train_g;
  std::string policy = "gnn";
  std::optional<int> iterations, checkpoint_every;
  std::optional<std::string> objective;
  std::optional<double> step, init_gain;
  auto* train_cmd = app.add_subcommand("train", "train a policy on one graph");
  add_common(train_cmd, train_c);
  add_graph(train_cmd, train_g);
  train_cmd->add_option("--policy", policy, "gnn | dnn | relaxed")->check(CLI::IsMember({"gnn", "dnn", "relaxed"}));
  train_cmd->add_option("--iterations", iterations, "training iterations");
  train_cmd->add_option("--objective", objective, "mean | max")->check(CLI::IsMember({"mean", "max"}));
  train_cmd->add_option("--step", step, "optimizer step size");
  train_cmd->add_option("--checkpoint-every", checkpoint_every, "checkpoint period in iterations");
  train_cmd->add_option("--init-gain", init_gain, "scale of the GNN init bound")->check(CLI::PositiveNumber);

  // eval
  Common eval_c;
  GraphArgs eval_g;
  std::string checkpoint;
  int samples = 1000;
  bool sample_mode = false;
  std::optional<std::string> eval_objective;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a GNN checkpoint, or the random policy");
  add_common(eval_cmd, eval_c);
  add_graph(eval_cmd, eval_g);
  eval_cmd->add_option("--checkpoint", checkpoint, "GNN checkpoint (.cmgr); omit for the random policy");
  eval_cmd->add_option("--samples", samples, "demand samples")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--sample", sample_mode, "sample actions instead of taking the argmax");
  eval_cmd->add_option("--objective", eval_objective, "mean | max")->check(CLI::IsMember({"mean", "max"}));

  // reproduce
  Common repro_c;
  std::string scenario;
  int graphs = 10, workers = 0;
  auto* repro_cmd = app.add_subcommand("reproduce", "run a figure scenario over several graphs");
  add_common(repro_cmd, repro_c);
  repro_cmd->add_option("scenario", scenario, "scenario name")->required();
  repro_cmd->add_option("--graphs", graphs, "graphs (seeds) per grid point")->check(CLI::PositiveNumber);
  repro_cmd->add_option("--workers", workers, "worker threads (0: one per core)");

  // checks
  Common grad_c, equi_c, dist_c, oracle_c;
  int grad_instances = 20, equi_instances = 100, dist_instances = 50, oracle_instances = 1000;
  int dist_n = 0;
  double dist_q = -1.0;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the GNN backward pass");
  add_common(grad_cmd, grad_c);
  grad_cmd->add_option("--instances", grad_instances)->check(CLI::PositiveNumber);
  auto* equi_cmd = app.add_subcommand("equivariance-check", "permutation equivariance of the GNN");
  add_common(equi_cmd, equi_c);
  equi_cmd->add_option("--instances", equi_instances)->check(CLI::PositiveNumber);
  auto* dist_cmd = app.add_subcommand("dist-check", "decentralized vs centralized execution");
  add_common(dist_cmd, dist_c);
  dist_cmd->add_option("--instances", dist_instances)->check(CLI::PositiveNumber);
  dist_cmd->add_option("--n", dist_n, "graph size (default: random up to 32)")->check(CLI::PositiveNumber);
  dist_cmd->add_option("--q", dist_q, "edge probability (default: random)")->check(CLI::Range(0.0, 1.0));
  auto* oracle_cmd = app.add_subcommand("oracle", "interference and coloring oracles");
  add_common(oracle_cmd, oracle_c);
  oracle_cmd->add_option("--instances", oracle_instances)->check(CLI::PositiveNumber);
  std::string oracle_topology;
  int oracle_channels = 4;
  oracle_cmd->add_option("--topology", oracle_topology, "report zero-interference achievability for this topology JSON");
  oracle_cmd->add_option("--channels", oracle_channels)->check(CLI::Range(1, kMaxChannels));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) {
      TrainConfig cfg;
      apply_json(cfg, load_config(train_c.config));
      if (train_c.seed_set) cfg.seed = train_c.seed;
      if (iterations) cfg.iterations = *iterations;
      if (objective) cfg.objective = parse_objective(*objective);
      if (step) cfg.optimizer.step = *step;
      if (checkpoint_every) cfg.checkpoint_every = *checkpoint_every;
      if (init_gain) cfg.init_gain = *init_gain;
      cfg.validate();
      const Topology topo = make_graph(train_g, cfg.seed, cfg.channels);
      const fs::path dir = prepare_out(train_c, "train");
      if (cfg.checkpoint_every > 0 && cfg.checkpoint_dir.empty()) cfg.checkpoint_dir = (dir / "checkpoints").string();
      write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
      write_text(dir / "topology.json", topology_to_json(topo) + "\n");
      const std::string tag = "config_hash=" + git_hash(to_json(cfg).dump());
      TrainHistory history;
      if (policy == "gnn" || policy == "relaxed") {
        const TrainResult r = policy == "gnn" ? train(topo, cfg) : relaxed_gnn_train(topo, cfg);
        history = r.history;
        write_file_bytes((dir / "model.cmgr").string(), serialize_params(r.params));
      } else {
        const DnnTrainResult r = dnn_train(topo, cfg);
        history = r.history;
        write_file_bytes((dir / "model.cmgr").string(), serialize_dnn(r.params));
      }
      std::ofstream h(dir / "history.csv");
      write_history_csv(h, history, tag);
      std::printf("trained %s on n=%d |E|=%zu: final batch cost %.6f -> %s\n", policy.c_str(), topo.n(), topo.edge_count(),
                  history.records.back().mean_cost, dir.c_str());
      return kOk;
    }

    if (*eval_cmd) {
      const nlohmann::json file = load_config(eval_c.config);
      EvalConfig ec;
      ec.samples = samples;
      ec.greedy = !sample_mode;
      ec.seed = eval_c.seed;
      override_from(file, "samples", ec.samples);
      if (file.contains("objective")) ec.objective = parse_objective(file.at("objective").get<std::string>());
      if (eval_objective) ec.objective = parse_objective(*eval_objective);
      EvalResult r;
      std::string what;
      int channels = 4;
      std::optional<GnnParams> params;
      if (!checkpoint.empty()) {
        params = deserialize_params(read_file_bytes(checkpoint));
        channels = std::bit_width(static_cast<unsigned>(params->arch.actions));
      }
      const Topology topo = make_graph(eval_g, eval_c.seed, channels);
      if (params) {
        r = evaluate(*params, topo, ec);
        what = checkpoint;
      } else {
        r = evaluate_selector(random_selector(topo.n(), ActionSpace(channels)), topo, ec);
        what = "random";
      }
      const fs::path dir = prepare_out(eval_c, "eval");
      nlohmann::ordered_json j{{"policy", what},       {"n", topo.n()},          {"edges", topo.edge_count()},
                               {"samples", ec.samples}, {"greedy", ec.greedy},    {"objective", to_string(ec.objective)},
                               {"mean", r.mean},        {"std", r.std},           {"mean_objective", r.mean_objective},
                               {"max_objective", r.max_objective}};
      write_text(dir / "eval.json", j.dump(2) + "\n");
      std::printf("%s: %s objective %.6f +- %.6f over %d samples\n", what.c_str(), to_string(ec.objective).c_str(), r.mean, r.std,
                  ec.samples);
      return kOk;
    }

    if (*repro_cmd) {
      const auto& names = scenario_names();
      if (std::find(names.begin(), names.end(), scenario) == names.end()) throw UsageError("unknown scenario: " + scenario);
      ExperimentSpec spec = scenario_spec(scenario, repro_c.seed, graphs);
      apply_json(spec, load_config(repro_c.config));
      if (workers > 0) spec.workers = workers;
      spec.out_dir = prepare_out(repro_c, scenario).string();
      const RunRecord rec = run_experiment(spec);
      for (const auto& s : rec.summaries) {
        std::printf("n=%d q=%g %s %-8s mean %.6f std %.6f (%zu graphs)\n", s.point.n, s.point.q, to_string(s.point.objective).c_str(),
                    to_string(s.policy).c_str(), s.mean, s.std, s.finals.size());
      }
      std::printf("spec_hash=%s wall=%.1fs -> %s\n", rec.spec_hash.c_str(), rec.wall_seconds, spec.out_dir.c_str());
      return rec.complete ? kOk : kPartial;
    }

    if (*grad_cmd) {
      GradCheckOptions o;
      o.seed = grad_c.seed;
      o.instances = grad_instances;
      const nlohmann::json f = load_config(grad_c.config);
      override_from(f, "instances", o.instances);
      override_from(f, "nodes", o.nodes);
      override_from(f, "epsilon", o.epsilon);
      if (f.contains("arch")) o.arch = arch_from_json(f.at("arch"));
      return report(gradcheck(o), grad_c, "gradcheck");
    }
    if (*equi_cmd) {
      EquivarianceOptions o;
      o.seed = equi_c.seed;
      o.instances = equi_instances;
      const nlohmann::json f = load_config(equi_c.config);
      override_from(f, "instances", o.instances);
      override_from(f, "max_nodes", o.max_nodes);
      return report(equivariance_check(o), equi_c, "equivariance-check");
    }
    if (*dist_cmd) {
      DistCheckOptions o;
      o.seed = dist_c.seed;
      o.instances = dist_instances;
      o.nodes = dist_n;
      o.edge_prob = dist_q;
      const nlohmann::json f = load_config(dist_c.config);
      override_from(f, "instances", o.instances);
      override_from(f, "max_nodes", o.max_nodes);
      return report(dist_check(o), dist_c, "dist-check");
    }
    if (*oracle_cmd) {
      if (!oracle_topology.empty()) {
        const Topology topo = topology_from_json(read_text(oracle_topology));
        const ColoringResult r = zero_interference_oracle(topo, oracle_channels);
        std::printf("zero interference with %d channels: %s\n", oracle_channels, r.achievable ? "achievable" : "not achievable");
        if (r.witness) {
          std::ostringstream os;
          write_selection_csv(os, *r.witness);
          std::printf("%s", os.str().c_str());
        }
      }
      OracleCheckOptions o;
      o.seed = oracle_c.seed;
      o.instances = oracle_instances;
      const nlohmann::json f = load_config(oracle_c.config);
      override_from(f, "instances", o.instances);
      override_from(f, "max_nodes", o.max_nodes);
      override_from(f, "max_channels", o.max_channels);
      return report(oracle_check(o), oracle_c, "oracle");
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const LoadError& e) {
    std::fprintf(stderr, "load error: %s\n", e.what());
    return kUsage;
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "parameter error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kCheckFailed;
  }
  return kUsage;
}
