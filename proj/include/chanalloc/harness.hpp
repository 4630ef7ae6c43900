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

// Experiment orchestration: JSON configs, scenario presets, a bounded worker
// pool over (grid point, seed) jobs, and CSV/JSON result export.

#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "chanalloc/baselines.hpp"
#include "chanalloc/errors.hpp"
#include "chanalloc/interference.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/training.hpp"

namespace chanalloc {

/// Lowercase hex SHA-1 of "blob <size>\0" + content, as git hashes objects.
inline std::string git_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) throw std::runtime_error("git_hash: digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

// ---------------------------------------------------------------------------
// TrainConfig <-> JSON. Keys mirror the struct's field names; missing keys
// keep their defaults.

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["iterations"] = c.iterations;
  j["batch"] = c.batch;
  j["optimizer"] = {{"kind", to_string(c.optimizer.kind)},
                    {"step", c.optimizer.step},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  j["seed"] = c.seed;
  j["objective"] = to_string(c.objective);
  j["baseline"] = c.baseline;
  j["norm"] = to_string(c.norm);
  j["demand"] = {{"mean", c.demand.mean}, {"stddev", c.demand.stddev}};
  j["channels"] = c.channels;
  j["action_mode"] = c.action_mode == ActionMode::subsets ? "subsets" : "single";
  j["features"] = c.features;
  j["order"] = c.order;
  j["nonlinearity"] = to_string(c.nonlinearity);
  j["readout_bias"] = c.readout_bias;
  j["init_gain"] = c.init_gain;
  j["dnn_hidden"] = c.dnn_hidden;
  j["checkpoint_every"] = c.checkpoint_every;
  j["checkpoint_dir"] = c.checkpoint_dir;
  return j;
}

inline void apply_json(TrainConfig& c, const nlohmann::json& j) {
  try {
    if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
    if (j.contains("batch")) c.batch = j.at("batch").get<int>();
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      if (o.contains("kind")) c.optimizer.kind = parse_optimizer(o.at("kind").get<std::string>());
      if (o.contains("step")) c.optimizer.step = o.at("step").get<double>();
      if (o.contains("beta1")) c.optimizer.beta1 = o.at("beta1").get<double>();
      if (o.contains("beta2")) c.optimizer.beta2 = o.at("beta2").get<double>();
      if (o.contains("epsilon")) c.optimizer.epsilon = o.at("epsilon").get<double>();
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("objective")) c.objective = parse_objective(j.at("objective").get<std::string>());
    if (j.contains("baseline")) c.baseline = j.at("baseline").get<bool>();
    if (j.contains("norm")) c.norm = parse_shift_norm(j.at("norm").get<std::string>());
    if (j.contains("demand")) {
      c.demand.mean = j.at("demand").value("mean", c.demand.mean);
      c.demand.stddev = j.at("demand").value("stddev", c.demand.stddev);
    }
    if (j.contains("channels")) c.channels = j.at("channels").get<int>();
    if (j.contains("action_mode")) {
      const auto mode = j.at("action_mode").get<std::string>();
      if (mode != "subsets" && mode != "single") throw ParameterError("unknown action_mode: " + mode);
      c.action_mode = mode == "subsets" ? ActionMode::subsets : ActionMode::single;
    }
    if (j.contains("features")) c.features = j.at("features").get<std::vector<int>>();
    if (j.contains("order")) c.order = j.at("order").get<int>();
    if (j.contains("nonlinearity")) c.nonlinearity = parse_activation(j.at("nonlinearity").get<std::string>());
    if (j.contains("readout_bias")) c.readout_bias = j.at("readout_bias").get<bool>();
    if (j.contains("init_gain")) c.init_gain = j.at("init_gain").get<double>();
    if (j.contains("dnn_hidden")) c.dnn_hidden = j.at("dnn_hidden").get<std::vector<int>>();
    if (j.contains("checkpoint_every")) c.checkpoint_every = j.at("checkpoint_every").get<int>();
    if (j.contains("checkpoint_dir")) c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiments

enum class PolicyKind { gnn, dnn, relaxed, random };

inline std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::gnn: return "gnn";
    case PolicyKind::dnn: return "dnn";
    case PolicyKind::relaxed: return "relaxed";
    case PolicyKind::random: return "random";
  }
  return "gnn";
}

inline PolicyKind parse_policy(const std::string& s) {
  if (s == "gnn") return PolicyKind::gnn;
  if (s == "dnn") return PolicyKind::dnn;
  if (s == "relaxed") return PolicyKind::relaxed;
  if (s == "random") return PolicyKind::random;
  throw ParameterError("unknown policy: " + s);
}

struct ExperimentSpec {
  std::string scenario = "custom";
  std::vector<int> nodes{10};
  std::vector<double> edge_probs{0.25};
  std::vector<Objective> objectives{Objective::mean};
  std::vector<PolicyKind> policies{PolicyKind::gnn, PolicyKind::random};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  bool require_colorable = false;  // resample graphs until 4-colorable (fig3)
  int eval_samples = 1000;
  int workers = 0;  // 0: hardware concurrency
  TrainConfig train;
  std::string out_dir;

  void validate() const {
    if (nodes.empty() || edge_probs.empty() || objectives.empty() || policies.empty() || seeds.empty()) {
      throw ParameterError("ExperimentSpec: grid, policies and seeds must be non-empty");
    }
    if (eval_samples < 1) throw ParameterError("ExperimentSpec: eval_samples must be >= 1");
    train.validate();
  }
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"fig3-small", "fig4-nodes", "fig4-edges", "fig5-objectives", "gnn-vs-dnn", "custom"};
  return names;
}

/// Training budget of the n=20 presets. An equivariant policy whose only input
/// is the demand vector sits on a node-symmetric plateau (every AP draws from
/// nearly the same distribution) for the first 1500-5000 iterations at n=20,
/// q=0.5; 2000 is kept for fig3-small.
inline constexpr int kLargeScaleIterations = 8000;

/// Versioned preset grids. `base_seed` fills seeds base..base+graphs-1.
inline ExperimentSpec scenario_spec(const std::string& name, std::uint64_t base_seed = 0, int graphs = 10) {
  ExperimentSpec s;
  s.scenario = name;
  s.seeds.clear();
  for (int g = 0; g < graphs; ++g) s.seeds.push_back(base_seed + static_cast<std::uint64_t>(g));
  using P = PolicyKind;
  if (name == "fig3-small") {
    s.nodes = {10};
    s.edge_probs = {0.25};
    s.policies = {P::gnn, P::relaxed, P::random};
    s.require_colorable = true;
  } else if (name == "fig4-nodes") {
    s.nodes = {10, 15, 20, 25, 30};
    s.edge_probs = {0.5};
    s.policies = {P::gnn, P::dnn, P::relaxed, P::random};
  } else if (name == "fig4-edges") {
    s.nodes = {20};
    s.edge_probs = {0.2, 0.4, 0.6, 0.8, 1.0};
    s.policies = {P::gnn, P::dnn, P::relaxed, P::random};
  } else if (name == "fig5-objectives") {
    s.nodes = {20};
    s.edge_probs = {0.5};
    s.objectives = {Objective::mean, Objective::max};
    s.policies = {P::gnn, P::dnn, P::relaxed, P::random};
  } else if (name == "gnn-vs-dnn") {
    s.nodes = {20};
    s.edge_probs = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    s.policies = {P::gnn, P::dnn};
  } else if (name != "custom") {
    throw ParameterError("unknown scenario: " + name);
  }
  if (name != "fig3-small" && name != "custom") s.train.iterations = kLargeScaleIterations;
  return s;
}

inline nlohmann::ordered_json to_json(const ExperimentSpec& s) {
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario;
  j["nodes"] = s.nodes;
  j["edge_probs"] = s.edge_probs;
  std::vector<std::string> objs;
  for (auto o : s.objectives) objs.push_back(to_string(o));
  j["objectives"] = objs;
  std::vector<std::string> pols;
  for (auto p : s.policies) pols.push_back(to_string(p));
  j["policies"] = pols;
  j["seeds"] = s.seeds;
  j["require_colorable"] = s.require_colorable;
  j["eval_samples"] = s.eval_samples;
  j["train"] = to_json(s.train);
  return j;
}

inline void apply_json(ExperimentSpec& s, const nlohmann::json& j) {
  try {
    if (j.contains("scenario")) s.scenario = j.at("scenario").get<std::string>();
    if (j.contains("nodes")) s.nodes = j.at("nodes").get<std::vector<int>>();
    if (j.contains("edge_probs")) s.edge_probs = j.at("edge_probs").get<std::vector<double>>();
    if (j.contains("objectives")) {
      s.objectives.clear();
      for (const auto& o : j.at("objectives")) s.objectives.push_back(parse_objective(o.get<std::string>()));
    }
    if (j.contains("policies")) {
      s.policies.clear();
      for (const auto& p : j.at("policies")) s.policies.push_back(parse_policy(p.get<std::string>()));
    }
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("require_colorable")) s.require_colorable = j.at("require_colorable").get<bool>();
    if (j.contains("eval_samples")) s.eval_samples = j.at("eval_samples").get<int>();
    if (j.contains("workers")) s.workers = j.at("workers").get<int>();
    if (j.contains("train")) apply_json(s.train, j.at("train"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spec: ") + e.what());
  }
}

/// First topology at (n, q) derived from `seed`; for colorable-only specs,
/// later candidates are tried until the oracle certifies `channels` colors.
inline Topology experiment_topology(int n, double q, std::uint64_t seed, bool require_colorable, int channels) {
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    const std::uint64_t gseed = attempt == 0 ? seed : derive_seed(seed, 0x1000 + attempt);
    Topology t = gen_er_graph(n, q, gseed);
    if (!require_colorable || zero_interference_oracle(t, channels).achievable) return t;
  }
  throw ParameterError("experiment_topology: no colorable instance found");
}

struct GridPoint {
  int n = 0;
  double q = 0.0;
  Objective objective = Objective::mean;
};

struct PolicyOutcome {
  PolicyKind policy;
  double final_cost = 0.0;
  std::vector<double> curve;  // per-iteration batch-mean cost
};

struct JobResult {
  GridPoint point;
  std::uint64_t seed = 0;
  std::uint64_t topology_seed = 0;
  std::vector<PolicyOutcome> outcomes;
  bool ok = true;
  std::string error;
};

inline std::vector<double> curve_of(const TrainHistory& h) {
  std::vector<double> c;
  c.reserve(h.records.size());
  for (const auto& r : h.records) c.push_back(r.mean_cost);
  return c;
}

/// Trains and evaluates every requested policy on one (grid point, seed).
inline JobResult run_job(const ExperimentSpec& spec, const GridPoint& point, std::uint64_t seed) {
  JobResult job;
  job.point = point;
  job.seed = seed;
  const Topology topo = experiment_topology(point.n, point.q, seed, spec.require_colorable, spec.train.channels);
  job.topology_seed = topo.seed();
  TrainConfig cfg = spec.train;
  cfg.seed = seed;
  cfg.objective = point.objective;
  cfg.checkpoint_every = 0;
  EvalConfig ec;
  ec.samples = spec.eval_samples;
  ec.seed = derive_seed(seed, 0xE7A1);
  ec.objective = point.objective;
  ec.demand = cfg.demand;
  const ActionSpace space = cfg.action_space();

  for (PolicyKind p : spec.policies) {
    PolicyOutcome out{p, 0.0, {}};
    switch (p) {
      case PolicyKind::gnn: {
        const TrainResult r = train(topo, cfg);
        const GnnPolicy model(r.params, topo);
        out.final_cost = evaluate_selector(model_selector(model, space, true), topo, ec).mean;
        out.curve = curve_of(r.history);
        break;
      }
      case PolicyKind::dnn: {
        const DnnTrainResult r = dnn_train(topo, cfg);
        const DnnPolicy model(r.params);
        out.final_cost = evaluate_selector(model_selector(model, space, true), topo, ec).mean;
        out.curve = curve_of(r.history);
        break;
      }
      case PolicyKind::relaxed: {
        const TrainResult r = relaxed_gnn_train(topo, cfg);
        const GnnPolicy model(r.params, topo);
        out.final_cost = evaluate_selector(relaxed_selector(model), topo, ec).mean;
        out.curve = curve_of(r.history);
        break;
      }
      case PolicyKind::random: {
        out.final_cost = evaluate_selector(random_selector(topo.n(), space), topo, ec).mean;
        // Batch means on the training demand stream, for curve plots.
        DemandSampler demands(cfg.demand, derive_seed(cfg.seed, stream::demand));
        Rng rng(derive_seed(cfg.seed, stream::action));
        for (int it = 0; it < cfg.iterations; ++it) {
          double acc = 0.0;
          for (int b = 0; b < cfg.batch; ++b) {
            const DemandVector d = demands.sample(topo.n());
            acc += objective_value(cfg.objective, d, channel_utilization(d, topo, random_policy(topo.n(), space, rng)));
          }
          out.curve.push_back(acc / cfg.batch);
        }
        break;
      }
    }
    job.outcomes.push_back(std::move(out));
  }
  return job;
}

struct PolicySummary {
  GridPoint point;
  PolicyKind policy;
  std::vector<double> finals;  // per completed seed, in seed order
  double mean = 0.0;
  double std = 0.0;
};

struct RunRecord {
  std::string spec_hash;
  std::string config_hash;
  std::vector<JobResult> jobs;  // grid-major, seed-minor
  std::vector<PolicySummary> summaries;
  bool complete = true;
  double wall_seconds = 0.0;

  /// Everything but wall time; byte-stable for a given spec.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["spec_hash"] = spec_hash;
    j["config_hash"] = config_hash;
    j["complete"] = complete;
    auto& sums = j["summaries"] = nlohmann::ordered_json::array();
    for (const auto& s : summaries) {
      sums.push_back({{"n", s.point.n},
                      {"q", s.point.q},
                      {"objective", to_string(s.point.objective)},
                      {"policy", to_string(s.policy)},
                      {"finals", s.finals},
                      {"mean", s.mean},
                      {"std", s.std}});
    }
    auto& fails = j["failures"] = nlohmann::ordered_json::array();
    for (const auto& job : jobs) {
      if (!job.ok) fails.push_back({{"n", job.point.n}, {"q", job.point.q}, {"seed", job.seed}, {"error", job.error}});
    }
    return j;
  }
};

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_q(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace detail

/// Runs every (grid point, seed) job on a bounded worker pool, aggregates the
/// per-seed evaluations, and writes CSV artifacts into spec.out_dir when set:
/// runs.csv, sweep.csv, curves.csv, gap.csv (GNN and DNN both present),
/// record.json and timing.json. A failing job is recorded and the run goes on.
inline RunRecord run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.spec_hash = git_hash(to_json(spec).dump());
  rec.config_hash = git_hash(to_json(spec.train).dump());

  std::vector<GridPoint> points;
  for (Objective o : spec.objectives) {
    for (int n : spec.nodes) {
      for (double q : spec.edge_probs) points.push_back({n, q, o});
    }
  }
  const std::size_t total = points.size() * spec.seeds.size();
  rec.jobs.resize(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < total; idx = next++) {
      const GridPoint& p = points[idx / spec.seeds.size()];
      const std::uint64_t seed = spec.seeds[idx % spec.seeds.size()];
      try {
        rec.jobs[idx] = run_job(spec, p, seed);
      } catch (const std::exception& e) {
        rec.jobs[idx] = JobResult{p, seed, 0, {}, false, e.what()};
      }
    }
  };
  unsigned pool = spec.workers > 0 ? static_cast<unsigned>(spec.workers) : std::max(1U, std::thread::hardware_concurrency());
  pool = std::min<unsigned>(pool, static_cast<unsigned>(total));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < pool; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    for (PolicyKind pk : spec.policies) {
      PolicySummary s{points[pi], pk, {}, 0.0, 0.0};
      for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
        const JobResult& job = rec.jobs[pi * spec.seeds.size() + si];
        for (const auto& o : job.outcomes) {
          if (o.policy == pk) s.finals.push_back(o.final_cost);
        }
      }
      std::tie(s.mean, s.std) = mean_std(s.finals);
      rec.summaries.push_back(std::move(s));
    }
  }
  rec.complete = std::all_of(rec.jobs.begin(), rec.jobs.end(), [](const JobResult& j) { return j.ok; });
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (spec.out_dir.empty()) return rec;
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);
  const fs::path out(spec.out_dir);
  const std::string tag = "# spec_hash=" + rec.spec_hash + "\n";

  {
    std::ofstream f(out / "runs.csv");
    f << tag << "n,q,objective,seed,topology_seed,policy,final_cost,status\n";
    for (const auto& job : rec.jobs) {
      const std::string head = std::to_string(job.point.n) + ',' + detail::fmt_q(job.point.q) + ',' + to_string(job.point.objective) +
                               ',' + std::to_string(job.seed) + ',' + std::to_string(job.topology_seed) + ',';
      if (!job.ok) {
        f << head << ",,failed\n";
        continue;
      }
      for (const auto& o : job.outcomes) f << head << to_string(o.policy) << ',' << detail::fmt(o.final_cost) << ",ok\n";
    }
  }
  {
    std::ofstream f(out / "sweep.csv");
    f << tag << "n,q,objective,policy,mean,std,count\n";
    for (const auto& s : rec.summaries) {
      f << s.point.n << ',' << detail::fmt_q(s.point.q) << ',' << to_string(s.point.objective) << ',' << to_string(s.policy) << ','
        << detail::fmt(s.mean) << ',' << detail::fmt(s.std) << ',' << s.finals.size() << '\n';
    }
  }
  {
    std::ofstream f(out / "curves.csv");
    f << tag << "n,q,objective,policy,iteration,mean,std\n";
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
      for (PolicyKind pk : spec.policies) {
        std::vector<const std::vector<double>*> curves;
        for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
          for (const auto& o : rec.jobs[pi * spec.seeds.size() + si].outcomes) {
            if (o.policy == pk) curves.push_back(&o.curve);
          }
        }
        if (curves.empty()) continue;
        for (std::size_t it = 0; it < curves.front()->size(); ++it) {
          std::vector<double> vals;
          for (const auto* c : curves) vals.push_back((*c)[it]);
          const auto [m, sd] = mean_std(vals);
          f << points[pi].n << ',' << detail::fmt_q(points[pi].q) << ',' << to_string(points[pi].objective) << ',' << to_string(pk)
            << ',' << it << ',' << detail::fmt(m) << ',' << detail::fmt(sd) << '\n';
        }
      }
    }
  }
  const bool has_gap = std::count(spec.policies.begin(), spec.policies.end(), PolicyKind::gnn) > 0 &&
                       std::count(spec.policies.begin(), spec.policies.end(), PolicyKind::dnn) > 0;
  if (has_gap) {
    std::ofstream f(out / "gap.csv");
    f << tag << "n,q,objective,gnn_mean,dnn_mean,gap\n";
    for (const auto& p : points) {
      double g = 0.0, d = 0.0;
      for (const auto& s : rec.summaries) {
        if (s.point.n != p.n || s.point.q != p.q || s.point.objective != p.objective) continue;
        if (s.policy == PolicyKind::gnn) g = s.mean;
        if (s.policy == PolicyKind::dnn) d = s.mean;
      }
      f << p.n << ',' << detail::fmt_q(p.q) << ',' << to_string(p.objective) << ',' << detail::fmt(g) << ',' << detail::fmt(d) << ','
        << detail::fmt(g - d) << '\n';
    }
  }
  {
    std::ofstream f(out / "record.json");
    f << rec.to_json().dump(2) << '\n';
  }
  {
    std::ofstream f(out / "timing.json");
    f << nlohmann::ordered_json{{"spec_hash", rec.spec_hash}, {"wall_seconds", rec.wall_seconds}}.dump(2) << '\n';
  }
  return rec;
}

}  // namespace chanalloc
