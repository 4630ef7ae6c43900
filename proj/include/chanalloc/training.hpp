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

// Model-free policy-gradient training and evaluation.
//
// The trainer sees the interference model only through a UtilizationFn
// callback; it never differentiates the cost. Each iteration draws a batch of
// demand vectors, rolls the policy out once per vector, evaluates the costs,
// forms the score-function gradient and takes one optimizer step.

#pragma once

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "chanalloc/checkpoint.hpp"
#include "chanalloc/errors.hpp"
#include "chanalloc/gnn.hpp"
#include "chanalloc/interference.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/optim.hpp"
#include "chanalloc/policy.hpp"
#include "chanalloc/random.hpp"
#include "chanalloc/traffic.hpp"

namespace chanalloc {

// Sub-stream ids under the run seed.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t demand = 2;
inline constexpr std::uint64_t action = 3;
inline constexpr std::uint64_t eval_demand = 4;
inline constexpr std::uint64_t eval_action = 5;
}  // namespace stream

struct TrainConfig {
  int iterations = 2000;
  int batch = 64;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  Objective objective = Objective::mean;
  bool baseline = true;
  ShiftNorm norm = ShiftNorm::max_degree;
  DemandModel demand;
  int channels = 4;
  ActionMode action_mode = ActionMode::subsets;

  std::vector<int> features{32, 64, 64, 32};
  int order = 3;
  Activation nonlinearity = Activation::relu;
  bool readout_bias = true;
  // Scales the tap/readout init bound sqrt(1/fan_in). 1 collapses the signal
  // through four ReLU layers (logits start near 0.03 and Adam then blows the
  // weights up); sqrt(6) is the He-uniform bound.
  double init_gain = 2.449489742783178;

  // Hidden widths of the centralized DNN baseline.
  std::vector<int> dnn_hidden{256, 256};

  int checkpoint_every = 0;
  std::string checkpoint_dir;

  ActionSpace action_space() const { return ActionSpace(channels, action_mode); }

  GnnArch gnn_arch() const {
    GnnArch a;
    a.features = features;
    a.order = order;
    a.nonlinearity = nonlinearity;
    a.actions = action_space().size();
    a.readout_bias = readout_bias;
    a.norm = norm;
    return a;
  }

  void validate() const {
    if (iterations < 1) throw ParameterError("TrainConfig: iterations must be >= 1");
    if (batch < 1) throw ParameterError("TrainConfig: batch must be >= 1");
    if (!(init_gain > 0.0) || !std::isfinite(init_gain)) throw ParameterError("TrainConfig: init_gain must be positive");
    optimizer.validate();
    demand.validate();
    (void)action_space();
    gnn_arch().validate();
  }
};

struct IterationRecord {
  int iteration = 0;
  double mean_cost = 0.0;
  double std_cost = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

/// One record per iteration. `seconds` is wall time since the start of the
/// run and is the only field that is not a pure function of (topology, config).
struct TrainHistory {
  std::vector<IterationRecord> records;
};

inline void write_history_csv(std::ostream& os, const TrainHistory& h, const std::string& comment = {},
                              bool include_seconds = true) {
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "iteration,mean_cost,std_cost,grad_norm";
  if (include_seconds) os << ",seconds";
  os << '\n';
  char buf[160];
  for (const auto& r : h.records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g", r.iteration, r.mean_cost, r.std_cost, r.grad_norm);
    os << buf;
    if (include_seconds) {
      std::snprintf(buf, sizeof buf, ",%.6f", r.seconds);
      os << buf;
    }
    os << '\n';
  }
}

/// Mean and sample standard deviation (0 for a single value).
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// GNN policy bound to one topology's shift operator. Tapes handed out by
/// forward() point into this object, so it must stay put while they live.
class GnnPolicy {
 public:
  using Tape = ForwardTape;

  GnnPolicy(GnnParams params, const Topology& topo) : params_(std::move(params)), shift_(build_shift(topo, params_.arch.norm)) {
    params_.check_shapes();
  }

  GnnOutput forward(const DemandVector& d) const { return gnn_forward(params_, shift_, d); }
  Vector backward(const Tape& tape, const Matrix& upstream) const { return gnn_backward(params_, tape, upstream).flatten(); }

  Vector flatten() const { return params_.flatten(); }
  void unflatten(const Vector& v) { params_.unflatten(v); }

  const GnnParams& params() const noexcept { return params_; }
  const ShiftMatrix& shift() const noexcept { return shift_; }

 private:
  GnnParams params_;
  ShiftMatrix shift_;
};

/// Called after every optimizer step.
template <typename Model>
using IterationHook = std::function<void(const IterationRecord&, const Model&)>;

/// The REINFORCE loop over any PolicyModel.
template <PolicyModel Model>
TrainHistory train_policy(Model& model, const Topology& topo, const TrainConfig& cfg, const UtilizationFn& utilization,
                          const IterationHook<Model>& hook = {}) {
  cfg.validate();
  const ActionSpace space = cfg.action_space();
  DemandSampler demands(cfg.demand, derive_seed(cfg.seed, stream::demand));
  Rng action_rng(derive_seed(cfg.seed, stream::action));
  Optimizer opt(cfg.optimizer);
  TrainHistory history;
  const auto start = std::chrono::steady_clock::now();

  using Ep = Episode<typename Model::Tape>;
  std::vector<Ep> batch;
  for (int it = 0; it < cfg.iterations; ++it) {
    batch.clear();
    batch.reserve(static_cast<std::size_t>(cfg.batch));
    std::vector<double> costs;
    costs.reserve(static_cast<std::size_t>(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
      Ep ep;
      ep.demands = demands.sample(topo.n());
      auto out = model.forward(ep.demands);
      ep.logits = std::move(out.logits);
      ep.tape = std::move(out.tape);
      PolicySample s = sample_actions(ep.logits, space, action_rng);
      ep.actions = std::move(s.actions);
      ep.utilization = utilization(ep.demands, topo, s.selection);
      ep.cost = objective_value(cfg.objective, ep.demands, ep.utilization);
      if (!std::isfinite(ep.cost)) throw DivergenceError("train: non-finite cost at iteration " + std::to_string(it));
      costs.push_back(ep.cost);
      batch.push_back(std::move(ep));
    }
    const Vector grad = score_gradient(model, std::span<const Ep>(batch), cfg.baseline);
    if (!grad.allFinite()) throw DivergenceError("train: non-finite gradient at iteration " + std::to_string(it));

    Vector flat = model.flatten();
    opt.step(flat, grad);
    batch.clear();  // tapes reference the parameters about to change
    model.unflatten(flat);

    IterationRecord rec;
    rec.iteration = it;
    std::tie(rec.mean_cost, rec.std_cost) = mean_std(costs);
    rec.grad_norm = grad.norm();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.records.push_back(rec);
    if (hook) hook(rec, model);
  }
  return history;
}

struct TrainResult {
  GnnParams params;
  TrainHistory history;
};

/// Trains the GNN policy on a fixed topology. Writes checkpoints every
/// `cfg.checkpoint_every` iterations when a checkpoint directory is set.
inline TrainResult train(const Topology& topo, const TrainConfig& cfg, const UtilizationFn& utilization = default_utilization()) {
  cfg.validate();
  Rng init_rng(derive_seed(cfg.seed, stream::init));
  GnnPolicy model(GnnParams::init(cfg.gnn_arch(), init_rng, cfg.init_gain), topo);
  IterationHook<GnnPolicy> hook;
  if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
    hook = [&cfg](const IterationRecord& rec, const GnnPolicy& m) {
      if ((rec.iteration + 1) % cfg.checkpoint_every != 0) return;
      const auto path = std::filesystem::path(cfg.checkpoint_dir) / ("ckpt_" + std::to_string(rec.iteration + 1) + ".cmgr");
      write_file_bytes(path.string(), serialize_params(m.params()));
    };
  }
  TrainHistory history = train_policy(model, topo, cfg, utilization, hook);
  return {model.params(), std::move(history)};
}

/// Turns a demand vector into a channel selection; the rng serves sampling
/// selectors and is ignored by deterministic ones.
using Selector = std::function<ChannelSelection(const DemandVector&, Rng&)>;

template <PolicyModel Model>
Selector model_selector(const Model& model, const ActionSpace& space, bool greedy) {
  return [&model, space, greedy](const DemandVector& d, Rng& rng) {
    const Matrix logits = model.forward(d).logits;
    if (greedy) return space.selection(greedy_actions(logits));
    return sample_actions(logits, space, rng).selection;
  };
}

struct EvalConfig {
  int samples = 1000;
  bool greedy = true;
  std::uint64_t seed = 0;
  Objective objective = Objective::mean;
  DemandModel demand;
};

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> costs;  // under cfg.objective
  double mean_objective = 0.0;
  double max_objective = 0.0;
};

/// Monte-Carlo estimate of the expected objective. Demand draws depend only on
/// the seed, so different selectors evaluated with one seed see identical
/// demand vectors.
inline EvalResult evaluate_selector(const Selector& select, const Topology& topo, const EvalConfig& cfg,
                                    const UtilizationFn& utilization = default_utilization()) {
  if (cfg.samples < 1) throw ParameterError("evaluate: samples must be >= 1");
  DemandSampler demands(cfg.demand, derive_seed(cfg.seed, stream::eval_demand));
  Rng action_rng(derive_seed(cfg.seed, stream::eval_action));
  EvalResult r;
  r.costs.reserve(static_cast<std::size_t>(cfg.samples));
  for (int s = 0; s < cfg.samples; ++s) {
    const DemandVector d = demands.sample(topo.n());
    const Vector u = utilization(d, topo, select(d, action_rng));
    const double mean_obj = weighted_mean_objective(d, u);
    const double max_obj = weighted_max_objective(d, u);
    r.mean_objective += mean_obj;
    r.max_objective += max_obj;
    r.costs.push_back(cfg.objective == Objective::mean ? mean_obj : max_obj);
  }
  r.mean_objective /= cfg.samples;
  r.max_objective /= cfg.samples;
  std::tie(r.mean, r.std) = mean_std(r.costs);
  return r;
}

inline EvalResult evaluate(const GnnParams& params, const Topology& topo, const EvalConfig& cfg,
                           ActionMode mode = ActionMode::subsets) {
  const GnnPolicy model(params, topo);
  const int channels = mode == ActionMode::subsets ? std::bit_width(static_cast<unsigned>(params.arch.actions)) : params.arch.actions;
  const ActionSpace space(channels, mode);
  if (space.size() != params.arch.actions) throw ConfigError("evaluate: readout width is not a valid action count");
  return evaluate_selector(model_selector(model, space, cfg.greedy), topo, cfg);
}

}  // namespace chanalloc
