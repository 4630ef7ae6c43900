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

// Comparison policies: uniform random selection, a centralized fully
// connected network trained with the same policy-gradient loop, and a GNN
// trained through a continuous relaxation of the channel bits.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chanalloc/checkpoint.hpp"
#include "chanalloc/errors.hpp"
#include "chanalloc/gnn.hpp"
#include "chanalloc/interference.hpp"
#include "chanalloc/policy.hpp"
#include "chanalloc/training.hpp"

namespace chanalloc {

/// Each AP draws one of the A actions uniformly, independently.
inline ChannelSelection random_policy(int n, const ActionSpace& space, Rng& rng) {
  std::vector<int> actions(static_cast<std::size_t>(n));
  for (auto& a : actions) a = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(space.size())));
  return space.selection(actions);
}

inline Selector random_selector(int n, const ActionSpace& space) {
  return [n, space](const DemandVector&, Rng& rng) { return random_policy(n, space, rng); };
}

// ---------------------------------------------------------------------------
// Centralized DNN

/// Fully connected net from the length-n demand vector to n*A logits; ReLU on
/// hidden layers, linear output. Output unit i*A + a is node i's logit for a.
struct DnnParams {
  std::vector<int> widths;  // n, hidden..., n*A
  int actions = 1;
  std::vector<Matrix> weights;  // in x out
  std::vector<Vector> biases;

  int nodes() const { return widths.front(); }

  static DnnParams zeros(int n, const std::vector<int>& hidden, int actions) {
    if (n < 1 || actions < 1) throw ConfigError("DnnParams: bad shape");
    DnnParams p;
    p.actions = actions;
    p.widths.push_back(n);
    for (int h : hidden) {
      if (h < 1) throw ConfigError("DnnParams: hidden widths must be >= 1");
      p.widths.push_back(h);
    }
    p.widths.push_back(n * actions);
    for (std::size_t l = 0; l + 1 < p.widths.size(); ++l) {
      p.weights.push_back(Matrix::Zero(p.widths[l], p.widths[l + 1]));
      p.biases.push_back(Vector::Zero(p.widths[l + 1]));
    }
    return p;
  }

  /// Weights ~ U[-a, a], a = sqrt(1 / fan_in); biases zero.
  static DnnParams init(int n, const std::vector<int>& hidden, int actions, Rng& rng) {
    DnnParams p = zeros(n, hidden, actions);
    for (auto& w : p.weights) {
      const double a = std::sqrt(1.0 / static_cast<double>(w.rows()));
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = a * (2.0 * rng.uniform() - 1.0);
      }
    }
    return p;
  }

  std::size_t size() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) total += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return total;
  }

  // Per layer: weights output-major, input-minor; then that layer's bias.
  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index o = 0; o < weights[l].cols(); ++o) {
        for (Eigen::Index i = 0; i < weights[l].rows(); ++i) fn(weights[l](i, o));
      }
      for (Eigen::Index o = 0; o < biases[l].size(); ++o) fn(biases[l][o]);
    }
  }

  Vector flatten() const {
    Vector v(static_cast<Eigen::Index>(size()));
    Eigen::Index pos = 0;
    const_cast<DnnParams*>(this)->visit([&](double& x) { v[pos++] = x; });
    return v;
  }

  void unflatten(const Vector& v) {
    if (v.size() != static_cast<Eigen::Index>(size())) throw ConfigError("DnnParams: flat vector has wrong length");
    Eigen::Index pos = 0;
    visit([&](double& x) { x = v[pos++]; });
  }
};

struct DnnTape {
  std::vector<Matrix> inputs;  // per layer, 1 x in
  std::vector<Matrix> pre;     // per layer, 1 x out
};

struct DnnOutput {
  Matrix logits;
  DnnTape tape;
};

class DnnPolicy {
 public:
  using Tape = DnnTape;

  explicit DnnPolicy(DnnParams params) : params_(std::move(params)) {}

  DnnOutput forward(const DemandVector& d) const {
    if (d.size() != params_.nodes()) throw ConfigError("DnnPolicy: input width differs from n");
    DnnOutput out;
    Matrix h = d.transpose();
    const std::size_t layers = params_.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
      out.tape.inputs.push_back(h);
      Matrix pre = h * params_.weights[l];
      pre += params_.biases[l].transpose();
      out.tape.pre.push_back(pre);
      h = l + 1 < layers ? Matrix(pre.cwiseMax(0.0)) : pre;
    }
    const int n = params_.nodes();
    out.logits = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(h.data(), n, params_.actions);
    return out;
  }

  Vector backward(const Tape& tape, const Matrix& upstream) const {
    const int n = params_.nodes();
    if (upstream.rows() != n || upstream.cols() != params_.actions) throw ContractViolation("DnnPolicy: upstream shape mismatch");
    if (tape.pre.size() != params_.weights.size()) throw ContractViolation("DnnPolicy: tape does not match the parameters");
    DnnParams grad = DnnParams::zeros(n, std::vector<int>(params_.widths.begin() + 1, params_.widths.end() - 1), params_.actions);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> up_rm = upstream;
    Matrix d_pre = Eigen::Map<const Matrix>(up_rm.data(), 1, n * params_.actions);
    for (std::size_t l = params_.weights.size(); l-- > 0;) {
      if (l + 1 < params_.weights.size()) d_pre = d_pre.cwiseProduct((tape.pre[l].array() > 0.0).cast<double>().matrix());
      grad.weights[l].noalias() = tape.inputs[l].transpose() * d_pre;
      grad.biases[l] = d_pre.transpose();
      if (l > 0) d_pre = d_pre * params_.weights[l].transpose();
    }
    return grad.flatten();
  }

  Vector flatten() const { return params_.flatten(); }
  void unflatten(const Vector& v) { params_.unflatten(v); }
  const DnnParams& params() const noexcept { return params_; }

 private:
  DnnParams params_;
};

inline std::string serialize_dnn(const DnnParams& p) {
  nlohmann::ordered_json h;
  h["kind"] = "dnn";
  h["widths"] = p.widths;
  h["A"] = p.actions;
  h["nonlinearity"] = "relu";
  return encode_checkpoint(h, p.flatten());
}

inline DnnParams deserialize_dnn(std::string_view bytes) {
  const CheckpointBlob blob = decode_checkpoint(bytes);
  if (blob.header.value("kind", std::string()) != "dnn") throw LoadError("checkpoint: not a DNN checkpoint");
  std::vector<int> widths;
  int actions = 0;
  try {
    widths = blob.header.at("widths").get<std::vector<int>>();
    actions = blob.header.at("A").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint: bad DNN header: ") + e.what());
  }
  if (widths.size() < 2 || actions < 1 || widths.back() != widths.front() * actions) throw LoadError("checkpoint: inconsistent DNN widths");
  DnnParams p;
  try {
    p = DnnParams::zeros(widths.front(), std::vector<int>(widths.begin() + 1, widths.end() - 1), actions);
  } catch (const ConfigError& e) {
    throw LoadError(e.what());
  }
  p.unflatten(payload_vector(blob, p.size()));
  return p;
}

struct DnnTrainResult {
  DnnParams params;
  TrainHistory history;
};

/// Same REINFORCE loop, cost callback and demand stream as the GNN trainer.
inline DnnTrainResult dnn_train(const Topology& topo, const TrainConfig& cfg, const UtilizationFn& utilization = default_utilization()) {
  cfg.validate();
  Rng init_rng(derive_seed(cfg.seed, stream::init));
  DnnPolicy model(DnnParams::init(topo.n(), cfg.dnn_hidden, cfg.action_space().size(), init_rng));
  TrainHistory history = train_policy(model, topo, cfg, utilization);
  return {model.params(), std::move(history)};
}

// ---------------------------------------------------------------------------
// Continuous relaxation (model-based)

inline constexpr double kSoftCountFloor = 1e-6;

struct SoftUtilization {
  Vector u;
  std::vector<int> worst;  // attaining channel per AP, lowest index on ties
};

/// u_i = max_l sum_j N(i,j) c_il c_jl d_j / max(sum_m c_jm, floor) for soft
/// channel weights c in [0, 1].
inline SoftUtilization soft_utilization(const DemandVector& d, const Topology& topo, const Matrix& soft) {
  const int n = topo.n();
  if (d.size() != n || soft.rows() != n) throw ParameterError("soft_utilization: dimension mismatch");
  const Eigen::Index channels = soft.cols();
  Vector counts = soft.rowwise().sum().cwiseMax(kSoftCountFloor);
  SoftUtilization r{Vector::Zero(n), std::vector<int>(static_cast<std::size_t>(n), 0)};
  Vector load(channels);
  for (int i = 0; i < n; ++i) {
    load.setZero();
    for (int j : topo.neighbors(i)) load += soft.row(j).transpose() * (d[j] / counts[j]);
    load = load.cwiseProduct(soft.row(i).transpose());
    Eigen::Index best = 0;
    r.u[i] = load.maxCoeff(&best);
    r.worst[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return r;
}

inline double soft_objective(Objective kind, const DemandVector& d, const Topology& topo, const Matrix& soft) {
  return objective_value(kind, d, soft_utilization(d, topo, soft).u);
}

/// Subgradient of soft_objective with respect to the soft channel weights. The
/// per-AP max routes to its attaining channel; the max objective routes to the
/// attaining AP (lowest index on ties).
inline Matrix soft_objective_grad(Objective kind, const DemandVector& d, const Topology& topo, const Matrix& soft) {
  const int n = topo.n();
  const SoftUtilization su = soft_utilization(d, topo, soft);
  const Vector raw_counts = soft.rowwise().sum();
  const Vector counts = raw_counts.cwiseMax(kSoftCountFloor);
  Vector weight = Vector::Zero(n);
  if (kind == Objective::mean) {
    weight = d / static_cast<double>(n);
  } else {
    Eigen::Index top = 0;
    d.cwiseProduct(su.u).maxCoeff(&top);
    weight[top] = d[top];
  }
  Matrix g = Matrix::Zero(soft.rows(), soft.cols());
  Vector d_count = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (weight[i] == 0.0) continue;
    const int l = su.worst[static_cast<std::size_t>(i)];
    for (int j : topo.neighbors(i)) {
      const double t = d[j] / counts[j];
      g(i, l) += weight[i] * soft(j, l) * t;
      g(j, l) += weight[i] * soft(i, l) * t;
      d_count[j] -= weight[i] * soft(i, l) * soft(j, l) * t / counts[j];
    }
  }
  for (int j = 0; j < n; ++j) {
    if (raw_counts[j] > kSoftCountFloor) g.row(j).array() += d_count[j];
  }
  return g;
}

inline Matrix logistic(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

/// Thresholds at 0.5; an all-zero row falls back to its largest channel.
inline ChannelSelection quantize(const Matrix& soft) {
  std::vector<ChannelMask> masks(static_cast<std::size_t>(soft.rows()), 0);
  for (Eigen::Index i = 0; i < soft.rows(); ++i) {
    ChannelMask m = 0;
    for (Eigen::Index l = 0; l < soft.cols(); ++l) {
      if (soft(i, l) > 0.5) m |= ChannelMask{1} << l;
    }
    if (m == 0) {
      Eigen::Index best = 0;
      soft.row(i).maxCoeff(&best);
      m = ChannelMask{1} << best;
    }
    masks[static_cast<std::size_t>(i)] = m;
  }
  return ChannelSelection(static_cast<int>(soft.cols()), std::move(masks));
}

inline Selector relaxed_selector(const GnnPolicy& model) {
  return [&model](const DemandVector& d, Rng&) { return quantize(logistic(model.forward(d).logits)); };
}

/// GNN with one output per channel, squashed by a logistic map and trained by
/// differentiating the soft objective end to end. History records the
/// quantized (test-time) cost of each training batch.
inline TrainResult relaxed_gnn_train(const Topology& topo, const TrainConfig& cfg) {
  cfg.validate();
  GnnArch arch = cfg.gnn_arch();
  arch.actions = cfg.channels;
  Rng init_rng(derive_seed(cfg.seed, stream::init));
  GnnPolicy model(GnnParams::init(arch, init_rng, cfg.init_gain), topo);
  DemandSampler demands(cfg.demand, derive_seed(cfg.seed, stream::demand));
  Optimizer opt(cfg.optimizer);
  TrainHistory history;
  const auto start = std::chrono::steady_clock::now();
  const double inv_t = 1.0 / static_cast<double>(cfg.batch);

  for (int it = 0; it < cfg.iterations; ++it) {
    Vector grad = Vector::Zero(static_cast<Eigen::Index>(model.params().size()));
    std::vector<double> costs;
    for (int b = 0; b < cfg.batch; ++b) {
      const DemandVector d = demands.sample(topo.n());
      const GnnOutput out = model.forward(d);
      const Matrix soft = logistic(out.logits);
      const Matrix g_soft = soft_objective_grad(cfg.objective, d, topo, soft);
      const Matrix upstream = inv_t * g_soft.cwiseProduct(soft.cwiseProduct((1.0 - soft.array()).matrix()));
      grad += model.backward(out.tape, upstream);
      costs.push_back(objective_value(cfg.objective, d, channel_utilization(d, topo, quantize(soft))));
    }
    if (!grad.allFinite()) throw DivergenceError("relaxed_gnn_train: non-finite gradient at iteration " + std::to_string(it));
    Vector flat = model.flatten();
    opt.step(flat, grad);
    model.unflatten(flat);

    IterationRecord rec;
    rec.iteration = it;
    std::tie(rec.mean_cost, rec.std_cost) = mean_std(costs);
    rec.grad_norm = grad.norm();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.records.push_back(rec);
  }
  return {model.params(), std::move(history)};
}

}  // namespace chanalloc
