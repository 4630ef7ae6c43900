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

// Factorized categorical policy over per-AP channel actions and the
// score-function (likelihood-ratio) gradient estimator.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "chanalloc/errors.hpp"
#include "chanalloc/interference.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/random.hpp"

namespace chanalloc {

enum class ActionMode {
  subsets,  // every nonempty subset of the M channels, A = 2^M - 1
  single,   // exactly one channel, A = M
};

/// Index <-> mask table. In subset mode mask(a) is the binary encoding of a+1.
class ActionSpace {
 public:
  explicit ActionSpace(int channels = 4, ActionMode mode = ActionMode::subsets) : channels_(channels), mode_(mode) {
    if (channels < 1 || channels > kMaxChannels) throw ParameterError("ActionSpace: channel count out of range");
  }

  int channels() const noexcept { return channels_; }
  ActionMode mode() const noexcept { return mode_; }
  int size() const noexcept { return mode_ == ActionMode::subsets ? (1 << channels_) - 1 : channels_; }

  ChannelMask mask(int a) const {
    if (a < 0 || a >= size()) throw ParameterError("action_to_mask: action index out of range");
    return mode_ == ActionMode::subsets ? static_cast<ChannelMask>(a + 1) : ChannelMask{1} << a;
  }

  int index(ChannelMask m) const {
    if (mode_ == ActionMode::subsets) {
      if (m == 0 || m > static_cast<ChannelMask>(size())) throw ParameterError("ActionSpace: mask out of range");
      return static_cast<int>(m) - 1;
    }
    if (std::popcount(m) != 1 || m >= (ChannelMask{1} << channels_)) throw ParameterError("ActionSpace: not a single-channel mask");
    return std::countr_zero(m);
  }

  ChannelSelection selection(std::span<const int> actions) const {
    std::vector<ChannelMask> masks;
    masks.reserve(actions.size());
    for (int a : actions) masks.push_back(mask(a));
    return ChannelSelection(channels_, std::move(masks));
  }

 private:
  int channels_;
  ActionMode mode_;
};

/// Bits of (a + 1) as an M-vector of 0/1.
inline std::vector<int> action_to_mask(int a, int channels) {
  const ChannelMask m = ActionSpace(channels).mask(a);
  std::vector<int> bits(static_cast<std::size_t>(channels));
  for (int l = 0; l < channels; ++l) bits[static_cast<std::size_t>(l)] = static_cast<int>((m >> l) & 1U);
  return bits;
}

namespace detail {

inline void require_finite(const Matrix& logits) {
  if (!logits.allFinite()) throw EvaluationError("policy: non-finite logits");
}

}  // namespace detail

/// Row-wise log-softmax with max subtraction.
inline Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

inline Matrix softmax(const Matrix& logits) { return log_softmax(logits).array().exp(); }

struct PolicySample {
  std::vector<int> actions;
  ChannelSelection selection;
  std::vector<double> log_probs;
};

/// Independent categorical draw per node by inverse CDF on one uniform.
inline PolicySample sample_actions(const Matrix& logits, const ActionSpace& space, Rng& rng) {
  detail::require_finite(logits);
  if (logits.cols() != space.size()) throw ParameterError("sample_actions: logit width differs from action count");
  const Matrix logp = log_softmax(logits);
  PolicySample s;
  s.actions.resize(static_cast<std::size_t>(logits.rows()));
  s.log_probs.resize(s.actions.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double u = rng.uniform();
    double cum = 0.0;
    int pick = static_cast<int>(logits.cols()) - 1;
    for (Eigen::Index a = 0; a < logits.cols(); ++a) {
      cum += std::exp(logp(i, a));
      if (u < cum) {
        pick = static_cast<int>(a);
        break;
      }
    }
    s.actions[static_cast<std::size_t>(i)] = pick;
    s.log_probs[static_cast<std::size_t>(i)] = logp(i, pick);
  }
  s.selection = space.selection(s.actions);
  return s;
}

/// Per-node argmax (lowest index on ties).
inline std::vector<int> greedy_actions(const Matrix& logits) {
  detail::require_finite(logits);
  std::vector<int> actions(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    actions[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return actions;
}

/// sum_i log softmax(logits_i)[a_i].
inline double log_density(const Matrix& logits, std::span<const int> actions) {
  detail::require_finite(logits);
  if (static_cast<Eigen::Index>(actions.size()) != logits.rows()) throw ParameterError("log_density: action count mismatch");
  const Matrix logp = log_softmax(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || a >= logits.cols()) throw ParameterError("log_density: action index out of range");
    total += logp(static_cast<Eigen::Index>(i), a);
  }
  return total;
}

/// d log_density / d logits = onehot(a_i) - softmax(logits_i), row by row.
inline Matrix log_density_grad(const Matrix& logits, std::span<const int> actions) {
  Matrix g = -softmax(logits);
  for (std::size_t i = 0; i < actions.size(); ++i) g(static_cast<Eigen::Index>(i), actions[i]) += 1.0;
  return g;
}

/// One rollout: the unit of the gradient estimator.
template <typename Tape>
struct Episode {
  DemandVector demands;
  Matrix logits;
  Tape tape;
  std::vector<int> actions;
  Vector utilization;
  double cost = 0.0;
};

/// Models expose forward(d) -> {logits, tape} and backward(tape, upstream),
/// the latter returning the flat gradient of <logits, upstream>.
template <typename M>
concept PolicyModel = requires(const M& m, const DemandVector& d, const typename M::Tape& t, const Matrix& up) {
  { m.forward(d).logits } -> std::convertible_to<Matrix>;
  { m.backward(t, up) } -> std::convertible_to<Vector>;
  { m.flatten() } -> std::convertible_to<Vector>;
};

/// (1/T) sum_tau (R_tau - b) grad log f_tau, with b the batch-mean cost when
/// `use_baseline` is set. backward() is linear in its upstream argument, so
/// each episode contributes a single backward pass with a pre-scaled upstream.
/// Episodes are reduced in index order.
template <PolicyModel Model>
Vector score_gradient(const Model& model, std::span<const Episode<typename Model::Tape>> episodes, bool use_baseline) {
  if (episodes.empty()) throw ParameterError("score_gradient: empty batch");
  const double t = static_cast<double>(episodes.size());
  double baseline = 0.0;
  if (use_baseline) {
    for (const auto& e : episodes) baseline += e.cost;
    baseline /= t;
  }
  Vector grad;
  for (const auto& e : episodes) {
    const double weight = (e.cost - baseline) / t;
    if (weight == 0.0 && grad.size() != 0) continue;
    const Matrix upstream = weight * log_density_grad(e.logits, e.actions);
    Vector g = model.backward(e.tape, upstream);
    if (grad.size() == 0) {
      grad = std::move(g);
    } else {
      grad += g;
    }
  }
  return grad;
}

}  // namespace chanalloc
