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

// Decentralized execution of a trained GNN policy.
//
// Every AP runs its own copy of the parameters and sees only its own demand,
// its row of the shift operator, and messages delivered by the bus from direct
// neighbors. Rounds are synchronous: in each shift step all nodes first post
// their current signal to their neighbors, then all nodes drain their inboxes.
// A layer with filter order K costs K rounds; the nonlinearity, tap
// aggregation, readout and action choice are node-local.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chanalloc/errors.hpp"
#include "chanalloc/gnn.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/policy.hpp"
#include "chanalloc/random.hpp"

namespace chanalloc {

class MessageLost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Message {
  int round = 0;
  int sender = 0;
  int receiver = 0;
  std::vector<double> payload;
};

struct TraceRow {
  int round;
  int sender;
  int receiver;
  std::size_t width;
};

/// In-process message bus restricted to the edges of one topology.
class MessageBus {
 public:
  /// Returns true when the message (round, sender, receiver) is lost.
  using LossModel = std::function<bool(int, int, int)>;

  explicit MessageBus(const Topology& topo, LossModel loss = {}) : topo_(&topo), loss_(std::move(loss)) {}

  void send(int round, int sender, int receiver, std::vector<double> payload) {
    if (!topo_->adjacent(sender, receiver)) throw ContractViolation("MessageBus: send along a non-edge");
    ++messages_;
    values_ += payload.size();
    trace_.push_back({round, sender, receiver, payload.size()});
    if (loss_ && loss_(round, sender, receiver)) return;
    pending_[receiver].push_back({round, sender, receiver, std::move(payload)});
  }

  /// Messages addressed to `receiver` for `round`, sorted by sender id.
  std::vector<Message> collect(int round, int receiver) {
    std::vector<Message> out;
    auto it = pending_.find(receiver);
    if (it != pending_.end()) {
      auto& box = it->second;
      auto keep = std::stable_partition(box.begin(), box.end(), [round](const Message& m) { return m.round != round; });
      std::move(keep, box.end(), std::back_inserter(out));
      box.erase(keep, box.end());
    }
    std::sort(out.begin(), out.end(), [](const Message& a, const Message& b) { return a.sender < b.sender; });
    for (const auto& m : out) reads_.emplace_back(receiver, m.sender);
    return out;
  }

  std::size_t messages() const noexcept { return messages_; }
  std::size_t payload_values() const noexcept { return values_; }
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }
  /// (reader, sender) for every delivered message.
  const std::vector<std::pair<int, int>>& reads() const noexcept { return reads_; }

 private:
  const Topology* topo_;
  LossModel loss_;
  std::map<int, std::vector<Message>> pending_;
  std::size_t messages_ = 0;
  std::size_t values_ = 0;
  std::vector<TraceRow> trace_;
  std::vector<std::pair<int, int>> reads_;
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "round,sender,receiver,payload_width\n";
  for (const auto& r : trace) os << r.round << ',' << r.sender << ',' << r.receiver << ',' << r.width << '\n';
}

enum class MissingMessagePolicy { abort, zero };

/// Local view of one AP.
struct NodeState {
  int id = 0;
  double demand = 0.0;
  GnnParams params;                          // private copy of the shared policy
  std::vector<ShiftMatrix::Entry> shift_row;  // [S]_ij for the node's neighbors j
  Eigen::RowVectorXd features;                // current layer signal, F_l values

  /// One synchronous shift step: z_i <- sum_j [S]_ij z_j over delivered messages.
  Eigen::RowVectorXd shift(const std::vector<Message>& inbox, MissingMessagePolicy policy, Eigen::Index width) const {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(width);
    auto msg = inbox.begin();
    for (const auto& e : shift_row) {
      while (msg != inbox.end() && msg->sender < e.col) ++msg;
      if (msg == inbox.end() || msg->sender != e.col) {
        if (policy == MissingMessagePolicy::abort) {
          throw MessageLost("node " + std::to_string(id) + ": no message from neighbor " + std::to_string(e.col));
        }
        continue;
      }
      acc += e.weight * Eigen::Map<const Eigen::RowVectorXd>(msg->payload.data(), width);
    }
    return acc;
  }
};

struct DecentralizedOptions {
  bool greedy = true;
  std::uint64_t seed = 0;  // per-node sampling streams derive from this
  MissingMessagePolicy missing = MissingMessagePolicy::abort;
  MessageBus::LossModel loss;
};

struct MessageTally {
  std::size_t messages = 0;
  std::size_t payload_values = 0;
  std::vector<std::vector<std::size_t>> sent;  // [layer][node] payloads sent
};

struct DecentralizedResult {
  Matrix logits;  // row i computed by node i
  std::vector<int> actions;
  MessageTally tally;
  std::vector<TraceRow> trace;
  std::vector<std::pair<int, int>> reads;
};

/// Closed-form message and payload counts for one forward pass.
inline std::pair<std::size_t, std::size_t> scheduled_message_count(const Topology& topo, const GnnArch& arch) {
  const std::size_t directed = 2 * topo.edge_count();
  std::size_t values = 0;
  for (int l = 0; l < arch.layers(); ++l) values += static_cast<std::size_t>(arch.order) * directed * static_cast<std::size_t>(arch.in_features(l));
  return {static_cast<std::size_t>(arch.layers() * arch.order) * directed, values};
}

/// Runs the policy on every node with neighbor-only communication.
/// `shift` supplies each node's own row (its link weights).
inline DecentralizedResult run_decentralized(const Topology& topo, const ShiftMatrix& shift, const GnnParams& params,
                                             const DemandVector& d, const DecentralizedOptions& opts = {}) {
  params.check_shapes();
  const int n = topo.n();
  if (d.size() != n || shift.n() != n) throw ParameterError("run_decentralized: dimension mismatch");
  const GnnArch& arch = params.arch;

  std::vector<NodeState> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& node = nodes[static_cast<std::size_t>(i)];
    node.id = i;
    node.demand = d[i];
    node.params = params;
    node.shift_row = shift.row(i);
    node.features = Eigen::RowVectorXd::Constant(1, d[i]);
  }

  MessageBus bus(topo, opts.loss);
  MessageTally tally;
  tally.sent.assign(static_cast<std::size_t>(arch.layers()), std::vector<std::size_t>(static_cast<std::size_t>(n), 0));
  int round = 0;
  for (int l = 0; l < arch.layers(); ++l) {
    const Eigen::Index fin = arch.in_features(l);
    std::vector<Eigen::RowVectorXd> stacked(static_cast<std::size_t>(n), Eigen::RowVectorXd(fin * (arch.order + 1)));
    std::vector<Eigen::RowVectorXd> current(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      current[static_cast<std::size_t>(i)] = nodes[static_cast<std::size_t>(i)].features;
      stacked[static_cast<std::size_t>(i)].head(fin) = current[static_cast<std::size_t>(i)];
    }
    for (int k = 1; k <= arch.order; ++k, ++round) {
      for (int i = 0; i < n; ++i) {
        const auto& z = current[static_cast<std::size_t>(i)];
        for (const auto& e : nodes[static_cast<std::size_t>(i)].shift_row) {
          bus.send(round, i, e.col, std::vector<double>(z.data(), z.data() + z.size()));
          ++tally.sent[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
        }
      }
      // barrier
      for (int i = 0; i < n; ++i) {
        const auto inbox = bus.collect(round, i);
        current[static_cast<std::size_t>(i)] = nodes[static_cast<std::size_t>(i)].shift(inbox, opts.missing, fin);
        stacked[static_cast<std::size_t>(i)].segment(k * fin, fin) = current[static_cast<std::size_t>(i)];
      }
    }
    for (int i = 0; i < n; ++i) {
      auto& node = nodes[static_cast<std::size_t>(i)];
      const Matrix pre = stacked[static_cast<std::size_t>(i)] * node.params.taps[static_cast<std::size_t>(l)];
      node.features = activate(arch.nonlinearity, pre);
    }
  }

  DecentralizedResult result;
  result.logits = Matrix(n, arch.actions);
  result.actions.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes[static_cast<std::size_t>(i)];
    Matrix row = node.features * node.params.readout;
    if (arch.readout_bias) row += node.params.bias.transpose();
    result.logits.row(i) = row;
    if (opts.greedy) {
      result.actions[static_cast<std::size_t>(i)] = greedy_actions(row).front();
    } else {
      Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(i)));
      const Matrix probs = softmax(row);
      const double u = rng.uniform();
      double cum = 0.0;
      int pick = arch.actions - 1;
      for (int a = 0; a < arch.actions; ++a) {
        cum += probs(0, a);
        if (u < cum) {
          pick = a;
          break;
        }
      }
      result.actions[static_cast<std::size_t>(i)] = pick;
    }
  }
  tally.messages = bus.messages();
  tally.payload_values = bus.payload_values();
  result.tally = std::move(tally);
  result.trace = bus.trace();
  result.reads = bus.reads();
  return result;
}

inline DecentralizedResult run_decentralized(const Topology& topo, const GnnParams& params, const DemandVector& d,
                                             const DecentralizedOptions& opts = {}) {
  return run_decentralized(topo, build_shift(topo, params.arch.norm), params, d, opts);
}

struct LocalityCertificate {
  int radius = 0;
  bool verified = false;
};

/// Receptive-field radius L*K of `node`, checked by shifting every demand
/// farther than the radius and requiring node's logits to stay bit-identical.
inline LocalityCertificate locality_certificate(const Topology& topo, const GnnParams& params, int node, const DemandVector& d,
                                                double perturbation = 1.0) {
  if (node < 0 || node >= topo.n()) throw ParameterError("locality_certificate: node out of range");
  LocalityCertificate cert;
  cert.radius = params.arch.layers() * params.arch.order;
  const ShiftMatrix s = build_shift(topo, params.arch.norm);
  const Matrix base = gnn_forward(params, s, d).logits;
  DemandVector far = d;
  const auto dist = topo.hop_distances(node);
  for (int j = 0; j < topo.n(); ++j) {
    if (dist[static_cast<std::size_t>(j)] < 0 || dist[static_cast<std::size_t>(j)] > cert.radius) far[j] += perturbation;
  }
  const Matrix moved = gnn_forward(params, s, far).logits;
  cert.verified = (base.row(node).array() == moved.row(node).array()).all();
  return cert;
}

}  // namespace chanalloc
