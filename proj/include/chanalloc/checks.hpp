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

// Self-checks shared by the command-line tool and the acceptance runner. Each
// compares a module operation against an independent computation: central
// finite differences, relabeled inputs, a centralized forward pass, a direct
// triple loop, or full enumeration of a tiny joint action space.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "chanalloc/dist_exec.hpp"
#include "chanalloc/gnn.hpp"
#include "chanalloc/interference.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/policy.hpp"
#include "chanalloc/random.hpp"
#include "chanalloc/traffic.hpp"

namespace chanalloc {

struct CheckReport {
  std::string name;
  bool pass = false;
  double worst = 0.0;      // largest observed deviation, in the check's own unit
  double tolerance = 0.0;
  int cases = 0;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Gradients

struct GradCheckOptions {
  int instances = 20;
  int nodes = 5;
  double edge_prob = 0.5;
  GnnArch arch{{3, 2}, 2, Activation::relu, 3, true, ShiftNorm::max_degree};
  double epsilon = 1e-6;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
};

/// Relative error |a - f| / max(|a|, |f|), taken as 0 when both vanish.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

/// Every parameter of a random small net against a central difference of
/// <logits, upstream>.
inline CheckReport gradcheck(const GradCheckOptions& o = {}) {
  CheckReport r{"gradcheck", true, 0.0, o.tolerance, 0, {}};
  for (int inst = 0; inst < o.instances; ++inst) {
    const std::uint64_t s = derive_seed(o.seed, static_cast<std::uint64_t>(inst));
    const Topology topo = gen_er_graph(o.nodes, o.edge_prob, s);
    const ShiftMatrix shift = build_shift(topo, o.arch.norm);
    Rng rng(derive_seed(s, 1));
    GnnParams params = GnnParams::init(o.arch, rng);
    for (Eigen::Index a = 0; a < params.bias.size(); ++a) params.bias[a] = rng.normal(0.0, 1.0);
    const DemandVector d = sample_demands(DemandModel{}, o.nodes, rng);
    Matrix up(o.nodes, o.arch.actions);
    for (Eigen::Index k = 0; k < up.size(); ++k) up.data()[k] = rng.normal(0.0, 1.0);

    const GnnOutput out = gnn_forward(params, shift, d);
    const Vector analytic = gnn_backward(params, out.tape, up).flatten();
    const Vector flat = params.flatten();
    GnnParams probe = params;
    auto logits_at = [&](const Vector& v) {
      probe.unflatten(v);
      return gnn_forward(probe, shift, d).logits;
    };
    for (Eigen::Index p = 0; p < flat.size(); ++p) {
      Vector plus = flat, minus = flat;
      plus[p] += o.epsilon;
      minus[p] -= o.epsilon;
      // Difference the logits before contracting, and divide by the step
      // actually representable in the parameter; both only remove round-off.
      const Matrix diff = logits_at(plus) - logits_at(minus);
      const double numeric = diff.cwiseProduct(up).sum() / (plus[p] - minus[p]);
      const double err = relative_error(analytic[p], numeric);
      if (err > r.worst) {
        r.worst = err;
        r.detail = "instance " + std::to_string(inst) + " parameter " + std::to_string(p);
      }
    }
    ++r.cases;
  }
  r.pass = r.worst < o.tolerance;
  return r;
}

// ---------------------------------------------------------------------------
// Permutation equivariance

struct EquivarianceOptions {
  int instances = 100;
  int max_nodes = 16;
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
  // The unnormalized shift lets logits grow like deg^(K L); at 1e7 an absolute
  // 1e-9 bound is below double resolution, so it is opt-in and usually paired
  // with a scale-relative deviation.
  std::vector<ShiftNorm> norms = {ShiftNorm::max_degree, ShiftNorm::spectral};
  bool relative = false;  // deviation / max(1, max |logit|)
};

/// gnn_forward(P S P^T, P x) against P gnn_forward(S, x) for random graphs,
/// signals, parameters and relabelings; the architecture varies per instance.
inline CheckReport equivariance_check(const EquivarianceOptions& o = {}) {
  CheckReport r{"equivariance", true, 0.0, o.tolerance, 0, {}};
  const Activation acts[] = {Activation::relu, Activation::abs, Activation::identity};
  if (o.norms.empty()) throw ParameterError("equivariance_check: no shift normalizations");
  for (int inst = 0; inst < o.instances; ++inst) {
    Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(inst)));
    const int n = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(o.max_nodes)));
    const Topology topo = gen_er_graph(n, rng.uniform(), rng.next_u64());
    GnnArch arch;
    arch.features.clear();
    const int layers = 1 + static_cast<int>(rng.uniform_index(4));
    for (int l = 0; l < layers; ++l) arch.features.push_back(1 + static_cast<int>(rng.uniform_index(8)));
    arch.order = static_cast<int>(rng.uniform_index(4));
    arch.nonlinearity = acts[rng.uniform_index(3)];
    arch.norm = o.norms[rng.uniform_index(o.norms.size())];
    arch.actions = 1 + static_cast<int>(rng.uniform_index(15));
    GnnParams params = GnnParams::init(arch, rng);
    for (Eigen::Index a = 0; a < params.bias.size(); ++a) params.bias[a] = rng.normal(0.0, 1.0);
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.normal(0.0, 1.0);
    const Permutation p = Permutation::random(n, rng);

    const ShiftMatrix s = build_shift(topo, arch.norm);
    const Matrix expected = permute_rows(gnn_forward(params, s, x).logits, p);
    const Matrix got = gnn_forward(params, permute(s, p), permute(x, p)).logits;
    double dev = (expected - got).cwiseAbs().maxCoeff();
    if (o.relative) dev /= std::max(1.0, expected.cwiseAbs().maxCoeff());
    if (dev > r.worst) {
      r.worst = dev;
      r.detail = "instance " + std::to_string(inst) + " n=" + std::to_string(n);
    }
    ++r.cases;
  }
  r.pass = r.worst <= o.tolerance;
  return r;
}

// ---------------------------------------------------------------------------
// Decentralized execution

struct DistCheckOptions {
  int instances = 50;
  int nodes = 0;            // 0: drawn per instance from [1, max_nodes]
  int max_nodes = 32;
  double edge_prob = -1.0;  // < 0: drawn per instance from {0.1, ..., 1.0}
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
};

/// Logits from the message-passing run against the centralized forward, and
/// the bus tally against the closed-form schedule. `worst` is the logit
/// deviation; a tally mismatch fails the check on its own.
inline CheckReport dist_check(const DistCheckOptions& o = {}) {
  CheckReport r{"dist-check", true, 0.0, o.tolerance, 0, {}};
  bool tally_ok = true;
  for (int inst = 0; inst < o.instances; ++inst) {
    Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(inst)));
    const int n = o.nodes > 0 ? o.nodes : 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(o.max_nodes)));
    const double q = o.edge_prob >= 0.0 ? o.edge_prob : 0.1 * static_cast<double>(1 + rng.uniform_index(10));
    const Topology topo = gen_er_graph(n, q, rng.next_u64());
    GnnArch arch;
    arch.features = {8, 16, 16, 8};
    GnnParams params = GnnParams::init(arch, rng);
    for (Eigen::Index a = 0; a < params.bias.size(); ++a) params.bias[a] = rng.normal(0.0, 1.0);
    const DemandVector d = sample_demands(DemandModel{}, n, rng);

    const Matrix central = gnn_forward(params, build_shift(topo, arch.norm), d).logits;
    const DecentralizedResult dist = run_decentralized(topo, params, d);
    const double dev = (central - dist.logits).cwiseAbs().maxCoeff();
    if (dev > r.worst) {
      r.worst = dev;
      r.detail = "instance " + std::to_string(inst) + " n=" + std::to_string(n);
    }
    const auto [messages, values] = scheduled_message_count(topo, arch);
    bool counts = dist.tally.messages == messages && dist.tally.payload_values == values;
    for (int l = 0; l < arch.layers(); ++l) {
      for (int i = 0; i < n; ++i) {
        counts = counts && dist.tally.sent[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] ==
                               static_cast<std::size_t>(topo.degree(i) * arch.order);
      }
    }
    for (auto [reader, sender] : dist.reads) counts = counts && topo.adjacent(reader, sender);
    if (!counts && tally_ok) {
      tally_ok = false;
      r.detail = "message tally differs from the schedule at instance " + std::to_string(inst);
    }
    ++r.cases;
  }
  r.pass = tally_ok && r.worst <= o.tolerance;
  return r;
}

// ---------------------------------------------------------------------------
// Interference

/// Direct triple loop over (i, j, l) with the interference term written out.
inline Vector utilization_bruteforce(const DemandVector& d, const Topology& topo, const ChannelSelection& sel) {
  const int n = topo.n();
  Vector u = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    double worst = 0.0;
    for (int l = 0; l < sel.channels(); ++l) {
      double load = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        load += interference_term(d[j], topo.adjacent(i, j), sel.bit(i, l), sel.bit(j, l), sel.count(j));
      }
      worst = std::max(worst, load);
    }
    u[i] = worst;
  }
  return u;
}

/// Exhaustive search over all M^n single-channel assignments.
inline bool colorable_bruteforce(const Topology& topo, int channels) {
  const int n = topo.n();
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  while (true) {
    bool proper = true;
    for (auto [a, b] : topo.edges()) proper = proper && c[static_cast<std::size_t>(a)] != c[static_cast<std::size_t>(b)];
    if (proper) return true;
    int pos = 0;
    while (pos < n && ++c[static_cast<std::size_t>(pos)] == channels) c[static_cast<std::size_t>(pos++)] = 0;
    if (pos == n) return false;
  }
}

struct OracleCheckOptions {
  int instances = 1000;
  int max_nodes = 12;
  int max_channels = 4;
  double tolerance = 1e-12;
  int coloring_instances = 200;  // oracle vs enumeration, n <= 10
  std::uint64_t seed = 0;
};

/// channel_utilization against the triple loop on random instances; proper
/// colorings must cost exactly zero; the backtracking oracle must agree with
/// exhaustive enumeration.
inline CheckReport oracle_check(const OracleCheckOptions& o = {}) {
  CheckReport r{"oracle", true, 0.0, o.tolerance, 0, {}};
  bool exact_ok = true;
  for (int inst = 0; inst < o.instances; ++inst) {
    Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(inst)));
    const int n = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(o.max_nodes)));
    const int m = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(o.max_channels)));
    const Topology topo = gen_er_graph(n, rng.uniform(), rng.next_u64());
    const DemandVector d = sample_demands(DemandModel{}, n, rng);
    std::vector<ChannelMask> masks(static_cast<std::size_t>(n));
    for (auto& mask : masks) mask = static_cast<ChannelMask>(1 + rng.uniform_index((std::uint64_t{1} << m) - 1));
    const ChannelSelection sel(m, masks);
    const double dev = (channel_utilization(d, topo, sel) - utilization_bruteforce(d, topo, sel)).cwiseAbs().maxCoeff();
    if (dev > r.worst) {
      r.worst = dev;
      r.detail = "utilization instance " + std::to_string(inst);
    }
    const ColoringResult col = zero_interference_oracle(topo, m);
    if (col.achievable) {
      const Vector u = channel_utilization(d, topo, *col.witness);
      if (weighted_mean_objective(d, u) != 0.0 || weighted_max_objective(d, u) != 0.0) {
        exact_ok = false;
        r.detail = "proper coloring with nonzero cost at instance " + std::to_string(inst);
      }
    }
    ++r.cases;
  }
  for (int inst = 0; inst < o.coloring_instances; ++inst) {
    Rng rng(derive_seed(o.seed ^ 0xC0108ULL, static_cast<std::uint64_t>(inst)));
    const int n = 1 + static_cast<int>(rng.uniform_index(10));
    const int m = 1 + static_cast<int>(rng.uniform_index(4));
    const Topology topo = gen_er_graph(n, rng.uniform(), rng.next_u64());
    if (zero_interference_oracle(topo, m).achievable != colorable_bruteforce(topo, m)) {
      exact_ok = false;
      r.detail = "coloring oracle disagrees with enumeration at instance " + std::to_string(inst);
    }
    ++r.cases;
  }
  r.pass = exact_ok && r.worst <= o.tolerance;
  return r;
}

// ---------------------------------------------------------------------------
// Estimator

/// Two adjacent APs, two channels (three subset actions each), a one-layer
/// net and fixed demands: small enough to enumerate all nine joint actions.
struct EnumerableInstance {
  Topology topo{2, {{0, 1}}};
  ShiftMatrix shift;
  GnnParams params;
  DemandVector demands;
  ActionSpace space{2, ActionMode::subsets};

  explicit EnumerableInstance(std::uint64_t seed) {
    GnnArch arch{{2}, 1, Activation::relu, 3, true, ShiftNorm::max_degree};
    shift = build_shift(topo, arch.norm);
    Rng rng(seed);
    params = GnnParams::init(arch, rng, 3.0);
    for (Eigen::Index a = 0; a < params.bias.size(); ++a) params.bias[a] = rng.normal(0.0, 1.0);
    demands = Vector(2);
    demands << 1.0, 0.8;
  }

  double cost(int a0, int a1) const {
    const int acts[] = {a0, a1};
    return weighted_mean_objective(demands, channel_utilization(demands, topo, space.selection(acts)));
  }

  /// sum over joint actions of p(joint) R(joint) for the given parameters.
  double expected_cost(const GnnParams& p) const {
    const Matrix prob = softmax(gnn_forward(p, shift, demands).logits);
    double total = 0.0;
    for (int a0 = 0; a0 < 3; ++a0) {
      for (int a1 = 0; a1 < 3; ++a1) total += prob(0, a0) * prob(1, a1) * cost(a0, a1);
    }
    return total;
  }
};

struct EstimatorCheckOptions {
  int samples = 100000;
  double sigmas = 3.0;
  std::uint64_t seed = 0;
};

/// Monte-Carlo mean of R grad log f (baseline off, one episode per sample)
/// against the gradient of the enumerated expectation, by central
/// differences. `worst` is the largest deviation in standard errors.
inline CheckReport estimator_check(const EstimatorCheckOptions& o = {}) {
  CheckReport r{"estimator", true, 0.0, o.sigmas, 0, {}};
  const EnumerableInstance inst(derive_seed(o.seed, 0xE57));
  const Vector flat = inst.params.flatten();
  const Eigen::Index np = flat.size();

  Vector exact(np);
  GnnParams probe = inst.params;
  const double h = 1e-6;
  for (Eigen::Index p = 0; p < np; ++p) {
    Vector v = flat;
    v[p] += h;
    probe.unflatten(v);
    const double up = inst.expected_cost(probe);
    v[p] -= 2.0 * h;
    probe.unflatten(v);
    const double down = inst.expected_cost(probe);
    exact[p] = (up - down) / (2.0 * h);
  }

  const GnnOutput out = gnn_forward(inst.params, inst.shift, inst.demands);
  Rng rng(derive_seed(o.seed, 0x5A3));
  Vector sum = Vector::Zero(np), sumsq = Vector::Zero(np);
  for (int s = 0; s < o.samples; ++s) {
    const PolicySample draw = sample_actions(out.logits, inst.space, rng);
    const double cost = inst.cost(draw.actions[0], draw.actions[1]);
    const Vector g = gnn_backward(inst.params, out.tape, cost * log_density_grad(out.logits, draw.actions)).flatten();
    sum += g;
    sumsq += g.cwiseAbs2();
  }
  const double t = static_cast<double>(o.samples);
  const Vector mean = sum / t;
  for (Eigen::Index p = 0; p < np; ++p) {
    const double var = std::max(0.0, (sumsq[p] / t - mean[p] * mean[p]) * t / (t - 1.0));
    const double se = std::sqrt(var / t);
    const double diff = std::abs(mean[p] - exact[p]);
    // A component with no spread must match outright.
    const double z = se > 0.0 ? diff / se : (diff <= 1e-9 ? 0.0 : INFINITY);
    if (z > r.worst) {
      r.worst = z;
      r.detail = "parameter " + std::to_string(p);
    }
    ++r.cases;
  }
  r.pass = r.worst <= o.sigmas;
  return r;
}

}  // namespace chanalloc
