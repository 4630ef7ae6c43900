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

// Graph convolutional filters and the layered GNN policy backbone.
//
// Layer l maps an n x F_{l-1} signal X to sigma(sum_k S^k X H_k), where H_k is
// the F_{l-1} x F_l slice of tap k. The taps of a layer are kept stacked as a
// single ((K+1) F_{l-1}) x F_l matrix W with row k * F_{l-1} + g and column f
// holding h_{l,k}^{fg}, so the bank is one product [X, SX, ..., S^K X] W.
// A per-node linear readout (shared across nodes) turns the last layer's F_L
// features into A logits.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chanalloc/errors.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/random.hpp"

namespace chanalloc {

enum class Activation { relu, identity, abs };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::abs: return "abs";
  }
  return "relu";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  if (s == "abs") return Activation::abs;
  throw ParameterError("unknown nonlinearity: " + s);
}

inline Matrix activate(Activation a, const Matrix& x) {
  switch (a) {
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::identity: return x;
    case Activation::abs: return x.cwiseAbs();
  }
  return x;
}

// Subgradient 0 at the kink for both relu and abs.
inline Matrix activate_grad(Activation a, const Matrix& pre) {
  switch (a) {
    case Activation::relu: return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::identity: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::abs: return ((pre.array() > 0.0).cast<double>() - (pre.array() < 0.0).cast<double>()).matrix();
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

struct GnnArch {
  std::vector<int> features{32, 64, 64, 32};
  int order = 3;
  Activation nonlinearity = Activation::relu;
  int actions = 15;
  bool readout_bias = true;
  ShiftNorm norm = ShiftNorm::max_degree;

  int layers() const noexcept { return static_cast<int>(features.size()); }
  int in_features(int layer) const { return layer == 0 ? 1 : features.at(static_cast<std::size_t>(layer - 1)); }
  int out_features(int layer) const { return features.at(static_cast<std::size_t>(layer)); }

  void validate() const {
    if (features.empty()) throw ConfigError("GnnArch: at least one layer required");
    if (order < 0) throw ConfigError("GnnArch: filter order must be >= 0");
    if (actions < 1) throw ConfigError("GnnArch: action count must be >= 1");
    for (int f : features) {
      if (f < 1) throw ConfigError("GnnArch: filter counts must be >= 1");
    }
  }

  std::size_t tap_count() const {
    std::size_t total = 0;
    for (int l = 0; l < layers(); ++l) {
      total += static_cast<std::size_t>(in_features(l)) * static_cast<std::size_t>(out_features(l)) *
               static_cast<std::size_t>(order + 1);
    }
    return total;
  }

  std::size_t parameter_count() const {
    const auto fl = static_cast<std::size_t>(features.back());
    const auto a = static_cast<std::size_t>(actions);
    return tap_count() + fl * a + (readout_bias ? a : 0);
  }

  friend bool operator==(const GnnArch&, const GnnArch&) = default;
};

inline nlohmann::ordered_json arch_to_json(const GnnArch& arch) {
  nlohmann::ordered_json j;
  j["kind"] = "gnn";
  j["L"] = arch.layers();
  j["features"] = arch.features;
  j["K"] = arch.order;
  j["nonlinearity"] = to_string(arch.nonlinearity);
  j["A"] = arch.actions;
  j["bias"] = arch.readout_bias;
  j["norm"] = to_string(arch.norm);
  return j;
}

inline GnnArch arch_from_json(const nlohmann::json& j) {
  GnnArch arch;
  try {
    arch.features = j.at("features").get<std::vector<int>>();
    arch.order = j.at("K").get<int>();
    arch.nonlinearity = parse_activation(j.at("nonlinearity").get<std::string>());
    arch.actions = j.at("A").get<int>();
    arch.readout_bias = j.at("bias").get<bool>();
    arch.norm = parse_shift_norm(j.at("norm").get<std::string>());
    if (j.contains("L") && j.at("L").get<int>() != arch.layers()) throw ConfigError("GnnArch: L disagrees with features");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("GnnArch JSON: ") + e.what());
  }
  arch.validate();
  return arch;
}

/// Filter taps for every layer plus the readout head.
struct GnnParams {
  GnnArch arch;
  std::vector<Matrix> taps;  // per layer, ((K+1) F_in) x F_out
  Matrix readout;            // F_L x A
  Vector bias;               // A, or empty without a readout bias

  static GnnParams zeros(const GnnArch& arch) {
    arch.validate();
    GnnParams p;
    p.arch = arch;
    for (int l = 0; l < arch.layers(); ++l) {
      p.taps.push_back(Matrix::Zero((arch.order + 1) * arch.in_features(l), arch.out_features(l)));
    }
    p.readout = Matrix::Zero(arch.features.back(), arch.actions);
    p.bias = arch.readout_bias ? Vector::Zero(arch.actions) : Vector();
    return p;
  }

  /// Taps ~ U[-a, a] with a = gain * sqrt(1 / (F_in (K+1))); readout weights
  /// likewise with fan-in F_L; bias starts at zero.
  static GnnParams init(const GnnArch& arch, Rng& rng, double gain = 1.0) {
    GnnParams p = zeros(arch);
    p.for_each_tensor([&](auto& t, int fan_in) {
      if (fan_in <= 0) return;
      const double a = gain * std::sqrt(1.0 / fan_in);
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, c) = a * (2.0 * rng.uniform() - 1.0);
      }
    });
    return p;
  }

  double& tap(int layer, int f, int g, int k) {
    return taps.at(static_cast<std::size_t>(layer))(k * arch.in_features(layer) + g, f);
  }
  double tap(int layer, int f, int g, int k) const {
    return taps.at(static_cast<std::size_t>(layer))(k * arch.in_features(layer) + g, f);
  }

  std::size_t size() const { return arch.parameter_count(); }

  /// Canonical order: layers, then output f, input g, tap k; readout as
  /// action-major, feature-minor; bias last.
  Vector flatten() const {
    Vector v(static_cast<Eigen::Index>(size()));
    Eigen::Index pos = 0;
    visit_canonical([&](double x) { v[pos++] = x; });
    return v;
  }

  void unflatten(const Vector& v) {
    if (v.size() != static_cast<Eigen::Index>(size())) throw ConfigError("GnnParams: flat vector has wrong length");
    Eigen::Index pos = 0;
    visit_canonical_mut([&](double& x) { x = v[pos++]; });
  }

  /// Raises ConfigError when tensor shapes disagree with the architecture.
  void check_shapes() const {
    arch.validate();
    if (static_cast<int>(taps.size()) != arch.layers()) throw ConfigError("GnnParams: layer count mismatch");
    for (int l = 0; l < arch.layers(); ++l) {
      const auto& w = taps[static_cast<std::size_t>(l)];
      if (w.rows() != (arch.order + 1) * arch.in_features(l) || w.cols() != arch.out_features(l)) {
        throw ConfigError("GnnParams: tap tensor shape mismatch at layer " + std::to_string(l));
      }
    }
    if (readout.rows() != arch.features.back() || readout.cols() != arch.actions) {
      throw ConfigError("GnnParams: readout shape mismatch");
    }
    if (bias.size() != (arch.readout_bias ? arch.actions : 0)) throw ConfigError("GnnParams: bias shape mismatch");
  }

 private:
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (int l = 0; l < arch.layers(); ++l) fn(taps[static_cast<std::size_t>(l)], arch.in_features(l) * (arch.order + 1));
    fn(readout, arch.features.back());
  }

  template <typename Fn>
  void visit_canonical(Fn&& fn) const {
    const_cast<GnnParams*>(this)->visit_canonical_mut([&](double& x) { fn(static_cast<const double&>(x)); });
  }

  template <typename Fn>
  void visit_canonical_mut(Fn&& fn) {
    for (int l = 0; l < arch.layers(); ++l) {
      for (int f = 0; f < arch.out_features(l); ++f) {
        for (int g = 0; g < arch.in_features(l); ++g) {
          for (int k = 0; k <= arch.order; ++k) fn(tap(l, f, g, k));
        }
      }
    }
    for (int a = 0; a < arch.actions; ++a) {
      for (int f = 0; f < arch.features.back(); ++f) fn(readout(f, a));
    }
    for (Eigen::Index a = 0; a < bias.size(); ++a) fn(bias[a]);
  }
};

/// H(S) x = sum_k h_k S^k x, via the recursion z_k = S z_{k-1}.
inline Vector gcf_apply(const std::vector<double>& taps, const ShiftMatrix& s, const Vector& x) {
  if (x.size() != s.n()) throw ParameterError("gcf_apply: dimension mismatch");
  Vector out = Vector::Zero(x.size());
  Vector z = x;
  for (std::size_t k = 0; k < taps.size(); ++k) {
    if (k > 0) z = apply_shift(s, z);
    out += taps[k] * z;
  }
  return out;
}

/// Intermediates of one forward pass. Holds non-owning pointers to the
/// parameters and shift used, which must outlive the tape.
struct ForwardTape {
  const GnnParams* params = nullptr;
  const ShiftMatrix* shift = nullptr;
  std::vector<Matrix> inputs;   // per layer, n x F_in
  std::vector<Matrix> stacked;  // per layer, n x ((K+1) F_in): [X, SX, ..., S^K X]
  std::vector<Matrix> pre;      // per layer, n x F_out
  Matrix last;                  // n x F_L, post-nonlinearity output of the final layer
};

struct GnnOutput {
  Matrix logits;  // n x A
  ForwardTape tape;
};

namespace detail {

inline Matrix shift_stack(const ShiftMatrix& s, const Matrix& x, int order) {
  const Eigen::Index f = x.cols();
  Matrix stacked(x.rows(), f * (order + 1));
  stacked.leftCols(f) = x;
  for (int k = 1; k <= order; ++k) {
    stacked.middleCols(k * f, f) = apply_shift(s, Matrix(stacked.middleCols((k - 1) * f, f)));
  }
  return stacked;
}

}  // namespace detail

inline GnnOutput gnn_forward(const GnnParams& params, const ShiftMatrix& s, const Vector& x0) {
  params.check_shapes();
  if (x0.size() != s.n()) throw ConfigError("gnn_forward: signal length differs from graph size");
  const GnnArch& arch = params.arch;
  GnnOutput out;
  ForwardTape& tape = out.tape;
  tape.params = &params;
  tape.shift = &s;
  Matrix x = x0;
  for (int l = 0; l < arch.layers(); ++l) {
    tape.inputs.push_back(x);
    tape.stacked.push_back(detail::shift_stack(s, x, arch.order));
    tape.pre.push_back(tape.stacked.back() * params.taps[static_cast<std::size_t>(l)]);
    x = activate(arch.nonlinearity, tape.pre.back());
  }
  tape.last = x;
  out.logits = x * params.readout;
  if (arch.readout_bias) out.logits.rowwise() += params.bias.transpose();
  return out;
}

/// Gradient of <logits, upstream> with respect to every parameter.
inline GnnParams gnn_backward(const GnnParams& params, const ForwardTape& tape, const Matrix& upstream) {
  if (tape.params != &params || tape.shift == nullptr) throw ContractViolation("gnn_backward: tape from a different forward call");
  const GnnArch& arch = params.arch;
  const ShiftMatrix& s = *tape.shift;
  if (static_cast<int>(tape.pre.size()) != arch.layers() || tape.last.rows() != s.n()) {
    throw ContractViolation("gnn_backward: tape does not match the parameters");
  }
  if (upstream.rows() != s.n() || upstream.cols() != arch.actions) {
    throw ContractViolation("gnn_backward: upstream shape mismatch");
  }
  GnnParams grad = GnnParams::zeros(arch);
  grad.readout.noalias() = tape.last.transpose() * upstream;
  if (arch.readout_bias) grad.bias = upstream.colwise().sum().transpose();

  Matrix d_post = upstream * params.readout.transpose();
  for (int l = arch.layers() - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const Matrix d_pre = d_post.cwiseProduct(activate_grad(arch.nonlinearity, tape.pre[li]));
    grad.taps[li].noalias() = tape.stacked[li].transpose() * d_pre;
    if (l == 0) break;
    const Matrix d_stacked = d_pre * params.taps[li].transpose();
    // Adjoint of z_k = S z_{k-1} with S^T = S, folded Horner-style.
    const Eigen::Index f = arch.in_features(l);
    Matrix acc = d_stacked.middleCols(arch.order * f, f);
    for (int k = arch.order - 1; k >= 0; --k) {
      acc = apply_shift(s, acc);
      acc += d_stacked.middleCols(k * f, f);
    }
    d_post = std::move(acc);
  }
  return grad;
}

}  // namespace chanalloc
