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

// First-order optimizers over flat parameter vectors.

#pragma once

#include <cmath>
#include <string>

#include "chanalloc/errors.hpp"
#include "chanalloc/net_graph.hpp"

namespace chanalloc {

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ParameterError("unknown optimizer: " + s);
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(step >= 0.0)) throw ParameterError("optimizer: step size must be >= 0");
    if (kind == OptimizerKind::adam && !(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
      throw ParameterError("optimizer: invalid adaptive-moment hyperparameters");
    }
  }
};

/// Descent step x <- x - step * direction(g). SGD uses direction = g; the
/// adaptive variant uses bias-corrected first/second moment estimates.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  void step(Vector& params, const Vector& grad) {
    if (grad.size() != params.size()) throw ContractViolation("optimizer: gradient length differs from parameters");
    if (cfg_.kind == OptimizerKind::sgd) {
      params -= cfg_.step * grad;
      return;
    }
    if (m_.size() == 0) {
      m_ = Vector::Zero(params.size());
      v_ = Vector::Zero(params.size());
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= cfg_.step * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
  }

  const OptimizerConfig& config() const noexcept { return cfg_; }

 private:
  OptimizerConfig cfg_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace chanalloc
