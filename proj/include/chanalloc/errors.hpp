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

#pragma once

#include <stdexcept>
#include <string>

namespace chanalloc {

/// Invalid argument values (probabilities outside [0, 1], bad indices, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameters or configs whose shapes disagree with the declared architecture.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint or file decoding failures.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values reaching a distribution or the optimizer.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite cost or gradient.
class DivergenceError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// Caller broke a documented precondition that the type system cannot express.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Exponential searches refuse instances above their size guard.
class RefusalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chanalloc
