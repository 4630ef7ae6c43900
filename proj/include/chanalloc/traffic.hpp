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

// Per-AP traffic demand sampling: d_i = max(N(mean, stddev), 0), i.i.d.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>

#include "chanalloc/errors.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/random.hpp"

namespace chanalloc {

using DemandVector = Vector;

struct DemandModel {
  double mean = 0.8;
  double stddev = 0.4;

  void validate() const {
    if (!(stddev > 0.0)) throw ParameterError("DemandModel: stddev must be positive");
  }
};

inline DemandVector sample_demands(const DemandModel& model, int n, Rng& rng) {
  model.validate();
  if (n < 1) throw ParameterError("sample_demands: n must be >= 1");
  DemandVector d(n);
  for (int i = 0; i < n; ++i) d[i] = std::max(rng.normal(model.mean, model.stddev), 0.0);
  return d;
}

/// One sampler per worker; the stream is never shared.
class DemandSampler {
 public:
  DemandSampler(DemandModel model, std::uint64_t seed) : model_(model), rng_(seed) { model_.validate(); }

  DemandVector sample(int n) { return sample_demands(model_, n, rng_); }

  const DemandModel& model() const noexcept { return model_; }

 private:
  DemandModel model_;
  Rng rng_;
};

/// CSV row: run id, sample id, d_0..d_{n-1}.
inline void write_demand_csv_header(std::ostream& os, int n) {
  os << "run_id,sample_id";
  for (int i = 0; i < n; ++i) os << ",d_" << i;
  os << '\n';
}

inline void write_demand_csv_row(std::ostream& os, const std::string& run_id, std::int64_t sample_id,
                                 const DemandVector& d) {
  os << run_id << ',' << sample_id;
  char buf[32];
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", d[i]);
    os << ',' << buf;
  }
  os << '\n';
}

}  // namespace chanalloc
