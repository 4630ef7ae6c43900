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

// Interference model, worst-channel utilization, and the two scalar objectives.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "chanalloc/errors.hpp"
#include "chanalloc/net_graph.hpp"
#include "chanalloc/traffic.hpp"

namespace chanalloc {

using ChannelMask = std::uint32_t;
inline constexpr int kMaxChannels = 16;

/// Per-AP channel masks; bit l of mask i is c_{i,l}. Every AP holds at least
/// one channel.
class ChannelSelection {
 public:
  ChannelSelection() = default;
  ChannelSelection(int channels, std::vector<ChannelMask> masks) : channels_(channels), masks_(std::move(masks)) {
    if (channels < 1 || channels > kMaxChannels) throw ParameterError("ChannelSelection: channel count out of range");
    const ChannelMask full = (ChannelMask{1} << channels) - 1;
    for (ChannelMask m : masks_) {
      if (m == 0) throw ParameterError("ChannelSelection: empty channel selection");
      if ((m & ~full) != 0) throw ParameterError("ChannelSelection: mask uses channels beyond M");
    }
  }

  /// Every AP on the single channel `channel_of[i]`.
  static ChannelSelection single(int channels, const std::vector<int>& channel_of) {
    std::vector<ChannelMask> masks;
    masks.reserve(channel_of.size());
    for (int c : channel_of) {
      if (c < 0 || c >= channels) throw ParameterError("ChannelSelection: channel index out of range");
      masks.push_back(ChannelMask{1} << c);
    }
    return ChannelSelection(channels, std::move(masks));
  }

  int n() const noexcept { return static_cast<int>(masks_.size()); }
  int channels() const noexcept { return channels_; }
  ChannelMask mask(int i) const { return masks_.at(static_cast<std::size_t>(i)); }
  bool bit(int i, int channel) const { return ((mask(i) >> channel) & 1U) != 0; }
  int count(int i) const { return std::popcount(mask(i)); }
  const std::vector<ChannelMask>& masks() const noexcept { return masks_; }

  friend bool operator==(const ChannelSelection&, const ChannelSelection&) = default;

 private:
  int channels_ = 1;
  std::vector<ChannelMask> masks_;
};

/// N(i,j) c_il c_jl d_j / M_j; the i != j restriction is the caller's.
inline double interference_term(double demand_j, bool adjacent, bool c_il, bool c_jl, int channels_j) {
  if (channels_j < 1) throw ContractViolation("interference_term: M_j must be >= 1");
  if (!adjacent || !c_il || !c_jl) return 0.0;
  return demand_j / static_cast<double>(channels_j);
}

/// u_i = max over channels of the summed interference from neighbors on that channel.
inline Vector channel_utilization(const DemandVector& d, const Topology& topo, const ChannelSelection& sel) {
  const int n = topo.n();
  if (d.size() != n || sel.n() != n) throw ParameterError("channel_utilization: dimension mismatch");
  Vector u = Vector::Zero(n);
  std::vector<double> load(static_cast<std::size_t>(sel.channels()));
  for (int i = 0; i < n; ++i) {
    std::fill(load.begin(), load.end(), 0.0);
    const ChannelMask mi = sel.mask(i);
    for (int j : topo.neighbors(i)) {
      const ChannelMask shared = mi & sel.mask(j);
      if (shared == 0) continue;
      const double share = d[j] / static_cast<double>(sel.count(j));
      for (int l = 0; l < sel.channels(); ++l) {
        if ((shared >> l) & 1U) load[static_cast<std::size_t>(l)] += share;
      }
    }
    u[i] = *std::max_element(load.begin(), load.end());
  }
  return u;
}

/// Model-free boundary: the trainer sees interference only through this shape.
using UtilizationFn = std::function<Vector(const DemandVector&, const Topology&, const ChannelSelection&)>;

inline UtilizationFn default_utilization() {
  return [](const DemandVector& d, const Topology& t, const ChannelSelection& c) {
    return channel_utilization(d, t, c);
  };
}

enum class Objective { mean, max };

inline std::string to_string(Objective o) { return o == Objective::mean ? "mean" : "max"; }

inline Objective parse_objective(const std::string& s) {
  if (s == "mean") return Objective::mean;
  if (s == "max") return Objective::max;
  throw ParameterError("unknown objective: " + s);
}

/// (1/N) sum_i d_i u_i.
inline double weighted_mean_objective(const DemandVector& d, const Vector& u) {
  if (d.size() != u.size()) throw ParameterError("weighted_mean_objective: length mismatch");
  return d.dot(u) / static_cast<double>(d.size());
}

/// max_i d_i u_i.
inline double weighted_max_objective(const DemandVector& d, const Vector& u) {
  if (d.size() != u.size()) throw ParameterError("weighted_max_objective: length mismatch");
  return d.cwiseProduct(u).maxCoeff();
}

inline double objective_value(Objective kind, const DemandVector& d, const Vector& u) {
  return kind == Objective::mean ? weighted_mean_objective(d, u) : weighted_max_objective(d, u);
}

struct ColoringResult {
  bool achievable = false;
  std::optional<ChannelSelection> witness;
};

inline constexpr int kOracleMaxNodes = 20;

/// Backtracking search for a proper coloring with `channels` colors, so that
/// each AP holds one channel and no neighbors share one. Nodes are colored in
/// descending-degree order; the first node is pinned to color 0.
inline ColoringResult zero_interference_oracle(const Topology& topo, int channels) {
  const int n = topo.n();
  if (n > kOracleMaxNodes) throw RefusalError("zero_interference_oracle: n exceeds the search guard");
  if (channels < 1 || channels > kMaxChannels) throw ParameterError("zero_interference_oracle: bad channel count");

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return topo.degree(a) > topo.degree(b); });

  std::vector<int> color(static_cast<std::size_t>(n), -1);
  // Symmetry breaking: a node may open at most one color beyond those in use.
  std::function<bool(int, int)> place = [&](int pos, int used) -> bool {
    if (pos == n) return true;
    const int v = order[static_cast<std::size_t>(pos)];
    const int limit = std::min(channels, used + 1);
    for (int c = 0; c < limit; ++c) {
      bool ok = true;
      for (int w : topo.neighbors(v)) {
        if (color[static_cast<std::size_t>(w)] == c) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      color[static_cast<std::size_t>(v)] = c;
      if (place(pos + 1, std::max(used, c + 1))) return true;
      color[static_cast<std::size_t>(v)] = -1;
    }
    return false;
  };

  ColoringResult result;
  if (place(0, 0)) {
    result.achievable = true;
    result.witness = ChannelSelection::single(channels, color);
  }
  return result;
}

/// n x M grid of 0/1, one AP per line.
inline void write_selection_csv(std::ostream& os, const ChannelSelection& sel) {
  for (int i = 0; i < sel.n(); ++i) {
    for (int l = 0; l < sel.channels(); ++l) {
      if (l > 0) os << ',';
      os << (sel.bit(i, l) ? '1' : '0');
    }
    os << '\n';
  }
}

inline ChannelSelection read_selection_csv(std::istream& is) {
  std::vector<ChannelMask> masks;
  int channels = -1;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    ChannelMask m = 0;
    int l = 0;
    while (std::getline(ss, cell, ',')) {
      if (cell == "1") {
        m |= ChannelMask{1} << l;
      } else if (cell != "0") {
        throw LoadError("selection CSV: cells must be 0 or 1");
      }
      ++l;
    }
    if (channels < 0) channels = l;
    if (l != channels) throw LoadError("selection CSV: ragged rows");
    masks.push_back(m);
  }
  if (channels < 1) throw LoadError("selection CSV: empty grid");
  return ChannelSelection(channels, std::move(masks));
}

}  // namespace chanalloc
