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

// AP interference graphs and their graph shift operators.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chanalloc/errors.hpp"
#include "chanalloc/random.hpp"

namespace chanalloc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Edge = std::pair<int, int>;

/// Undirected simple graph over APs 0..n-1. Edges are stored once as (i, j)
/// with i < j, sorted lexicographically.
class Topology {
 public:
  Topology() = default;

  Topology(int n, std::vector<Edge> edges, double q = 0.0, std::uint64_t seed = 0)
      : n_(n), q_(q), seed_(seed) {
    if (n < 1) throw ParameterError("Topology: n must be >= 1");
    for (auto [a, b] : edges) {
      if (a == b) throw ParameterError("Topology: self-loop");
      if (a < 0 || b < 0 || a >= n || b >= n) throw ParameterError("Topology: edge index out of range");
      edges_.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    neighbors_.assign(static_cast<std::size_t>(n), {});
    for (auto [a, b] : edges_) {
      neighbors_[static_cast<std::size_t>(a)].push_back(b);
      neighbors_[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
  }

  int n() const noexcept { return n_; }
  double q() const noexcept { return q_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  /// Sorted neighbor ids of `i`.
  const std::vector<int>& neighbors(int i) const { return neighbors_.at(static_cast<std::size_t>(i)); }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  int max_degree() const noexcept {
    int m = 0;
    for (const auto& nb : neighbors_) m = std::max(m, static_cast<int>(nb.size()));
    return m;
  }

  bool adjacent(int i, int j) const {
    const auto& nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  /// Hop distances from `source`; unreachable nodes get -1.
  std::vector<int> hop_distances(int source) const {
    std::vector<int> dist(static_cast<std::size_t>(n_), -1);
    std::queue<int> frontier;
    dist[static_cast<std::size_t>(source)] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int v : neighbors(u)) {
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          frontier.push(v);
        }
      }
    }
    return dist;
  }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  int n_ = 0;
  double q_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
};

/// Erdos-Renyi G(n, q): pairs (i, j), i < j, visited in lexicographic order,
/// each kept when a uniform draw falls below q.
inline Topology gen_er_graph(int n, double q, std::uint64_t seed) {
  if (n < 1) throw ParameterError("gen_er_graph: n must be >= 1");
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("gen_er_graph: q must lie in [0, 1]");
  Rng rng(derive_seed(seed, 0x6772617068ULL));
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < q) edges.emplace_back(i, j);
    }
  }
  return Topology(n, std::move(edges), q, seed);
}

enum class ShiftNorm { none, max_degree, spectral };

inline std::string to_string(ShiftNorm norm) {
  switch (norm) {
    case ShiftNorm::none: return "none";
    case ShiftNorm::max_degree: return "max-degree";
    case ShiftNorm::spectral: return "spectral";
  }
  return "none";
}

inline ShiftNorm parse_shift_norm(const std::string& s) {
  if (s == "none") return ShiftNorm::none;
  if (s == "max-degree") return ShiftNorm::max_degree;
  if (s == "spectral") return ShiftNorm::spectral;
  throw ParameterError("unknown shift normalization: " + s);
}

/// Symmetric, zero-diagonal shift operator held as sorted per-row neighbor
/// lists. Every nonzero entry corresponds to a graph edge.
class ShiftMatrix {
 public:
  struct Entry {
    int col;
    double weight;
  };

  ShiftMatrix() = default;
  ShiftMatrix(int n, std::vector<std::vector<Entry>> rows, ShiftNorm norm)
      : n_(n), rows_(std::move(rows)), norm_(norm) {}

  int n() const noexcept { return n_; }
  ShiftNorm norm() const noexcept { return norm_; }
  const std::vector<Entry>& row(int i) const { return rows_.at(static_cast<std::size_t>(i)); }

  double at(int i, int j) const {
    for (const auto& e : row(i)) {
      if (e.col == j) return e.weight;
    }
    return 0.0;
  }

  Matrix dense() const {
    Matrix s = Matrix::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) {
      for (const auto& e : row(i)) s(i, e.col) = e.weight;
    }
    return s;
  }

 private:
  int n_ = 0;
  std::vector<std::vector<Entry>> rows_;
  ShiftNorm norm_ = ShiftNorm::none;
};

namespace detail {

// Largest-magnitude eigenvalue of a nonnegative symmetric adjacency. Iterates
// on A + I so that the Perron root is strictly dominant even on bipartite
// graphs, where A alone has the eigenpair -lambda_max.
inline double perron_root(const Topology& topo, double rel_tol = 1e-10, int max_iter = 200000) {
  const int n = topo.n();
  if (topo.edge_count() == 0) return 0.0;
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double mu = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = v;
    for (int i = 0; i < n; ++i) {
      for (int j : topo.neighbors(i)) w[i] += v[j];
    }
    const double next = v.dot(w);
    w.normalize();
    v = std::move(w);
    if (it > 0 && std::abs(next - mu) <= rel_tol * std::abs(next)) {
      mu = next;
      break;
    }
    mu = next;
  }
  return mu - 1.0;
}

}  // namespace detail

/// Binary adjacency, optionally divided by the max degree or the Perron root.
/// A zero scale (no edges) is replaced by 1.
inline ShiftMatrix build_shift(const Topology& topo, ShiftNorm norm = ShiftNorm::max_degree) {
  double scale = 1.0;
  if (norm == ShiftNorm::max_degree) {
    scale = static_cast<double>(topo.max_degree());
  } else if (norm == ShiftNorm::spectral) {
    scale = detail::perron_root(topo);
  }
  if (scale <= 0.0) scale = 1.0;
  const double w = 1.0 / scale;
  std::vector<std::vector<ShiftMatrix::Entry>> rows(static_cast<std::size_t>(topo.n()));
  for (int i = 0; i < topo.n(); ++i) {
    for (int j : topo.neighbors(i)) rows[static_cast<std::size_t>(i)].push_back({j, w});
  }
  return ShiftMatrix(topo.n(), std::move(rows), norm);
}

/// S x via neighbor lists.
inline Vector apply_shift(const ShiftMatrix& s, const Vector& x) {
  if (x.size() != s.n()) throw ParameterError("apply_shift: dimension mismatch");
  Vector y = Vector::Zero(s.n());
  for (int i = 0; i < s.n(); ++i) {
    double acc = 0.0;
    for (const auto& e : s.row(i)) acc += e.weight * x[e.col];
    y[i] = acc;
  }
  return y;
}

/// S X for a multi-feature signal (one column per feature).
inline Matrix apply_shift(const ShiftMatrix& s, const Matrix& x) {
  if (x.rows() != s.n()) throw ParameterError("apply_shift: dimension mismatch");
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (int i = 0; i < s.n(); ++i) {
    for (const auto& e : s.row(i)) y.row(i) += e.weight * x.row(e.col);
  }
  return y;
}

/// Node relabeling. As a matrix P has P[i, perm[i]] = 1, so (P x)_i = x_perm[i]
/// and (P S P^T)_ij = S_perm[i],perm[j].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> perm) : perm_(std::move(perm)) {
    std::vector<bool> seen(perm_.size(), false);
    for (int p : perm_) {
      if (p < 0 || p >= static_cast<int>(perm_.size()) || seen[static_cast<std::size_t>(p)]) {
        throw ParameterError("Permutation: index array is not a bijection");
      }
      seen[static_cast<std::size_t>(p)] = true;
    }
  }

  static Permutation identity(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    return Permutation(std::move(p));
  }

  static Permutation swap(int n, int a, int b) {
    auto p = identity(n).perm_;
    std::swap(p.at(static_cast<std::size_t>(a)), p.at(static_cast<std::size_t>(b)));
    return Permutation(std::move(p));
  }

  /// Fisher-Yates shuffle on the platform-stable stream.
  static Permutation random(int n, Rng& rng) {
    auto p = identity(n).perm_;
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return Permutation(std::move(p));
  }

  int size() const noexcept { return static_cast<int>(perm_.size()); }
  int operator[](int i) const { return perm_.at(static_cast<std::size_t>(i)); }
  const std::vector<int>& indices() const noexcept { return perm_; }

  Permutation inverse() const {
    std::vector<int> inv(perm_.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) inv[static_cast<std::size_t>(perm_[i])] = static_cast<int>(i);
    return Permutation(std::move(inv));
  }

  Matrix matrix() const {
    Matrix p = Matrix::Zero(size(), size());
    for (int i = 0; i < size(); ++i) p(i, perm_[static_cast<std::size_t>(i)]) = 1.0;
    return p;
  }

 private:
  std::vector<int> perm_;
};

inline void check_size(const Permutation& p, int n, const char* what) {
  if (p.size() != n) throw ParameterError(std::string(what) + ": permutation size mismatch");
}

/// P x.
inline Vector permute(const Vector& x, const Permutation& p) {
  check_size(p, static_cast<int>(x.size()), "permute");
  Vector y(x.size());
  for (int i = 0; i < p.size(); ++i) y[i] = x[p[i]];
  return y;
}

/// P X: permutes rows of a node-by-feature matrix.
inline Matrix permute_rows(const Matrix& x, const Permutation& p) {
  check_size(p, static_cast<int>(x.rows()), "permute_rows");
  Matrix y(x.rows(), x.cols());
  for (int i = 0; i < p.size(); ++i) y.row(i) = x.row(p[i]);
  return y;
}

/// P S P^T.
inline Matrix permute(const Matrix& s, const Permutation& p) {
  check_size(p, static_cast<int>(s.rows()), "permute");
  Matrix y(s.rows(), s.cols());
  for (int i = 0; i < p.size(); ++i) {
    for (int j = 0; j < p.size(); ++j) y(i, j) = s(p[i], p[j]);
  }
  return y;
}

/// Topology whose adjacency is P A P^T.
inline Topology permute(const Topology& topo, const Permutation& p) {
  check_size(p, topo.n(), "permute");
  const Permutation inv = p.inverse();
  std::vector<Edge> edges;
  edges.reserve(topo.edge_count());
  for (auto [a, b] : topo.edges()) edges.emplace_back(inv[a], inv[b]);
  return Topology(topo.n(), std::move(edges), topo.q(), topo.seed());
}

/// P S P^T keeping the shift's weights and normalization tag.
inline ShiftMatrix permute(const ShiftMatrix& s, const Permutation& p) {
  check_size(p, s.n(), "permute");
  const Permutation inv = p.inverse();
  std::vector<std::vector<ShiftMatrix::Entry>> rows(static_cast<std::size_t>(s.n()));
  for (int i = 0; i < s.n(); ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    for (const auto& e : s.row(p[i])) r.push_back({inv[e.col], e.weight});
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.col < b.col; });
  }
  return ShiftMatrix(s.n(), std::move(rows), s.norm());
}

// JSON: {"n", "q", "seed", "edges"} in that key order, edges sorted.
inline std::string topology_to_json(const Topology& topo) {
  nlohmann::ordered_json j;
  j["n"] = topo.n();
  j["q"] = topo.q();
  j["seed"] = topo.seed();
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (auto [a, b] : topo.edges()) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  return j.dump();
}

inline Topology topology_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("topology JSON: ") + e.what());
  }
  try {
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return Topology(j.at("n").get<int>(), std::move(edges), j.value("q", 0.0), j.value("seed", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("topology JSON: ") + e.what());
  }
}

}  // namespace chanalloc
