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

// Independent reference implementations used only by the tests: dense
// matrices and explicit powers instead of neighbor lists and recursions.

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "chanalloc/gnn.hpp"
#include "chanalloc/net_graph.hpp"

namespace chanalloc::testing {

inline Matrix dense_adjacency(const Topology& topo) {
  Matrix a = Matrix::Zero(topo.n(), topo.n());
  for (auto [i, j] : topo.edges()) a(i, j) = a(j, i) = 1.0;
  return a;
}

/// Normalization computed from the dense adjacency; the spectral case uses
/// the symmetric eigensolver.
inline Matrix dense_shift(const Topology& topo, ShiftNorm norm) {
  const Matrix a = dense_adjacency(topo);
  double scale = 1.0;
  if (norm == ShiftNorm::max_degree) scale = a.rowwise().sum().maxCoeff();
  if (norm == ShiftNorm::spectral) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    scale = es.eigenvalues().cwiseAbs().maxCoeff();
  }
  if (scale == 0.0) scale = 1.0;
  return a / scale;
}

inline Matrix dense_activate(Activation act, const Matrix& x) {
  switch (act) {
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::abs: return x.cwiseAbs();
    case Activation::identity: return x;
  }
  return x;
}

/// Straight-line forward: for each layer, output f = act(sum_g sum_k h^{fg}_k S^k x_g).
inline Matrix dense_forward(const GnnParams& p, const Matrix& s, const Vector& x0) {
  const GnnArch& arch = p.arch;
  const int n = static_cast<int>(s.rows());
  std::vector<Matrix> powers{Matrix::Identity(n, n)};
  for (int k = 1; k <= arch.order; ++k) powers.push_back(powers.back() * s);
  Matrix x = x0;
  for (int l = 0; l < arch.layers(); ++l) {
    Matrix next = Matrix::Zero(n, arch.out_features(l));
    for (int f = 0; f < arch.out_features(l); ++f) {
      for (int g = 0; g < arch.in_features(l); ++g) {
        for (int k = 0; k <= arch.order; ++k) next.col(f) += p.tap(l, f, g, k) * (powers[static_cast<std::size_t>(k)] * x.col(g));
      }
    }
    x = dense_activate(arch.nonlinearity, next);
  }
  Matrix logits = Matrix::Zero(n, arch.actions);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < arch.actions; ++a) {
      double z = arch.readout_bias ? p.bias[a] : 0.0;
      for (int f = 0; f < arch.features.back(); ++f) z += x(i, f) * p.readout(f, a);
      logits(i, a) = z;
    }
  }
  return logits;
}

/// Naive log(exp(z_a) / sum exp(z)).
inline double naive_log_prob(const Eigen::RowVectorXd& z, int a) {
  double denom = 0.0;
  for (Eigen::Index b = 0; b < z.size(); ++b) denom += std::exp(z[b]);
  return std::log(std::exp(z[a]) / denom);
}

/// Mean and variance of max(N(mu, sigma), 0) by composite Simpson quadrature.
inline std::pair<double, double> rectified_moments(double mu, double sigma, int panels = 200000) {
  const double lo = 0.0, hi = mu + 12.0 * sigma;
  const double h = (hi - lo) / panels;
  auto pdf = [&](double x) { return std::exp(-0.5 * (x - mu) * (x - mu) / (sigma * sigma)) / (sigma * std::sqrt(2.0 * M_PI)); };
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    m1 += w * x * pdf(x);
    m2 += w * x * x * pdf(x);
  }
  m1 *= h / 3.0;
  m2 *= h / 3.0;
  return {m1, m2 - m1 * m1};
}

}  // namespace chanalloc::testing
