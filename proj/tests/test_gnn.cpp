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

#include <cstring>

#include <gtest/gtest.h>

#include "chanalloc/checkpoint.hpp"
#include "chanalloc/checks.hpp"
#include "chanalloc/dist_exec.hpp"
#include "chanalloc/gnn.hpp"
#include "oracles.hpp"

namespace chanalloc {
namespace {

Topology path3() { return Topology(3, {{0, 1}, {1, 2}}); }

Vector x123() { return (Vector(3) << 1, 2, 3).finished(); }

GnnParams random_params(const GnnArch& arch, std::uint64_t seed) {
  Rng rng(seed);
  GnnParams p = GnnParams::init(arch, rng);
  for (Eigen::Index a = 0; a < p.bias.size(); ++a) p.bias[a] = rng.normal(0.0, 1.0);
  return p;
}

TEST(Gcf, IdentityFilter) {
  const ShiftMatrix s = build_shift(path3(), ShiftNorm::none);
  EXPECT_EQ(gcf_apply({1, 0, 0, 0}, s, x123()), x123());
}

TEST(Gcf, ShiftOnlyFilter) {
  const ShiftMatrix s = build_shift(path3(), ShiftNorm::none);
  EXPECT_EQ(gcf_apply({0, 1, 0, 0}, s, x123()), (Vector(3) << 2, 4, 2).finished());
}

TEST(Gcf, MixedFilterMatchesDensePowers) {
  const ShiftMatrix s = build_shift(path3(), ShiftNorm::none);
  EXPECT_EQ(gcf_apply({0.5, 0.5, 0, 0}, s, x123()), (Vector(3) << 1.5, 3, 2.5).finished());
  const Matrix dense = testing::dense_shift(path3(), ShiftNorm::none);
  const std::vector<double> h{0.3, -1.2, 0.7, 2.0};
  const Vector ref = (h[0] * Matrix::Identity(3, 3) + h[1] * dense + h[2] * dense * dense + h[3] * dense * dense * dense) * x123();
  EXPECT_LT((gcf_apply(h, s, x123()) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gcf, DimensionMismatchThrows) {
  EXPECT_THROW(gcf_apply({1.0}, build_shift(path3()), Vector::Zero(2)), ParameterError);
}

TEST(Arch, CountsAndValidation) {
  const GnnArch arch;
  EXPECT_EQ(arch.tap_count(), static_cast<std::size_t>(4 * (1 * 32 + 32 * 64 + 64 * 64 + 64 * 32)));
  EXPECT_EQ(arch.parameter_count(), arch.tap_count() + 32 * 15 + 15);
  GnnArch bad;
  bad.features = {};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.features = {3, 0};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.features = {3};
  bad.order = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(parse_activation("tanh"), ParameterError);
}

TEST(Forward, ZeroNetworkGivesZeroLogits) {
  const GnnParams p = GnnParams::zeros(GnnArch{});
  const Topology t = gen_er_graph(8, 0.5, 1);
  const Matrix logits = gnn_forward(p, build_shift(t), Vector::LinSpaced(8, 0.1, 0.8)).logits;
  EXPECT_EQ(logits, Matrix::Zero(8, 15));
}

TEST(Forward, ZeroInputIsFixedPoint) {
  const GnnParams p = random_params(GnnArch{}, 3);
  GnnParams nobias = p;
  nobias.bias.setZero();
  const Topology t = gen_er_graph(8, 0.5, 1);
  EXPECT_EQ(gnn_forward(nobias, build_shift(t), Vector::Zero(8)).logits, Matrix::Zero(8, 15));
}

TEST(Forward, IdentityCompositionPassesSignal) {
  GnnArch arch{{1}, 3, Activation::relu, 1, true, ShiftNorm::max_degree};
  GnnParams p = GnnParams::zeros(arch);
  p.tap(0, 0, 0, 0) = 1.0;
  p.readout(0, 0) = 1.0;
  const Topology t = gen_er_graph(6, 0.5, 2);
  const Vector x = Vector::LinSpaced(6, 0.0, 1.5);
  EXPECT_EQ(Vector(gnn_forward(p, build_shift(t), x).logits.col(0)), x);
}

TEST(Forward, MatchesDenseReimplementation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Topology t = gen_er_graph(6, 0.5, seed);
    for (Activation act : {Activation::relu, Activation::abs, Activation::identity}) {
      for (ShiftNorm norm : {ShiftNorm::none, ShiftNorm::max_degree, ShiftNorm::spectral}) {
        GnnArch arch;
        arch.nonlinearity = act;
        arch.norm = norm;
        arch.features = {4, 5, 3};
        const GnnParams p = random_params(arch, seed + 100);
        Rng rng(seed);
        const DemandVector d = sample_demands(DemandModel{}, 6, rng);
        const Matrix got = gnn_forward(p, build_shift(t, norm), d).logits;
        const Matrix ref = testing::dense_forward(p, testing::dense_shift(t, norm), d);
        EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-10) << "seed " << seed;
      }
    }
  }
}

TEST(Forward, ReplayIsBitIdentical) {
  const GnnParams p = random_params(GnnArch{}, 4);
  const Topology t = gen_er_graph(10, 0.4, 4);
  const ShiftMatrix s = build_shift(t);
  const Vector d = Vector::LinSpaced(10, 0.2, 1.4);
  const GnnOutput a = gnn_forward(p, s, d);
  const GnnOutput b = gnn_forward(p, s, d);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.tape.last * p.readout + Matrix::Ones(10, 1) * p.bias.transpose(), a.logits);
}

TEST(Forward, ShapeMismatchIsConfigError) {
  GnnParams p = random_params(GnnArch{}, 1);
  p.taps[1] = Matrix::Zero(3, 3);
  EXPECT_THROW(gnn_forward(p, build_shift(path3()), x123()), ConfigError);
  const GnnParams ok = random_params(GnnArch{}, 1);
  EXPECT_THROW(gnn_forward(ok, build_shift(path3()), Vector::Zero(4)), ConfigError);
}

TEST(Equivariance, PermutedInputsPermuteOutputs) {
  const CheckReport r = equivariance_check();
  EXPECT_EQ(r.cases, 100);
  EXPECT_TRUE(r.pass) << r.detail << " worst " << r.worst;
}

TEST(Equivariance, UnnormalizedShiftRelativeToScale) {
  EquivarianceOptions o;
  o.norms = {ShiftNorm::none};
  o.relative = true;
  o.tolerance = 1e-12;
  const CheckReport r = equivariance_check(o);
  EXPECT_TRUE(r.pass) << r.detail << " worst " << r.worst;
}

TEST(Locality, PathOfThirty) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < 30; ++i) edges.emplace_back(i, i + 1);
  const Topology path(30, edges);
  const GnnParams p = random_params(GnnArch{}, 7);
  const ShiftMatrix s = build_shift(path);
  Vector d = Vector::Constant(30, 0.8);
  const Matrix base = gnn_forward(p, s, d).logits;
  Vector far = d;
  far[13] += 1.0;
  EXPECT_EQ(gnn_forward(p, s, far).logits.row(0), base.row(0));
  Vector near = d;
  near[12] += 1.0;
  EXPECT_NE(gnn_forward(p, s, near).logits.row(0), base.row(0));
  const LocalityCertificate cert = locality_certificate(path, p, 0, d);
  EXPECT_EQ(cert.radius, 12);
  EXPECT_TRUE(cert.verified);
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  const GnnParams p = random_params(GnnArch{}, 5);
  const Topology t = gen_er_graph(7, 0.5, 5);
  const ShiftMatrix s = build_shift(t);
  const GnnOutput out = gnn_forward(p, s, Vector::LinSpaced(7, 0.1, 1.0));
  EXPECT_EQ(gnn_backward(p, out.tape, Matrix::Zero(7, 15)).flatten(), Vector::Zero(static_cast<Eigen::Index>(p.size())));
}

TEST(Backward, FiniteDifferencesOnSmallNet) {
  const CheckReport r = gradcheck();
  EXPECT_EQ(r.cases, 20);
  EXPECT_TRUE(r.pass) << r.detail << " worst " << r.worst;
}

TEST(Backward, FiniteDifferencesAcrossActivationsAndNorms) {
  for (Activation act : {Activation::identity, Activation::abs}) {
    for (ShiftNorm norm : {ShiftNorm::none, ShiftNorm::spectral}) {
      GradCheckOptions o;
      o.instances = 5;
      o.arch.nonlinearity = act;
      o.arch.norm = norm;
      o.arch.features = {3, 4, 2};
      const CheckReport r = gradcheck(o);
      EXPECT_TRUE(r.pass) << r.detail << " worst " << r.worst;
    }
  }
}

TEST(Backward, LinearReadoutGradientIsClosedForm) {
  GnnArch arch{{3, 2}, 2, Activation::identity, 3, true, ShiftNorm::max_degree};
  const GnnParams p = random_params(arch, 8);
  const Topology t = gen_er_graph(5, 0.6, 8);
  const ShiftMatrix s = build_shift(t);
  const Vector d = Vector::LinSpaced(5, 0.3, 1.1);
  const GnnOutput out = gnn_forward(p, s, d);
  Matrix up(5, 3);
  up << 1, 0, 2, -1, 3, 0.5, 0, 0, 1, 2, -2, 1, 0.25, 1, -1;
  const GnnParams g = gnn_backward(p, out.tape, up);
  // Final features by explicit linear algebra: x_L = sum_k S^k x_{L-1} H_k.
  const Matrix dense = testing::dense_shift(t, ShiftNorm::max_degree);
  Matrix x = d;
  for (int l = 0; l < arch.layers(); ++l) {
    Matrix next = Matrix::Zero(5, arch.out_features(l));
    Matrix power = Matrix::Identity(5, 5);
    for (int k = 0; k <= arch.order; ++k) {
      next += power * x * p.taps[static_cast<std::size_t>(l)].middleRows(k * arch.in_features(l), arch.in_features(l));
      power = power * dense;
    }
    x = next;
  }
  for (int f = 0; f < 2; ++f) {
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(g.readout(f, a), x.col(f).dot(up.col(a)), 1e-12);
  }
  EXPECT_LT((g.bias - up.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Backward, StaleTapeIsContractViolation) {
  const GnnParams p = random_params(GnnArch{}, 9);
  const GnnParams other = p;
  const ShiftMatrix s = build_shift(path3());
  const GnnOutput out = gnn_forward(p, s, x123());
  EXPECT_THROW(gnn_backward(other, out.tape, Matrix::Zero(3, 15)), ContractViolation);
  EXPECT_THROW(gnn_backward(p, out.tape, Matrix::Zero(3, 14)), ContractViolation);
  EXPECT_THROW(gnn_backward(p, ForwardTape{}, Matrix::Zero(3, 15)), ContractViolation);
}

TEST(Params, FlattenRoundTripAndCanonicalOrder) {
  GnnArch arch{{2, 3}, 1, Activation::relu, 2, true, ShiftNorm::max_degree};
  const GnnParams p = random_params(arch, 10);
  GnnParams q = GnnParams::zeros(arch);
  q.unflatten(p.flatten());
  EXPECT_EQ(q.flatten(), p.flatten());
  const Vector flat = p.flatten();
  EXPECT_EQ(flat[0], p.tap(0, 0, 0, 0));
  EXPECT_EQ(flat[1], p.tap(0, 0, 0, 1));
  EXPECT_EQ(flat[2], p.tap(0, 1, 0, 0));
  EXPECT_EQ(flat[static_cast<Eigen::Index>(arch.tap_count())], p.readout(0, 0));
  EXPECT_EQ(flat[static_cast<Eigen::Index>(arch.tap_count()) + 1], p.readout(1, 0));
  EXPECT_EQ(flat[flat.size() - 1], p.bias[1]);
  EXPECT_THROW(q.unflatten(Vector::Zero(3)), ConfigError);
}

TEST(Params, InitIsBoundedAndSeeded) {
  const GnnArch arch;
  Rng a(1), b(1);
  const GnnParams p = GnnParams::init(arch, a);
  EXPECT_EQ(p.flatten(), GnnParams::init(arch, b).flatten());
  for (int l = 0; l < arch.layers(); ++l) {
    const double bound = std::sqrt(1.0 / (arch.in_features(l) * (arch.order + 1)));
    EXPECT_LE(p.taps[static_cast<std::size_t>(l)].cwiseAbs().maxCoeff(), bound);
  }
  EXPECT_EQ(p.bias, Vector::Zero(15));
}

TEST(Checkpoint, RoundTripIsBitwise) {
  GnnArch arch;
  arch.norm = ShiftNorm::spectral;
  arch.readout_bias = false;
  arch.nonlinearity = Activation::abs;
  const GnnParams p = random_params(arch, 11);
  const std::string blob = serialize_params(p);
  const GnnParams back = deserialize_params(blob);
  EXPECT_EQ(back.arch, arch);
  const Vector a = p.flatten(), b = back.flatten();
  EXPECT_EQ(std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)), 0);
  EXPECT_EQ(serialize_params(back), blob);
}

TEST(Checkpoint, TruncationIsLoadError) {
  const std::string blob = serialize_params(random_params(GnnArch{}, 12));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, std::size_t{40}, blob.size() - 8, blob.size() - 1}) {
    EXPECT_THROW(deserialize_params(blob.substr(0, cut)), LoadError) << cut;
  }
  EXPECT_THROW(deserialize_params(blob + std::string(8, '\0')), LoadError);
}

TEST(Checkpoint, BadMagicAndVersion) {
  std::string blob = serialize_params(random_params(GnnArch{}, 13));
  std::string magic = blob;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_params(magic), LoadError);
  std::string version = blob;
  version[4] = 2;
  EXPECT_THROW(deserialize_params(version), LoadError);
}

TEST(Checkpoint, HeaderShapeDisagreementIsLoadError) {
  GnnArch k2;
  k2.order = 2;
  const GnnParams p = random_params(k2, 14);
  nlohmann::ordered_json header = arch_to_json(k2);
  header["K"] = 3;
  EXPECT_THROW(deserialize_params(encode_checkpoint(header, p.flatten())), LoadError);
  nlohmann::ordered_json other = arch_to_json(k2);
  other["kind"] = "dnn";
  EXPECT_THROW(deserialize_params(encode_checkpoint(other, p.flatten())), LoadError);
}

}  // namespace
}  // namespace chanalloc
