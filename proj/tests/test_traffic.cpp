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

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "chanalloc/traffic.hpp"
#include "oracles.hpp"

namespace chanalloc {
namespace {

TEST(Demands, NonNegativeAndFinite) {
  Rng rng(1);
  for (int s = 0; s < 1000; ++s) {
    const DemandVector d = sample_demands(DemandModel{}, 20, rng);
    EXPECT_GE(d.minCoeff(), 0.0);
    EXPECT_TRUE(d.allFinite());
  }
}

TEST(Demands, DegenerateModelConcentratesOnMean) {
  Rng rng(2);
  const DemandVector d = sample_demands(DemandModel{0.8, 1e-12}, 100, rng);
  EXPECT_LT((d.array() - 0.8).abs().maxCoeff(), 1e-10);
}

TEST(Demands, RejectsNonPositiveStddev) {
  Rng rng(0);
  EXPECT_THROW(sample_demands(DemandModel{0.8, 0.0}, 3, rng), ParameterError);
  EXPECT_THROW(DemandSampler(DemandModel{0.8, -1.0}, 0), ParameterError);
}

TEST(Demands, SeedDeterminism) {
  DemandSampler a(DemandModel{}, 42), b(DemandModel{}, 42), c(DemandModel{}, 43);
  const DemandVector x = a.sample(10);
  EXPECT_EQ(x, b.sample(10));
  EXPECT_NE(x, c.sample(10));
}

TEST(Demands, RectifiedMomentsMatchQuadrature) {
  const double mu = 0.8, rho = 0.4;
  // Closed form mu Phi(mu/rho) + rho phi(mu/rho) and the quadrature agree.
  const double z = mu / rho;
  const double closed = mu * 0.5 * std::erfc(-z / std::sqrt(2.0)) + rho * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  const auto [qmean, qvar] = testing::rectified_moments(mu, rho);
  EXPECT_NEAR(qmean, closed, 1e-9);

  Rng rng(3);
  const int samples = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double d = sample_demands(DemandModel{mu, rho}, 1, rng)[0];
    sum += d;
    sumsq += d * d;
  }
  const double mean = sum / samples;
  const double var = sumsq / samples - mean * mean;
  EXPECT_NEAR(mean, closed, 3.0 * std::sqrt(qvar / samples));
  EXPECT_NEAR(var, qvar, 0.01 * qvar);
}

TEST(Demands, CsvRowHoldsExactValues) {
  DemandVector d(2);
  d << 0.1, 1.0 / 3.0;
  std::ostringstream os;
  write_demand_csv_header(os, 2);
  write_demand_csv_row(os, "r1", 7, d);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "run_id,sample_id,d_0,d_1");
  const auto last = row.rfind(',');
  EXPECT_EQ(std::stod(row.substr(last + 1)), 1.0 / 3.0);
}

}  // namespace
}  // namespace chanalloc
