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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "chanalloc/harness.hpp"

namespace chanalloc {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(GitHash, MatchesGitBlobHash) {
  // git hash-object on a file holding "hello\n"
  EXPECT_EQ(git_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Scenarios, PresetsAndUnknownNames) {
  for (const auto& name : scenario_names()) {
    const ExperimentSpec s = scenario_spec(name, 7);
    EXPECT_EQ(s.seeds.size(), 10U);
    EXPECT_EQ(s.seeds.front(), 7U);
    s.validate();
  }
  EXPECT_EQ(scenario_spec("fig4-nodes").nodes, (std::vector<int>{10, 15, 20, 25, 30}));
  EXPECT_EQ(scenario_spec("fig3-small").policies.size(), 3U);
  EXPECT_EQ(scenario_spec("fig5-objectives").objectives.size(), 2U);
  EXPECT_EQ(scenario_spec("gnn-vs-dnn").edge_probs.back(), 1.0);
  EXPECT_THROW(scenario_spec("fig9"), ParameterError);
}

TEST(Config, JsonRoundTripAndOverrides) {
  TrainConfig c;
  c.iterations = 17;
  c.optimizer.kind = OptimizerKind::sgd;
  c.optimizer.step = 0.25;
  c.objective = Objective::max;
  c.norm = ShiftNorm::spectral;
  c.action_mode = ActionMode::single;
  c.features = {5, 6};
  c.nonlinearity = Activation::abs;
  c.init_gain = 2.0;
  TrainConfig back;
  apply_json(back, nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());

  TrainConfig partial;
  apply_json(partial, nlohmann::json::parse(R"({"batch": 3})"));
  EXPECT_EQ(partial.batch, 3);
  EXPECT_EQ(partial.iterations, TrainConfig{}.iterations);
  EXPECT_THROW(apply_json(partial, nlohmann::json::parse(R"({"batch": "many"})")), ConfigError);
  EXPECT_THROW(apply_json(partial, nlohmann::json::parse(R"({"action_mode": "pairs"})")), ParameterError);

  ExperimentSpec s = scenario_spec("fig4-edges");
  ExperimentSpec sb;
  apply_json(sb, nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(sb).dump(), to_json(s).dump());
}

ExperimentSpec tiny_spec(const std::filesystem::path& out) {
  ExperimentSpec s = scenario_spec("custom", 0, 2);
  s.nodes = {5};
  s.edge_probs = {0.5};
  s.policies = {PolicyKind::gnn, PolicyKind::dnn, PolicyKind::relaxed, PolicyKind::random};
  s.eval_samples = 20;
  s.workers = 2;
  s.train.iterations = 3;
  s.train.batch = 4;
  s.train.features = {3};
  s.train.dnn_hidden = {4};
  s.out_dir = out.string();
  return s;
}

TEST(Experiment, ByteReproducibleArtifacts) {
  const auto root = std::filesystem::temp_directory_path() / "chanalloc_harness_test";
  std::filesystem::remove_all(root);
  const RunRecord a = run_experiment(tiny_spec(root / "a"));
  const RunRecord b = run_experiment(tiny_spec(root / "b"));
  EXPECT_TRUE(a.complete);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  for (const char* f : {"runs.csv", "sweep.csv", "curves.csv", "gap.csv", "record.json"}) {
    const std::string x = slurp(root / "a" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(root / "b" / f)) << f;
  }
  for (const char* f : {"runs.csv", "sweep.csv", "curves.csv", "gap.csv"}) {
    const std::string x = slurp(root / "a" / f);
    EXPECT_EQ(x.rfind("# spec_hash=" + a.spec_hash + "\n", 0), 0U) << f;
  }
  ASSERT_EQ(a.summaries.size(), 4U);
  for (const auto& s : a.summaries) EXPECT_EQ(s.finals.size(), 2U);
  std::filesystem::remove_all(root);
}

TEST(Experiment, FailingJobsAreRecordedAndRunContinues) {
  ExperimentSpec s = tiny_spec({});
  s.out_dir.clear();
  s.nodes = {5, kOracleMaxNodes + 1};  // colorability guard refuses the larger size
  s.require_colorable = true;
  s.policies = {PolicyKind::random};
  const RunRecord r = run_experiment(s);
  EXPECT_FALSE(r.complete);
  int failed = 0;
  for (const auto& j : r.jobs) failed += !j.ok;
  EXPECT_EQ(failed, 2);
  EXPECT_EQ(r.to_json()["failures"].size(), 2U);
  EXPECT_EQ(r.summaries.front().finals.size(), 2U);
}

TEST(Experiment, InvalidSpecRejected) {
  ExperimentSpec s;
  s.seeds.clear();
  EXPECT_THROW(run_experiment(s), ParameterError);
}

TEST(Experiment, ColorableTopologiesAreCertified) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Topology t = experiment_topology(10, 0.25, seed, true, 4);
    EXPECT_TRUE(zero_interference_oracle(t, 4).achievable);
  }
  EXPECT_EQ(experiment_topology(10, 0.25, 3, false, 4), gen_er_graph(10, 0.25, 3));
}

}  // namespace
}  // namespace chanalloc
