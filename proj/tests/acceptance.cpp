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

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [criterion...] [--out DIR]
//
// With no criterion numbers every criterion runs. Training-based criteria
// share experiment runs through DIR/<run>/record.json, reused when its spec
// hash matches, so separate invocations do not retrain.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "chanalloc/checks.hpp"
#include "chanalloc/harness.hpp"

namespace fs = std::filesystem;
using namespace chanalloc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_out = "acceptance_out";

// (n, q, objective, policy) -> per-seed finals
using Finals = std::map<std::string, std::vector<double>>;

std::string key(int n, double q, Objective o, PolicyKind p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d/%g/%s/%s", n, q, to_string(o).c_str(), to_string(p).c_str());
  return buf;
}

Finals finals_from(const nlohmann::json& record) {
  Finals f;
  for (const auto& s : record.at("summaries")) {
    f[key(s.at("n").get<int>(), s.at("q").get<double>(), parse_objective(s.at("objective").get<std::string>()),
          parse_policy(s.at("policy").get<std::string>()))] = s.at("finals").get<std::vector<double>>();
  }
  return f;
}

/// Runs `spec` into g_out/name unless a record with the same spec hash exists.
Finals run_cached(const std::string& name, ExperimentSpec spec) {
  const fs::path dir = g_out / name;
  const std::string hash = git_hash(to_json(spec).dump());
  const fs::path rec = dir / "record.json";
  if (fs::exists(rec)) {
    std::ifstream in(rec);
    const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.value("spec_hash", "") == hash && j.value("complete", false)) {
      std::printf("  [%s] reusing %s\n", name.c_str(), rec.c_str());
      return finals_from(j);
    }
  }
  std::printf("  [%s] training (%zu seeds)...\n", name.c_str(), spec.seeds.size());
  std::fflush(stdout);
  spec.out_dir = dir.string();
  const RunRecord r = run_experiment(spec);
  std::printf("  [%s] done in %.0f s\n", name.c_str(), r.wall_seconds);
  if (!r.complete) {
    for (const auto& j : r.jobs) {
      if (!j.ok) std::printf("  [%s] seed %llu failed: %s\n", name.c_str(), static_cast<unsigned long long>(j.seed), j.error.c_str());
    }
  }
  return finals_from(nlohmann::json::parse(r.to_json().dump()));
}

double mean_of(const std::vector<double>& v) { return mean_std(v).first; }

std::string list(const std::vector<double>& v) {
  std::string s;
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%s%.4f", s.empty() ? "" : " ", x);
    s += buf;
  }
  return s;
}

ExperimentSpec fig3_spec() { return scenario_spec("fig3-small", 0, 10); }

// n=20, q=0.5 under both objectives serves criteria 3 and 10; the relaxed
// baseline is not needed there.
ExperimentSpec fig4_spec() {
  ExperimentSpec s = scenario_spec("fig5-objectives", 0, 10);
  s.policies = {PolicyKind::gnn, PolicyKind::dnn, PolicyKind::random};
  return s;
}

ExperimentSpec complete_graph_spec() {
  ExperimentSpec s = scenario_spec("gnn-vs-dnn", 0, 10);
  s.edge_probs = {1.0};
  return s;
}

Outcome criterion1() {
  const Finals f = run_cached("fig3", fig3_spec());
  const auto& gnn = f.at(key(10, 0.25, Objective::mean, PolicyKind::gnn));
  int hits = 0;
  for (double c : gnn) hits += c <= 0.05;
  return {hits >= 8 && gnn.size() == 10, std::to_string(hits) + "/10 seeds <= 0.05; greedy costs [" + list(gnn) + "]"};
}

Outcome criterion2() {
  const Finals f = run_cached("fig3", fig3_spec());
  const double gnn = mean_of(f.at(key(10, 0.25, Objective::mean, PolicyKind::gnn)));
  const double relaxed = mean_of(f.at(key(10, 0.25, Objective::mean, PolicyKind::relaxed)));
  const double random = mean_of(f.at(key(10, 0.25, Objective::mean, PolicyKind::random)));
  const double relaxed_gain = (random - relaxed) / random;
  const double gnn_gain = (random - gnn) / random;
  char buf[200];
  std::snprintf(buf, sizeof buf, "random %.4f relaxed %.4f (gain %.1f%%, need < 10%%) gnn %.4f (gain %.1f%%, need > 80%%)", random,
                relaxed, 100 * relaxed_gain, gnn, 100 * gnn_gain);
  return {relaxed_gain < 0.10 && gnn_gain > 0.80, buf};
}

Outcome criterion3() {
  const Finals f = run_cached("fig4", fig4_spec());
  const double gnn = mean_of(f.at(key(20, 0.5, Objective::mean, PolicyKind::gnn)));
  const double dnn = mean_of(f.at(key(20, 0.5, Objective::mean, PolicyKind::dnn)));
  const double random = mean_of(f.at(key(20, 0.5, Objective::mean, PolicyKind::random)));
  const double rel = (gnn - dnn) / dnn;
  char buf[200];
  std::snprintf(buf, sizeof buf, "dnn %.4f gnn %.4f random %.4f; need dnn <= gnn <= %.4f and gap %.1f%% <= 25%%", dnn, gnn, random,
                0.7 * random, 100 * rel);
  return {dnn <= gnn && gnn <= 0.7 * random && rel <= 0.25, buf};
}

Outcome criterion4() {
  const Finals f = run_cached("complete", complete_graph_spec());
  const double gnn = mean_of(f.at(key(20, 1.0, Objective::mean, PolicyKind::gnn)));
  const double dnn = mean_of(f.at(key(20, 1.0, Objective::mean, PolicyKind::dnn)));
  char buf[160];
  std::snprintf(buf, sizeof buf, "gnn %.4f dnn %.4f |gap| %.4f (need <= 0.05)", gnn, dnn, std::abs(gnn - dnn));
  return {std::abs(gnn - dnn) <= 0.05, buf};
}

Outcome from_report(const CheckReport& r, const char* unit) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d cases, worst %.3g %s (tolerance %.3g)%s%s", r.cases, r.worst, unit, r.tolerance,
                r.detail.empty() ? "" : " at ", r.detail.c_str());
  return {r.pass, buf};
}

Outcome criterion5() { return from_report(equivariance_check(), "max-abs"); }
Outcome criterion6() { return from_report(gradcheck(), "relative"); }
Outcome criterion7() { return from_report(estimator_check(), "standard errors"); }
Outcome criterion8() { return from_report(dist_check(), "max-abs, tallies checked"); }
Outcome criterion9() { return from_report(oracle_check(), "max-abs, colorings exact"); }

Outcome criterion10() {
  const Finals f = run_cached("fig4", fig4_spec());
  const double gnn = mean_of(f.at(key(20, 0.5, Objective::max, PolicyKind::gnn)));
  const double random = mean_of(f.at(key(20, 0.5, Objective::max, PolicyKind::random)));
  const double dnn = mean_of(f.at(key(20, 0.5, Objective::max, PolicyKind::dnn)));
  const double gain = (random - gnn) / random;
  char buf[200];
  std::snprintf(buf, sizeof buf, "max objective: random %.4f gnn %.4f (reduction %.1f%%, need >= 50%%) dnn %.4f", random, gnn,
                100 * gain, dnn);
  return {gain >= 0.5, buf};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      g_out = argv[++i];
      continue;
    }
    char* end = nullptr;
    const long c = std::strtol(a.c_str(), &end, 10);
    if (*end != '\0' || !criteria.count(static_cast<int>(c))) {
      std::fprintf(stderr, "usage: acceptance [1-10 ...] [--out DIR]\n");
      return 1;
    }
    chosen.insert(static_cast<int>(c));
  }
  if (chosen.empty()) {
    for (const auto& [c, fn] : criteria) chosen.insert(c);
  }
  int failures = 0;
  for (int c : chosen) {
    Outcome o;
    try {
      o = criteria.at(c)();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 2;
}
