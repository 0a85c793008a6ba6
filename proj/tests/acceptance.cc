// Copyright 2026 The j2k Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "j2k/cli.h"
#include "j2k/dataflow.h"
#include "j2k/manifests.h"
#include "j2k/notebook.h"
#include "j2k/sim.h"
#include "json.hpp"
#include "test_support.h"

namespace {

namespace fs = std::filesystem;
using j2k::testing::Fixture;
using j2k::testing::ReadText;

struct Check {
  bool ok = true;
  std::ostringstream why;

  template <typename A, typename B>
  void Eq(const A& actual, const B& expected, const std::string& what) {
    if (actual == expected) return;
    if (ok) why << what << ": got " << actual << ", want " << expected;
    ok = false;
  }
  void True(bool cond, const std::string& what) {
    if (cond) return;
    if (ok) why << what;
    ok = false;
  }
};

int failures = 0;

void Criterion(int number, const std::string& name, double budget_ms, const std::function<void(Check&)>& body) {
  Check check;
  auto start = std::chrono::steady_clock::now();
  try {
    body(check);
  } catch (const std::exception& e) {
    check.True(false, std::string("exception: ") + e.what());
  }
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  check.True(ms < budget_ms, "over time budget");
  std::ostringstream timing;
  timing.precision(1);
  timing << std::fixed << ms << " ms";
  std::cout << (check.ok ? "PASS" : "FAIL") << " criterion " << number << ": " << name << " ("
            << timing.str() << (check.ok ? "" : "; " + check.why.str()) << ")\n";
  if (!check.ok) ++failures;
}

fs::path Scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("j2k_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int Cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return j2k::RunCli(args, out, err);
}

std::map<std::string, std::string> Tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = ReadText(entry.path());
  }
  return files;
}

std::vector<nlohmann::json> ReadEvents(const fs::path& path) {
  std::vector<nlohmann::json> events;
  std::istringstream lines(ReadText(path));
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) events.push_back(nlohmann::json::parse(line));
  }
  return events;
}

struct World {
  j2k::StepGraph graph;
  j2k::ManifestBundle bundle;
};

World TranslateInProcess(const j2k::Notebook& nb, bool hpa) {
  World w;
  w.graph = j2k::BuildStepGraph(j2k::ExtractMarkers(nb));
  j2k::EnvironmentSpec env;
  w.bundle = j2k::BuildBundle(j2k::PlanPods(w.graph, env), j2k::StorageFromEnvironment(env),
                              j2k::BundleOptionsFromEnvironment(env, hpa));
  return w;
}

void TemplateFidelity(Check& c) {
  j2k::PodPlan plan;
  plan.pod_name = "step1";
  plan.image_name = "j2k-step1";
  plan.tag = "latest";
  YAML::Node d = YAML::Load(j2k::RenderDeployment(plan));
  YAML::Node spec = d["spec"];
  YAML::Node container = spec["template"]["spec"]["containers"][0];
  c.Eq(spec["replicas"].as<int>(), 3, "replicas");
  c.Eq(spec["strategy"]["type"].as<std::string>(), "RollingUpdate", "strategy");
  c.Eq(spec["strategy"]["rollingUpdate"]["maxUnavailable"].as<int>(), 1, "maxUnavailable");
  c.Eq(spec["strategy"]["rollingUpdate"]["maxSurge"].as<int>(), 1, "maxSurge");
  c.Eq(container["image"].as<std::string>(), "j2k-step1:latest", "image");
  c.Eq(container["resources"]["limits"]["cpu"].as<std::string>(), "1", "limits.cpu");
  c.Eq(container["resources"]["limits"]["memory"].as<std::string>(), "1Gi", "limits.memory");
  c.Eq(container["resources"]["requests"]["cpu"].as<std::string>(), "500m", "requests.cpu");
  c.Eq(container["resources"]["requests"]["memory"].as<std::string>(), "500Mi", "requests.memory");
  c.Eq(container["livenessProbe"]["httpGet"]["path"].as<std::string>(), "/healthz", "liveness path");
  c.Eq(container["livenessProbe"]["httpGet"]["port"].as<int>(), 8080, "liveness port");
  c.Eq(container["readinessProbe"]["httpGet"]["path"].as<std::string>(), "/readiness", "readiness path");
  c.Eq(container["readinessProbe"]["httpGet"]["port"].as<int>(), 8080, "readiness port");
  c.Eq(container["volumeMounts"][0]["mountPath"].as<std::string>(), "/mnt/efs", "mountPath");
  c.Eq(spec["template"]["spec"]["volumes"][0]["persistentVolumeClaim"]["claimName"].as<std::string>(),
       "step1-efs-pvc", "claimName");
  c.Eq(container["env"][0]["name"].as<std::string>(), "KAFKA_BROKER", "first env name");
  c.Eq(container["env"][0]["value"].as<std::string>(), "my-broker-address", "first env value");
}

void OracleEquivalence(Check& c) {
  j2k::testing::NotebookGenerator gen(4242);
  for (int n = 0; n < 200 && c.ok; ++n) {
    auto spec = gen.Next(n % 3 == 0);
    j2k::StepGraph g =
        j2k::BuildStepGraph(j2k::ExtractMarkers(j2k::ParseNotebook(j2k::testing::ToIpynb(spec))));
    std::set<j2k::testing::EdgeTuple> got;
    for (const auto& e : g.edges) got.insert({e.from, e.to, e.var});
    c.True(got.size() == g.edges.size(), "duplicate edge in notebook " + std::to_string(n));
    c.True(got == j2k::testing::Oracle(spec).edges, "edge mismatch in notebook " + std::to_string(n));
  }
}

void FaultTolerance(Check& c) {
  fs::path dir = Scratch("faults");
  const std::string out = (dir / "out").string();
  c.Eq(Cli({"translate", "--notebook", Fixture("linear3.ipynb").string(), "--out", out}), 0, "translate");
  const std::string faults = Fixture("kill2.yml").string();
  c.Eq(Cli({"simulate", "--out", out, "--ticks", "40", "--seed", "0", "--faults", faults}), 0, "simulate exit");
  std::string first = ReadText(dir / "out" / "events.jsonl");

  std::map<std::string, int> killed, replaced;
  for (const auto& e : ReadEvents(dir / "out" / "events.jsonl")) {
    if (e["kind"] == "PodKilled") ++killed[e["deployment"]];
    if (e["kind"] == "PodReplaced") ++replaced[e["deployment"]];
  }
  c.Eq(killed.size(), 3u, "deployments hit by faults");
  for (const auto& [dep, n] : killed) {
    c.Eq(n, 2, "pods killed in " + dep);
    c.True(replaced[dep] >= 1, "no replacement in " + dep);
  }
  c.Eq(Cli({"simulate", "--out", out, "--ticks", "40", "--seed", "0", "--faults", faults}), 0, "rerun exit");
  c.True(ReadText(dir / "out" / "events.jsonl") == first, "seed 0 rerun differs");
  fs::remove_all(dir);
}

// Pod counts are rebuilt from the event trace alone.
void RollingUpdateSafety(Check& c) {
  World w = TranslateInProcess(j2k::ParseNotebook(ReadText(Fixture("linear3.ipynb"))), true);
  auto state = j2k::sim::AttachWorkflow(j2k::sim::ApplyBundle(j2k::sim::NewCluster(), w.bundle), w.graph);
  auto faults = j2k::sim::ParseFaultScript(ReadText(Fixture("rolling.yml")));
  state = j2k::sim::Advance(std::move(state), 40, faults);
  const std::string dep = "step-1-deployment";
  const auto& d = state.deployments.at(dep);
  c.Eq(d.desired_replicas, 3, "desired");

  std::set<std::string> pods, ready;
  bool updating = false, started = false, finished = false;
  int peak_total = 0, worst_unavailable = 0;
  auto close_tick = [&] {
    if (!updating) return;
    peak_total = std::max(peak_total, static_cast<int>(pods.size()));
    worst_unavailable = std::max(worst_unavailable, 3 - static_cast<int>(ready.size()));
  };
  std::int64_t tick = 0;
  for (const auto& e : state.events) {
    if (e.tick != tick) {
      close_tick();
      tick = e.tick;
    }
    if (e.deployment != dep) continue;
    if (e.kind == "PodCreated" || e.kind == "PodReplaced") pods.insert(e.pod);
    if (e.kind == "PodDeleted" || e.kind == "PodKilled" || e.kind == "PodRemoved") {
      pods.erase(e.pod);
      ready.erase(e.pod);
    }
    if (e.kind == "PodReady") ready.insert(e.pod);
    if (e.kind == "PodNotReady") ready.erase(e.pod);
    if (e.kind == "RollingUpdateStarted") updating = started = true;
    if (e.kind == "RollingUpdateCompleted") {
      close_tick();
      updating = false;
      finished = true;
    }
  }
  close_tick();
  c.True(started && finished, "update did not start and finish");
  c.True(worst_unavailable <= 1, "unavailable reached " + std::to_string(worst_unavailable));
  c.True(peak_total <= 4, "total pods reached " + std::to_string(peak_total));
  c.Eq(static_cast<int>(pods.size()), 3, "pods after update");
}

void HpaBounds(Check& c) {
  World w = TranslateInProcess(j2k::ParseNotebook(ReadText(Fixture("linear3.ipynb"))), true);
  auto state = j2k::sim::AttachWorkflow(j2k::sim::ApplyBundle(j2k::sim::NewCluster(), w.bundle), w.graph);
  auto faults = j2k::sim::ParseFaultScript(ReadText(Fixture("cpu.yml")));
  const std::string dep = "step-1-deployment";
  int previous = state.deployments.at(dep).desired_replicas, peak = previous;
  int evaluations = 0;
  for (int t = 0; t < 120; ++t) {
    state = j2k::sim::Advance(std::move(state), 1, faults);
    int now = state.deployments.at(dep).desired_replicas;
    c.True(now >= 3 && now <= 10, "desired left [3, 10] at tick " + std::to_string(state.clock));
    c.True(std::abs(now - previous) <= 1, "jump larger than 1 at tick " + std::to_string(state.clock));
    evaluations += state.clock % j2k::sim::kHpaPeriodTicks == 0 ? 1 : 0;
    peak = std::max(peak, now);
    previous = now;
  }
  c.True(evaluations > 0, "no evaluations");
  c.Eq(peak, 10, "peak replicas under 100% cpu");
  c.Eq(previous, 3, "replicas after cpu drops to 10%");
}

void Determinism(Check& c) {
  fs::path dir = Scratch("determinism");
  const std::string nb = Fixture("pipeline.ipynb").string();
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  c.Eq(Cli({"translate", "--notebook", nb, "--out", a}), 0, "translate a");
  c.Eq(Cli({"translate", "--notebook", nb, "--out", b}), 0, "translate b");
  c.True(Tree(a) == Tree(b), "translate trees differ");
  const std::string faults = Fixture("pipeline_faults.yml").string();
  c.Eq(Cli({"simulate", "--out", a, "--seed", "11", "--faults", faults}), 0, "simulate a");
  c.Eq(Cli({"simulate", "--out", b, "--seed", "11", "--faults", faults}), 0, "simulate b");
  std::string ea = ReadText(dir / "a" / "events.jsonl");
  c.True(!ea.empty() && ea == ReadText(dir / "b" / "events.jsonl"), "events.jsonl differ");
  fs::remove_all(dir);
}

void BundleClosure(Check& c) {
  j2k::testing::NotebookGenerator gen(777);
  for (int n = 0; n < 50 && c.ok; ++n) {
    World w = TranslateInProcess(j2k::ParseNotebook(j2k::testing::ToIpynb(gen.Next(n % 2 == 0))), n % 4 != 3);
    std::map<std::string, YAML::Node> pvs, pvcs;
    std::vector<YAML::Node> deployments, services;
    for (const auto& doc : w.bundle.documents) {
      YAML::Node node = YAML::Load(doc.yaml_text);
      std::string kind = node["kind"].as<std::string>();
      std::string name = node["metadata"]["name"].as<std::string>();
      if (kind == "PersistentVolume") pvs[name] = node;
      if (kind == "PersistentVolumeClaim") pvcs[name] = node;
      if (kind == "Deployment") deployments.push_back(node);
      if (kind == "Service") services.push_back(node);
    }
    const std::string where = " (graph " + std::to_string(n) + ")";
    c.Eq(deployments.size(), w.graph.steps.size(), "deployments" + where);
    for (const auto& d : deployments) {
      std::string claim = d["spec"]["template"]["spec"]["volumes"][0]["persistentVolumeClaim"]["claimName"]
                              .as<std::string>();
      c.True(pvcs.contains(claim), "dangling claim " + claim + where);
    }
    std::set<std::string> used;
    for (const auto& [name, pvc] : pvcs) {
      bool bound = false;
      for (const auto& [pv_name, pv] : pvs) {
        if (used.contains(pv_name)) continue;
        if (pv["spec"]["storageClassName"].as<std::string>() != pvc["spec"]["storageClassName"].as<std::string>()) continue;
        if (pv["spec"]["capacity"]["storage"].as<std::string>() !=
            pvc["spec"]["resources"]["requests"]["storage"].as<std::string>()) continue;
        if (pv["spec"]["accessModes"][0].as<std::string>() != pvc["spec"]["accessModes"][0].as<std::string>()) continue;
        used.insert(pv_name);
        bound = true;
        break;
      }
      c.True(bound, "claim " + name + " has no volume" + where);
    }
    for (const auto& s : services) {
      int matches = 0;
      for (const auto& d : deployments) {
        matches += d["spec"]["template"]["metadata"]["labels"]["app"].as<std::string>() ==
                   s["spec"]["selector"]["app"].as<std::string>();
      }
      c.Eq(matches, 1, "deployments selected by " + s["metadata"]["name"].as<std::string>() + where);
    }
    auto applied = j2k::sim::ApplyBundle(j2k::sim::NewCluster(), w.bundle);
    c.Eq(applied.bindings.size(), pvcs.size(), "simulator bindings" + where);
  }
}

}  // namespace

int main() {
  Criterion(1, "deployment template fidelity", 1000, TemplateFidelity);
  Criterion(2, "dataflow oracle equivalence over 200 notebooks", 5000, OracleEquivalence);
  Criterion(3, "fault tolerance on linear3 with 2 of 3 pods killed per deployment", 1000, FaultTolerance);
  Criterion(4, "rolling update safety from the event trace", 1000, RollingUpdateSafety);
  Criterion(5, "autoscaler bounds under 100% then 10% cpu", 1000, HpaBounds);
  Criterion(6, "determinism of translate trees and simulate event logs", 2000, Determinism);
  Criterion(7, "bundle closure over 50 random graphs", 2000, BundleClosure);
  return failures == 0 ? 0 : 1;
}
