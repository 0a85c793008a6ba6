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

#include "j2k/sim.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <limits>
#include <tuple>

#include "j2k/deps.h"
#include "j2k/error.h"
#include "json.hpp"

namespace j2k::sim {
namespace {

std::string Hex32(std::uint32_t value) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", value);
  return buf;
}

long double ParseQuantity(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
  if (i == 0) throw Error(ErrorCode::kMalformedDocument, "bad quantity '" + text + "'");
  long double number = std::stold(text.substr(0, i));
  const std::string suffix = text.substr(i);
  static const std::map<std::string, long double> kScale = {
      {"", 1.0L},
      {"Ki", 1024.0L},
      {"Mi", 1024.0L * 1024},
      {"Gi", 1024.0L * 1024 * 1024},
      {"Ti", 1024.0L * 1024 * 1024 * 1024},
      {"Pi", 1024.0L * 1024 * 1024 * 1024 * 1024},
      {"Ei", 1024.0L * 1024 * 1024 * 1024 * 1024 * 1024},
      {"m", 1e-3L},
      {"k", 1e3L},
      {"M", 1e6L},
      {"G", 1e9L},
      {"T", 1e12L},
      {"P", 1e15L},
      {"E", 1e18L},
  };
  auto it = kScale.find(suffix);
  if (it == kScale.end()) throw Error(ErrorCode::kMalformedDocument, "bad quantity '" + text + "'");
  return number * it->second;
}

std::set<std::string> AccessModes(const YAML::Node& node) {
  std::set<std::string> modes;
  if (node && node.IsSequence()) {
    for (const auto& mode : node) modes.insert(mode.as<std::string>());
  }
  return modes;
}

// "25%" style values resolve against the replica count.
int ResolveIntOrPercent(const YAML::Node& node, int replicas, bool round_up, int fallback) {
  if (!node) return fallback;
  std::string text = node.as<std::string>();
  if (!text.empty() && text.back() == '%') {
    double pct = std::stod(text.substr(0, text.size() - 1));
    double value = replicas * pct / 100.0;
    return static_cast<int>(round_up ? std::ceil(value) : std::floor(value));
  }
  return node.as<int>();
}

void Emit(ClusterState& state, std::string kind, std::string deployment = "", std::string pod = "",
          std::string detail = "") {
  state.events.push_back(SimEvent{state.clock, state.next_seq++, std::move(kind),
                                  std::move(deployment), std::move(pod), std::move(detail)});
}

std::vector<PodRuntime*> PodsOf(ClusterState& state, const std::string& deployment) {
  std::vector<PodRuntime*> pods;
  for (auto& [uid, pod] : state.pods) {
    if (pod.owner_deployment == deployment) pods.push_back(&pod);
  }
  return pods;
}

const WorkflowStep* StepFor(const ClusterState& state, const std::string& deployment) {
  for (const WorkflowStep& step : state.workflow) {
    if (step.deployment == deployment) return &step;
  }
  return nullptr;
}

bool InputsAvailable(const ClusterState& state, const std::string& deployment) {
  const WorkflowStep* step = StepFor(state, deployment);
  if (step == nullptr) return true;
  return std::all_of(step->input_paths.begin(), step->input_paths.end(),
                     [&](const std::string& path) { return state.volume.contains(path); });
}

bool StepCompleted(const ClusterState& state, const std::string& deployment) {
  const WorkflowStep* step = StepFor(state, deployment);
  return step != nullptr && state.completed_steps.contains(step->step_id);
}

std::uint64_t CreatePod(ClusterState& state, const DeploymentState& dep, const std::string& kind,
                        const std::string& detail) {
  PodRuntime pod;
  pod.uid = state.next_uid++;
  pod.name = dep.name + "-" + std::to_string(pod.uid);
  pod.owner_deployment = dep.name;
  pod.template_hash = dep.template_hash;
  pod.phase = PodPhase::kPending;
  pod.cpu_utilization_percent = dep.cpu_percent;
  pod.phase_since = state.clock;
  Emit(state, kind, dep.name, pod.name, detail);
  std::uint64_t uid = pod.uid;
  state.pods.emplace(uid, std::move(pod));
  return uid;
}

void AbortExecution(ClusterState& state, PodRuntime& pod, const std::string& why) {
  if (pod.step_progress != StepProgress::kExecuting) return;
  pod.step_progress = StepProgress::kNotStarted;
  pod.remaining_ticks = 0;
  Emit(state, "ExecutionAborted", pod.owner_deployment, pod.name, why);
}

void DeletePod(ClusterState& state, std::uint64_t uid, const std::string& detail) {
  auto it = state.pods.find(uid);
  if (it == state.pods.end()) return;
  AbortExecution(state, it->second, "pod deleted");
  Emit(state, "PodDeleted", it->second.owner_deployment, it->second.name, detail);
  state.pods.erase(it);
}

void SetReady(ClusterState& state, PodRuntime& pod, bool ready) {
  if (pod.ready == ready) return;
  pod.ready = ready;
  Emit(state, ready ? "PodReady" : "PodNotReady", pod.owner_deployment, pod.name);
}

DeploymentState* ResolveDeployment(ClusterState& state, const std::string& name) {
  auto it = state.deployments.find(name);
  if (it == state.deployments.end()) it = state.deployments.find(name + "-deployment");
  return it == state.deployments.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Phase 1

void InjectFault(ClusterState& state, const FaultAction& fault) {
  DeploymentState* dep = ResolveDeployment(state, fault.deployment);
  if (dep == nullptr) {
    Emit(state, "FaultIgnored", fault.deployment, "", "unknown deployment");
    return;
  }
  switch (fault.kind) {
    case FaultKind::kKillPod: {
      std::vector<PodRuntime*> candidates;
      for (PodRuntime* pod : PodsOf(state, dep->name)) {
        if (pod->phase != PodPhase::kFailed) candidates.push_back(pod);
      }
      std::size_t kills = std::min<std::size_t>(std::max(fault.count, 0), candidates.size());
      // Partial Fisher-Yates driven by the seeded engine.
      for (std::size_t i = 0; i < kills; ++i) {
        std::size_t j = i + static_cast<std::size_t>(state.rng() % (candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
      }
      std::vector<PodRuntime*> victims(candidates.begin(), candidates.begin() + static_cast<long>(kills));
      std::sort(victims.begin(), victims.end(),
                [](const PodRuntime* a, const PodRuntime* b) { return a->uid < b->uid; });
      for (PodRuntime* pod : victims) {
        AbortExecution(state, *pod, "pod killed");
        pod->phase = PodPhase::kFailed;
        pod->ready = false;
        Emit(state, "PodKilled", dep->name, pod->name, "fault injection");
      }
      break;
    }
    case FaultKind::kFailLiveness: {
      std::vector<PodRuntime*> live;
      for (PodRuntime* pod : PodsOf(state, dep->name)) {
        if (pod->phase != PodPhase::kFailed) live.push_back(pod);
      }
      if (fault.pod_ordinal < 0 || static_cast<std::size_t>(fault.pod_ordinal) >= live.size()) {
        Emit(state, "FaultIgnored", dep->name, "",
             "no pod at ordinal " + std::to_string(fault.pod_ordinal));
        break;
      }
      PodRuntime* pod = live[static_cast<std::size_t>(fault.pod_ordinal)];
      pod->liveness_fail_until = state.clock + fault.duration_ticks - 1;
      Emit(state, "LivenessFaultInjected", dep->name, pod->name,
           "duration=" + std::to_string(fault.duration_ticks));
      break;
    }
    case FaultKind::kSetCpu: {
      dep->cpu_percent = fault.percent;
      for (PodRuntime* pod : PodsOf(state, dep->name)) pod->cpu_utilization_percent = fault.percent;
      Emit(state, "CpuSet", dep->name, "", std::to_string(fault.percent) + "%");
      break;
    }
    case FaultKind::kTriggerRollingUpdate: {
      std::string::size_type colon = dep->image.rfind(':');
      dep->image = (colon == std::string::npos ? dep->image : dep->image.substr(0, colon)) + ":" +
                   fault.new_tag;
      dep->template_hash = Hex32(Fnv1a32(dep->template_hash + ":" + fault.new_tag));
      dep->updating = true;
      Emit(state, "RollingUpdateStarted", dep->name, "", "image " + dep->image);
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Phase 2

void Reconcile(ClusterState& state, DeploymentState& dep) {
  std::vector<std::string> replaced;
  for (PodRuntime* pod : PodsOf(state, dep.name)) {
    if (pod->phase != PodPhase::kFailed) continue;
    if (dep.updating) Emit(state, "PodRemoved", dep.name, pod->name, "failed");
    else replaced.push_back(pod->name);
    state.pods.erase(pod->uid);
  }
  if (dep.updating) return;  // the rollout owns pod creation

  std::vector<PodRuntime*> pods = PodsOf(state, dep.name);
  int live = static_cast<int>(pods.size());
  for (int i = live; i < dep.desired_replicas; ++i) {
    std::size_t k = static_cast<std::size_t>(i - live);
    if (k < replaced.size()) CreatePod(state, dep, "PodReplaced", "replaces " + replaced[k]);
    else CreatePod(state, dep, "PodCreated", "scale up");
  }
  if (live > dep.desired_replicas) {
    // Least useful pods go first: pending, then unready, then the newest.
    std::sort(pods.begin(), pods.end(), [](const PodRuntime* a, const PodRuntime* b) {
      auto key = [](const PodRuntime* p) {
        return std::make_tuple(p->step_progress == StepProgress::kExecuting,
                               p->phase == PodPhase::kRunning, p->ready,
                               std::numeric_limits<std::uint64_t>::max() - p->uid);
      };
      return key(a) < key(b);
    });
    for (int i = 0; i < live - dep.desired_replicas; ++i) {
      DeletePod(state, pods[static_cast<std::size_t>(i)]->uid, "scale down");
    }
  }
}

// ---------------------------------------------------------------------------
// Phase 4

void Probe(ClusterState& state, PodRuntime& pod) {
  if (pod.phase != PodPhase::kRunning) return;
  if (state.clock <= pod.liveness_fail_until) {
    pod.live = false;
    ++pod.consecutive_liveness_failures;
    Emit(state, "LivenessProbeFailed", pod.owner_deployment, pod.name,
         "consecutive=" + std::to_string(pod.consecutive_liveness_failures));
    if (pod.consecutive_liveness_failures >= kLivenessFailureThreshold) {
      AbortExecution(state, pod, "liveness restart");
      SetReady(state, pod, false);
      pod.phase = PodPhase::kPending;
      pod.phase_since = state.clock;
      pod.consecutive_liveness_failures = 0;
      pod.live = true;
      pod.step_progress = StepProgress::kNotStarted;
      Emit(state, "LivenessRestart", pod.owner_deployment, pod.name,
           "after " + std::to_string(kLivenessFailureThreshold) + " failed probes");
      return;
    }
  } else {
    pod.live = true;
    pod.consecutive_liveness_failures = 0;
  }
  bool inputs = InputsAvailable(state, pod.owner_deployment);
  SetReady(state, pod, pod.live && inputs);
  if (StepCompleted(state, pod.owner_deployment)) {
    pod.step_progress = StepProgress::kDone;
  } else if (!inputs) {
    pod.step_progress = StepProgress::kWaitingInputs;
  } else if (pod.step_progress != StepProgress::kExecuting) {
    pod.step_progress = StepProgress::kNotStarted;
  }
}

// ---------------------------------------------------------------------------
// Phase 5

void RollOut(ClusterState& state, DeploymentState& dep) {
  if (!dep.updating) return;
  const int desired = dep.desired_replicas;
  std::vector<PodRuntime*> fresh, stale;
  for (PodRuntime* pod : PodsOf(state, dep.name)) {
    (pod->template_hash == dep.template_hash ? fresh : stale).push_back(pod);
  }
  if (stale.empty() && static_cast<int>(fresh.size()) >= desired) {
    dep.updating = false;
    Emit(state, "RollingUpdateCompleted", dep.name, "", "template " + dep.template_hash);
    return;
  }
  int total = static_cast<int>(fresh.size() + stale.size());
  int fresh_count = static_cast<int>(fresh.size());
  while (fresh_count < desired && total < desired + dep.max_surge) {
    CreatePod(state, dep, "PodCreated", "rolling update");
    ++fresh_count;
    ++total;
  }
  int ready = 0;
  for (PodRuntime* pod : PodsOf(state, dep.name)) ready += pod->ready ? 1 : 0;
  std::sort(stale.begin(), stale.end(), [](const PodRuntime* a, const PodRuntime* b) {
    return std::make_tuple(a->ready, a->uid) < std::make_tuple(b->ready, b->uid);
  });
  for (PodRuntime* pod : stale) {
    if (pod->ready) {
      if (ready - 1 < desired - dep.max_unavailable) break;
      --ready;
    }
    DeletePod(state, pod->uid, "rolling update: old template");
  }
}

// ---------------------------------------------------------------------------
// Phase 6

void EvaluateHpa(ClusterState& state, HpaState& hpa) {
  auto it = state.deployments.find(hpa.target_deployment);
  if (it == state.deployments.end()) return;
  DeploymentState& dep = it->second;
  const int current = dep.desired_replicas;
  const long long numerator = static_cast<long long>(current) * dep.cpu_percent;
  int proposal = current == 0 ? hpa.min_replicas
                              : static_cast<int>((numerator + hpa.cpu_target_percent - 1) /
                                                 hpa.cpu_target_percent);
  proposal = std::clamp(proposal, hpa.min_replicas, hpa.max_replicas);
  int next = current;
  if (current < hpa.min_replicas || current > hpa.max_replicas) {
    next = std::clamp(current, hpa.min_replicas, hpa.max_replicas);
  } else if (proposal > current) {
    next = current + 1;
  } else if (proposal < current) {
    bool stable = !hpa.last_scale_tick ||
                  state.clock - *hpa.last_scale_tick >= kHpaScaleDownWindowTicks;
    if (stable) next = current - 1;
  }
  Emit(state, "HpaEvaluated", dep.name, "",
       "cpu=" + std::to_string(dep.cpu_percent) + "% desired=" + std::to_string(current) +
           " proposal=" + std::to_string(proposal));
  if (next != current) {
    dep.desired_replicas = next;
    hpa.last_scale_tick = state.clock;
    Emit(state, "HpaScale", dep.name, "", std::to_string(current) + "->" + std::to_string(next));
  }
}

// ---------------------------------------------------------------------------
// Phase 7

void CompleteStep(ClusterState& state, const WorkflowStep& step, PodRuntime& executor) {
  const std::string dir = std::string(kSharedMount) + "/" + step.step_id + "/";
  for (const std::string& var : step.exports) {
    const std::string path = dir + var;
    if (state.volume.contains(path)) {
      Emit(state, "ArtifactSkipped", step.deployment, executor.name, path);
      continue;
    }
    state.volume[path] = step.step_id + "/" + var;
    ++state.volume_writes[path];
    Emit(state, "ArtifactWritten", step.deployment, executor.name, path);
  }
  state.volume[dir + "_SUCCESS"] = step.step_id;
  for (const std::string& topic : step.produce_topics) {
    state.bus[topic].push_back(step.step_id);
    Emit(state, "MessagePublished", step.deployment, executor.name, topic);
  }
  state.completed_steps.insert(step.step_id);
  Emit(state, "StepCompleted", step.deployment, executor.name, step.step_id);
  for (PodRuntime* pod : PodsOf(state, step.deployment)) {
    if (pod->phase == PodPhase::kRunning) pod->step_progress = StepProgress::kDone;
  }
  executor.remaining_ticks = 0;
}

void RunWorkflow(ClusterState& state, const WorkflowStep& step) {
  if (state.completed_steps.contains(step.step_id)) return;
  std::vector<PodRuntime*> pods = PodsOf(state, step.deployment);
  for (PodRuntime* pod : pods) {
    if (pod->step_progress != StepProgress::kExecuting) continue;
    if (--pod->remaining_ticks <= 0) CompleteStep(state, step, *pod);
    return;
  }
  if (!InputsAvailable(state, step.deployment)) return;
  for (PodRuntime* pod : pods) {
    if (pod->phase == PodPhase::kRunning && pod->ready) {
      pod->step_progress = StepProgress::kExecuting;
      pod->remaining_ticks = kExecutionTicks;
      Emit(state, "StepStarted", step.deployment, pod->name, step.step_id);
      return;
    }
  }
}

void Tick(ClusterState& state, const FaultScript& faults) {
  ++state.clock;
  for (const FaultAction& fault : faults.actions) {
    if (fault.tick == state.clock) InjectFault(state, fault);
  }
  for (auto& [name, dep] : state.deployments) Reconcile(state, dep);
  for (auto& [uid, pod] : state.pods) {
    if (pod.phase == PodPhase::kPending && pod.phase_since < state.clock) {
      pod.phase = PodPhase::kRunning;
      pod.phase_since = state.clock;
      Emit(state, "PodRunning", pod.owner_deployment, pod.name);
    }
  }
  for (auto& [uid, pod] : state.pods) Probe(state, pod);
  for (auto& [name, dep] : state.deployments) RollOut(state, dep);
  if (state.clock % kHpaPeriodTicks == 0) {
    for (auto& [name, hpa] : state.hpas) EvaluateHpa(state, hpa);
  }
  for (const WorkflowStep& step : state.workflow) RunWorkflow(state, step);
}

std::string Required(const YAML::Node& node, const std::string& what) {
  if (!node || !node.IsScalar()) throw Error(ErrorCode::kMalformedDocument, "missing " + what);
  return node.as<std::string>();
}

}  // namespace

std::string_view PodPhaseName(PodPhase phase) {
  switch (phase) {
    case PodPhase::kPending: return "Pending";
    case PodPhase::kRunning: return "Running";
    case PodPhase::kFailed: return "Failed";
    case PodPhase::kSucceeded: return "Succeeded";
  }
  return "Pending";
}

std::string_view StepProgressName(StepProgress progress) {
  switch (progress) {
    case StepProgress::kNotStarted: return "NotStarted";
    case StepProgress::kWaitingInputs: return "WaitingInputs";
    case StepProgress::kExecuting: return "Executing";
    case StepProgress::kDone: return "Done";
  }
  return "NotStarted";
}

std::uint32_t Fnv1a32(std::string_view data) {
  std::uint32_t hash = 0x811c9dc5u;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x01000193u;
  }
  return hash;
}

std::string ClusterIpFor(std::string_view namespace_name, std::string_view service_name) {
  std::string key = std::string(namespace_name) + "/" + std::string(service_name);
  std::uint32_t low = Fnv1a32(key) % 65536u;
  if (low == 0) low = 1;
  return "10.96." + std::to_string(low >> 8) + "." + std::to_string(low & 0xffu);
}

ClusterState NewCluster(std::string namespace_name, std::uint64_t seed) {
  ClusterState state;
  state.namespace_name = std::move(namespace_name);
  state.rng_seed = seed;
  state.rng.seed(seed);
  return state;
}

FaultScript ParseFaultScript(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("fault script: ") + e.what());
  }
  FaultScript script;
  if (!root || root.IsNull()) return script;
  if (!root.IsSequence()) throw Error(ErrorCode::kInvalidConfig, "fault script must be a list");
  static const std::set<std::string> kKeys = {"tick",         "action",         "deployment",
                                              "count",        "pod_ordinal",    "duration_ticks",
                                              "percent",      "new_tag"};
  std::int64_t last_tick = 0;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const YAML::Node item = root[i];
    const std::string where = "fault " + std::to_string(i);
    if (!item.IsMap()) throw Error(ErrorCode::kInvalidConfig, where + " is not a map");
    for (const auto& kv : item) {
      if (!kKeys.contains(kv.first.as<std::string>())) {
        throw Error(ErrorCode::kInvalidConfig, where + ": unknown key '" + kv.first.as<std::string>() + "'");
      }
    }
    try {
      FaultAction action;
      if (!item["tick"] || !item["action"] || !item["deployment"]) {
        throw Error(ErrorCode::kInvalidConfig, where + " needs tick, action and deployment");
      }
      action.tick = item["tick"].as<std::int64_t>();
      if (action.tick < 1 || action.tick < last_tick) {
        throw Error(ErrorCode::kInvalidConfig, where + ": ticks must be positive and non-decreasing");
      }
      last_tick = action.tick;
      action.deployment = item["deployment"].as<std::string>();
      const std::string kind = item["action"].as<std::string>();
      auto need = [&](const char* key) {
        if (!item[key]) throw Error(ErrorCode::kInvalidConfig, where + " (" + kind + ") needs " + key);
        return item[key];
      };
      if (kind == "kill_pod") {
        action.kind = FaultKind::kKillPod;
        action.count = item["count"] ? item["count"].as<int>() : 1;
        if (action.count < 1) throw Error(ErrorCode::kInvalidConfig, where + ": count must be >= 1");
      } else if (kind == "fail_liveness") {
        action.kind = FaultKind::kFailLiveness;
        action.pod_ordinal = item["pod_ordinal"] ? item["pod_ordinal"].as<int>() : 0;
        action.duration_ticks = need("duration_ticks").as<int>();
        if (action.duration_ticks < 1) {
          throw Error(ErrorCode::kInvalidConfig, where + ": duration_ticks must be >= 1");
        }
      } else if (kind == "set_cpu") {
        action.kind = FaultKind::kSetCpu;
        action.percent = need("percent").as<int>();
        if (action.percent < 0) throw Error(ErrorCode::kInvalidConfig, where + ": negative percent");
      } else if (kind == "trigger_rolling_update") {
        action.kind = FaultKind::kTriggerRollingUpdate;
        action.new_tag = need("new_tag").as<std::string>();
      } else {
        throw Error(ErrorCode::kInvalidConfig, where + ": unknown action '" + kind + "'");
      }
      script.actions.push_back(std::move(action));
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::kInvalidConfig, where + ": " + e.what());
    }
  }
  return script;
}

ClusterState ApplyBundle(ClusterState state, const ManifestBundle& bundle) {
  std::vector<std::string> claim_order;
  for (const ManifestDocument& doc : bundle.documents) {
    YAML::Node node;
    try {
      node = YAML::Load(doc.yaml_text);
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::kMalformedDocument, doc.name + ": " + e.what());
    }
    try {
      const std::string kind = Required(node["kind"], "kind");
      const std::string name = Required(node["metadata"]["name"], "metadata.name");
      const YAML::Node spec = node["spec"];
      auto duplicate = [&](bool exists) {
        if (exists) throw Error(ErrorCode::kDuplicateName, kind + " '" + name + "' already exists");
      };
      if (kind == "PersistentVolume") {
        duplicate(state.persistent_volumes.contains(name));
        VolumeState pv;
        pv.name = name;
        pv.capacity_bytes = ParseQuantity(Required(spec["capacity"]["storage"], name + " capacity"));
        pv.access_modes = AccessModes(spec["accessModes"]);
        if (spec["storageClassName"]) pv.storage_class = spec["storageClassName"].as<std::string>();
        const YAML::Node terms = spec["nodeAffinity"]["required"]["nodeSelectorTerms"];
        if (terms && terms.IsSequence() && terms.size() > 0) {
          const YAML::Node values = terms[0]["matchExpressions"][0]["values"];
          if (values && values.IsSequence() && values.size() > 0) pv.node = values[0].as<std::string>();
        }
        state.persistent_volumes[name] = std::move(pv);
      } else if (kind == "PersistentVolumeClaim") {
        duplicate(state.claims.contains(name));
        ClaimState claim;
        claim.name = name;
        claim.request_bytes =
            ParseQuantity(Required(spec["resources"]["requests"]["storage"], name + " request"));
        claim.access_modes = AccessModes(spec["accessModes"]);
        if (spec["storageClassName"]) claim.storage_class = spec["storageClassName"].as<std::string>();
        state.claims[name] = std::move(claim);
        claim_order.push_back(name);
      } else if (kind == "Service") {
        duplicate(state.services.contains(name));
        ServiceState svc;
        svc.name = name;
        svc.selector_app = Required(spec["selector"]["app"], name + " selector");
        if (spec["ports"] && spec["ports"].size() > 0) {
          svc.port = spec["ports"][0]["port"].as<int>(80);
          svc.target_port = spec["ports"][0]["targetPort"].as<int>(svc.port);
        }
        std::uint32_t low = Fnv1a32(state.namespace_name + "/" + name) % 65536u;
        if (low == 0) low = 1;
        auto taken = [&](const std::string& ip) {
          return std::any_of(state.services.begin(), state.services.end(),
                             [&](const auto& kv) { return kv.second.cluster_ip == ip; });
        };
        std::string ip;
        for (;;) {
          ip = "10.96." + std::to_string(low >> 8) + "." + std::to_string(low & 0xffu);
          if (!taken(ip)) break;
          low = low == 65535u ? 1 : low + 1;
        }
        svc.cluster_ip = ip;
        state.services[name] = std::move(svc);
      } else if (kind == "Deployment") {
        duplicate(state.deployments.contains(name));
        DeploymentState dep;
        dep.name = name;
        dep.desired_replicas = spec["replicas"] ? spec["replicas"].as<int>() : 1;
        if (dep.desired_replicas < 0) {
          throw Error(ErrorCode::kMalformedDocument, name + " has negative replicas");
        }
        const YAML::Node rolling = spec["strategy"]["rollingUpdate"];
        dep.max_surge = ResolveIntOrPercent(rolling ? rolling["maxSurge"] : YAML::Node(),
                                            dep.desired_replicas, true, 1);
        dep.max_unavailable = ResolveIntOrPercent(rolling ? rolling["maxUnavailable"] : YAML::Node(),
                                                  dep.desired_replicas, false, 1);
        dep.app_label = Required(spec["selector"]["matchLabels"]["app"], name + " selector");
        const YAML::Node pod_spec = spec["template"]["spec"];
        dep.image = Required(pod_spec["containers"][0]["image"], name + " image");
        if (const YAML::Node volumes = pod_spec["volumes"]; volumes && volumes.IsSequence()) {
          for (const auto& volume : volumes) {
            if (volume["persistentVolumeClaim"]) {
              dep.claim_name = volume["persistentVolumeClaim"]["claimName"].as<std::string>();
            }
          }
        }
        dep.template_hash = Hex32(Fnv1a32(YAML::Dump(spec["template"])));
        state.deployments[name] = std::move(dep);
      } else if (kind == "HorizontalPodAutoscaler") {
        duplicate(state.hpas.contains(name));
        HpaState hpa;
        hpa.name = name;
        hpa.target_deployment = Required(spec["scaleTargetRef"]["name"], name + " target");
        hpa.min_replicas = spec["minReplicas"] ? spec["minReplicas"].as<int>() : 1;
        hpa.max_replicas = spec["maxReplicas"].as<int>();
        if (const YAML::Node metrics = spec["metrics"]; metrics && metrics.IsSequence()) {
          for (const auto& metric : metrics) {
            if (metric["resource"]["name"].as<std::string>("") == "cpu") {
              hpa.cpu_target_percent = metric["resource"]["target"]["averageUtilization"].as<int>();
            }
          }
        }
        if (hpa.min_replicas < 1 || hpa.min_replicas > hpa.max_replicas ||
            hpa.cpu_target_percent < 1) {
          throw Error(ErrorCode::kInvalidBounds, name + " has invalid bounds");
        }
        state.hpas[name] = std::move(hpa);
      } else {
        Emit(state, "UnsupportedKind", "", "", kind + " " + name);
        continue;
      }
      Emit(state, "ResourceApplied", kind == "Deployment" ? name : "", "", kind + " " + name);
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::kMalformedDocument, doc.name + ": " + e.what());
    }
  }

  for (const std::string& claim_name : claim_order) {
    if (state.bindings.contains(claim_name)) continue;
    const ClaimState& claim = state.claims.at(claim_name);
    VolumeState* best = nullptr;
    for (auto& [pv_name, pv] : state.persistent_volumes) {
      if (!pv.bound_claim.empty()) continue;
      if (pv.capacity_bytes < claim.request_bytes) continue;
      if (pv.storage_class != claim.storage_class) continue;
      if (!std::includes(pv.access_modes.begin(), pv.access_modes.end(), claim.access_modes.begin(),
                         claim.access_modes.end())) {
        continue;
      }
      if (best == nullptr || pv.capacity_bytes < best->capacity_bytes) best = &pv;
    }
    if (best == nullptr) {
      throw Error(ErrorCode::kUnboundClaim, "no persistent volume satisfies claim '" + claim_name + "'");
    }
    best->bound_claim = claim_name;
    state.bindings[claim_name] = best->name;
    Emit(state, "ClaimBound", "", "", claim_name + " -> " + best->name);
  }
  for (const auto& [name, dep] : state.deployments) {
    if (!dep.claim_name.empty() && !state.claims.contains(dep.claim_name)) {
      throw Error(ErrorCode::kUnboundClaim,
                  name + " mounts claim '" + dep.claim_name + "' which does not exist");
    }
  }
  for (const auto& [name, hpa] : state.hpas) {
    auto it = state.deployments.find(hpa.target_deployment);
    if (it == state.deployments.end()) {
      throw Error(ErrorCode::kMalformedDocument,
                  name + " targets unknown deployment '" + hpa.target_deployment + "'");
    }
    it->second.desired_replicas =
        std::clamp(it->second.desired_replicas, hpa.min_replicas, hpa.max_replicas);
  }
  return state;
}

ClusterState AttachWorkflow(ClusterState state, const StepGraph& graph) {
  state.workflow.clear();
  for (const std::string& id : TopologicalOrder(graph)) {
    const Step* step = graph.Find(id);
    WorkflowStep ws;
    ws.step_id = id;
    ws.deployment = id + "-deployment";
    if (!state.deployments.contains(ws.deployment)) {
      throw Error(ErrorCode::kMalformedDocument, "step '" + id + "' has no deployment " + ws.deployment);
    }
    for (const Edge& e : graph.edges) {
      if (e.to == id) {
        std::string path = std::string(kSharedMount) + "/" + e.from + "/" + e.var;
        if (std::find(ws.input_paths.begin(), ws.input_paths.end(), path) == ws.input_paths.end()) {
          ws.input_paths.push_back(path);
        }
      }
      if (e.from == id) {
        std::string topic = TopicName(e.from, e.to);
        if (std::find(ws.produce_topics.begin(), ws.produce_topics.end(), topic) ==
            ws.produce_topics.end()) {
          ws.produce_topics.push_back(topic);
        }
      }
    }
    ws.exports = step->exports.items();
    state.workflow.push_back(std::move(ws));
  }
  return state;
}

ClusterState Advance(ClusterState state, int ticks, const FaultScript& faults) {
  for (int i = 0; i < ticks; ++i) Tick(state, faults);
  return state;
}

std::string GetClusterIp(const ClusterState& state, std::string_view service_name,
                         std::string_view namespace_name) {
  auto it = state.services.find(std::string(service_name));
  if (namespace_name != state.namespace_name || it == state.services.end()) {
    throw Error(ErrorCode::kServiceNotFound, "service '" + std::string(service_name) +
                                                 "' not found in namespace '" +
                                                 std::string(namespace_name) + "'");
  }
  return it->second.cluster_ip;
}

ServiceResponse CallService(const ClusterState& state, std::string_view ip, std::string_view path) {
  const ServiceState* svc = nullptr;
  for (const auto& [name, s] : state.services) {
    if (s.cluster_ip == ip) svc = &s;
  }
  if (svc == nullptr) throw Error(ErrorCode::kUnknownIp, "no service owns " + std::string(ip));
  if (path != "/healthz" && path != "/readiness") return {404, "not found"};
  int pods = 0, ready = 0;
  for (const auto& [name, dep] : state.deployments) {
    if (dep.app_label != svc->selector_app) continue;
    for (const auto& [uid, pod] : state.pods) {
      if (pod.owner_deployment != name || pod.phase == PodPhase::kFailed) continue;
      ++pods;
      ready += pod.ready ? 1 : 0;
    }
  }
  if (pods == 0) throw Error(ErrorCode::kNoBackend, "service '" + svc->name + "' has no pods");
  if (ready > 0) return {200, "ok"};
  return {503, "no ready endpoints"};
}

std::string EventToJson(const SimEvent& event) {
  nlohmann::ordered_json j;
  j["tick"] = event.tick;
  j["seq"] = event.seq;
  j["kind"] = event.kind;
  if (!event.deployment.empty()) j["deployment"] = event.deployment;
  if (!event.pod.empty()) j["pod"] = event.pod;
  j["detail"] = event.detail;
  return j.dump();
}

std::string EventsToJsonLines(const std::vector<SimEvent>& events) {
  std::string out;
  for (const SimEvent& event : events) out += EventToJson(event) + "\n";
  return out;
}

RunSummary Summarize(const ClusterState& state) {
  RunSummary summary;
  summary.steps_total = state.workflow.size();
  summary.steps_completed = state.completed_steps.size();
  for (const SimEvent& e : state.events) {
    if (e.kind == "LivenessRestart") ++summary.liveness_restarts;
    else if (e.kind == "PodReplaced") ++summary.pod_replacements;
    else if (e.kind == "HpaScale") ++summary.scale_events;
  }
  return summary;
}

int LivePodCount(const ClusterState& state, std::string_view deployment) {
  int n = 0;
  for (const auto& [uid, pod] : state.pods) {
    if (pod.owner_deployment == deployment && pod.phase != PodPhase::kFailed) ++n;
  }
  return n;
}

int ReadyPodCount(const ClusterState& state, std::string_view deployment) {
  int n = 0;
  for (const auto& [uid, pod] : state.pods) {
    if (pod.owner_deployment == deployment && pod.ready) ++n;
  }
  return n;
}

}  // namespace j2k::sim
