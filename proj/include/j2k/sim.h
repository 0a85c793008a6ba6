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

// Deterministic, tick-driven cluster simulator. It applies a rendered manifest
// bundle and runs the step workflow against ReplicaSet reconciliation,
// liveness/readiness probes, rolling updates, an autoscaler, a shared volume
// and a per-topic message log. Time is logical; every observable change is an
// event in one totally ordered log.
//
// Each tick runs these phases in order:
//   1. inject faults scheduled for the tick
//   2. reconcile replica counts (Failed pods are replaced)
//   3. Pending pods that have waited a full tick start Running
//   4. liveness and readiness probes
//   5. rolling updates
//   6. autoscaler evaluation (every kHpaPeriodTicks)
//   7. workflow: elect one executor per step, finish executions

#ifndef J2K_SIM_H_
#define J2K_SIM_H_

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "j2k/dataflow.h"
#include "j2k/manifests.h"

namespace j2k::sim {

inline constexpr int kLivenessFailureThreshold = 3;
inline constexpr int kExecutionTicks = 2;
inline constexpr int kHpaPeriodTicks = 5;
inline constexpr int kHpaScaleDownWindowTicks = 10;

enum class PodPhase { kPending, kRunning, kFailed, kSucceeded };
enum class StepProgress { kNotStarted, kWaitingInputs, kExecuting, kDone };

std::string_view PodPhaseName(PodPhase phase);
std::string_view StepProgressName(StepProgress progress);

struct DeploymentState {
  std::string name;
  std::string app_label;
  std::string claim_name;
  std::string image;
  int desired_replicas = 0;
  std::string template_hash;
  int max_surge = 1;
  int max_unavailable = 1;
  bool updating = false;
  int cpu_percent = 0;
};

struct PodRuntime {
  std::uint64_t uid = 0;
  std::string name;
  std::string owner_deployment;
  std::string template_hash;
  PodPhase phase = PodPhase::kPending;
  bool ready = false;
  bool live = true;
  int consecutive_liveness_failures = 0;
  int cpu_utilization_percent = 0;
  StepProgress step_progress = StepProgress::kNotStarted;
  int remaining_ticks = 0;   // while Executing
  std::int64_t phase_since = 0;
  std::int64_t liveness_fail_until = -1;  // last tick of an injected liveness fault
};

struct ServiceState {
  std::string name;
  std::string selector_app;
  std::string cluster_ip;
  int port = 80;
  int target_port = 8080;
};

struct VolumeState {
  std::string name;
  long double capacity_bytes = 0;
  std::set<std::string> access_modes;
  std::string storage_class;
  std::string node;  // local volumes only
  std::string bound_claim;
};

struct ClaimState {
  std::string name;
  long double request_bytes = 0;
  std::set<std::string> access_modes;
  std::string storage_class;
};

struct HpaState {
  std::string name;
  std::string target_deployment;
  int min_replicas = 1;
  int max_replicas = 1;
  int cpu_target_percent = 50;
  std::optional<std::int64_t> last_scale_tick;
};

struct SimEvent {
  std::int64_t tick = 0;
  std::uint64_t seq = 0;
  std::string kind;
  std::string deployment;
  std::string pod;
  std::string detail;
};

// What one step consumes and produces, keyed by its deployment.
struct WorkflowStep {
  std::string step_id;
  std::string deployment;
  std::vector<std::string> input_paths;  // /mnt/efs/<producer>/<var>
  std::vector<std::string> exports;
  std::vector<std::string> produce_topics;
};

struct ClusterState {
  std::string namespace_name = "default";
  std::int64_t clock = 0;
  std::map<std::string, DeploymentState> deployments;
  std::map<std::uint64_t, PodRuntime> pods;
  std::map<std::string, ServiceState> services;
  std::map<std::string, VolumeState> persistent_volumes;
  std::map<std::string, ClaimState> claims;
  std::map<std::string, std::string> bindings;  // claim -> volume
  std::map<std::string, HpaState> hpas;
  std::map<std::string, std::vector<std::string>> bus;
  std::map<std::string, std::string> volume;
  std::map<std::string, int> volume_writes;
  std::vector<SimEvent> events;

  std::vector<WorkflowStep> workflow;  // topological order
  std::set<std::string> completed_steps;

  std::uint64_t rng_seed = 0;
  std::mt19937_64 rng{0};
  std::uint64_t next_uid = 1;
  std::uint64_t next_seq = 0;
};

ClusterState NewCluster(std::string namespace_name = "default", std::uint64_t seed = 0);

enum class FaultKind { kKillPod, kFailLiveness, kSetCpu, kTriggerRollingUpdate };

struct FaultAction {
  std::int64_t tick = 0;
  FaultKind kind = FaultKind::kKillPod;
  std::string deployment;  // deployment name or step id
  int count = 0;
  int pod_ordinal = 0;
  int duration_ticks = 0;
  int percent = 0;
  std::string new_tag;
};

struct FaultScript {
  std::vector<FaultAction> actions;  // ticks non-decreasing
};

// YAML list of {tick, action, deployment, count|pod_ordinal|duration_ticks|
// percent|new_tag}. Throws Error(kInvalidConfig).
FaultScript ParseFaultScript(std::string_view yaml_text);

// Registers the bundle's volumes, claims, services, deployments and
// autoscalers, then binds claims (smallest sufficient volume, ties by name).
// Throws Error(kDuplicateName) or Error(kUnboundClaim); the input state is
// untouched on failure.
ClusterState ApplyBundle(ClusterState state, const ManifestBundle& bundle);

// Links every step of the graph to its "<step>-deployment".
ClusterState AttachWorkflow(ClusterState state, const StepGraph& graph);

ClusterState Advance(ClusterState state, int ticks, const FaultScript& faults = {});

// 10.96.X.Y from FNV-1a("<namespace>/<service>") mod 65536, never 10.96.0.0.
std::string ClusterIpFor(std::string_view namespace_name, std::string_view service_name);
std::uint32_t Fnv1a32(std::string_view data);

// Throws Error(kServiceNotFound).
std::string GetClusterIp(const ClusterState& state, std::string_view service_name,
                         std::string_view namespace_name);

struct ServiceResponse {
  int status = 0;
  std::string body;
};

// HTTP-style GET against a service. Throws Error(kUnknownIp) for an unassigned
// address and Error(kNoBackend) when the service selects no pods.
ServiceResponse CallService(const ClusterState& state, std::string_view ip, std::string_view path);

std::string EventToJson(const SimEvent& event);
std::string EventsToJsonLines(const std::vector<SimEvent>& events);

struct RunSummary {
  std::size_t steps_total = 0;
  std::size_t steps_completed = 0;
  int liveness_restarts = 0;
  int pod_replacements = 0;
  int scale_events = 0;
};

RunSummary Summarize(const ClusterState& state);

// Count of non-Failed pods and of ready pods owned by a deployment.
int LivePodCount(const ClusterState& state, std::string_view deployment);
int ReadyPodCount(const ClusterState& state, std::string_view deployment);

}  // namespace j2k::sim

#endif  // J2K_SIM_H_
