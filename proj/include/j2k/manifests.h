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

// Pod planning and Kubernetes manifest rendering. Documents are rendered from
// fixed text templates (two-space indent, block style, template key order) so
// the Deployment stays field-for-field identical to the reference template.

#ifndef J2K_MANIFESTS_H_
#define J2K_MANIFESTS_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "j2k/dataflow.h"
#include "j2k/environment.h"

namespace j2k {

inline constexpr std::string_view kDefaultBroker = "my-broker-address";

enum class PodRole { kProducer, kConsumer, kBoth, kIsolated };

std::string_view PodRoleName(PodRole role);

struct PodPlan {
  std::string pod_name;  // == step id
  std::string image_name;
  std::string tag;
  PodRole role = PodRole::kIsolated;
  std::vector<std::string> produce_topics;
  std::vector<std::string> consume_topics;
  std::vector<EnvVar> env;  // follows KAFKA_BROKER in the container env
};

struct StorageConfig {
  StorageMode mode = StorageMode::kLocal;
  std::string node_name;
  std::string capacity = "5Gi";
  std::string local_path;
  std::string efs_handle;
};

StorageConfig StorageFromEnvironment(const EnvironmentSpec& env);

struct ManifestDocument {
  std::string kind;
  std::string name;
  std::string yaml_text;

  bool operator==(const ManifestDocument&) const = default;
};

struct ManifestBundle {
  std::vector<ManifestDocument> documents;

  bool operator==(const ManifestBundle&) const = default;
};

// RFC 1123 label: 1-63 chars of [a-z0-9-], alphanumeric at both ends.
bool IsDnsLabel(std::string_view name);

// One plan per step; one topic per producer/consumer pair.
std::vector<PodPlan> PlanPods(const StepGraph& graph, const EnvironmentSpec& env);

// Throws Error(kInvalidName) for names that are not DNS labels and
// Error(kInvalidConfig) when role and topics disagree.
std::string RenderDeployment(const PodPlan& plan, std::string_view broker = kDefaultBroker);
std::string RenderService(const PodPlan& plan);

// PersistentVolume followed by its PersistentVolumeClaim. Throws
// Error(kMissingField) when the storage mode's required fields are empty.
std::vector<ManifestDocument> RenderStorage(const PodPlan& plan, const StorageConfig& storage);

// Throws Error(kInvalidBounds) unless 1 <= min <= max and 1 <= target <= 100.
std::string RenderHpa(const PodPlan& plan, int min_replicas, int max_replicas,
                      int cpu_target_percent);

struct BundleOptions {
  bool hpa_enabled = true;
  int hpa_min_replicas = 3;
  int hpa_max_replicas = 10;
  int hpa_cpu_target_percent = 50;
  std::string broker = std::string(kDefaultBroker);
};

BundleOptions BundleOptionsFromEnvironment(const EnvironmentSpec& env, bool hpa_enabled);

// PVs, PVCs, Services, Deployments, then HPAs; each group sorted by step id.
ManifestBundle BuildBundle(const std::vector<PodPlan>& plans, const StorageConfig& storage,
                           const BundleOptions& options);

// Documents joined by "---" lines, and its inverse.
std::string JoinBundle(const ManifestBundle& bundle);
ManifestBundle SplitBundle(std::string_view text);

// Writes <dir>/<NN>-<kind>-<name>.yaml per document plus <dir>/all.yaml.
void WriteBundle(const ManifestBundle& bundle, const std::filesystem::path& dir);

}  // namespace j2k

#endif  // J2K_MANIFESTS_H_
