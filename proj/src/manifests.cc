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

#include "j2k/manifests.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>

#include "j2k/deps.h"
#include "j2k/error.h"

namespace j2k {
namespace {

constexpr std::string_view kDeploymentTemplate = R"(apiVersion: apps/v1
kind: Deployment
metadata:
  name: {pod_name}-deployment
spec:
  replicas: 3
  strategy:
    type: RollingUpdate
    rollingUpdate:
      maxUnavailable: 1
      maxSurge: 1
  selector:
    matchLabels:
      app: {pod_name}
  template:
    metadata:
      labels:
        app: {pod_name}
    spec:
      containers:
      - name: {pod_name}-container
        image: {image_name}:{tag}
        env:
        - name: KAFKA_BROKER
          value: "{broker}"
        {env_content}
        resources:
          limits:
            cpu: "1"
            memory: "1Gi"
          requests:
            cpu: "500m"
            memory: "500Mi"
        livenessProbe:
          httpGet:
            path: /healthz
            port: 8080
        readinessProbe:
          httpGet:
            path: /readiness
            port: 8080
        volumeMounts:
        - name: efs-volume
          mountPath: /mnt/efs
      volumes:
      - name: efs-volume
        persistentVolumeClaim:
          claimName: {pod_name}-efs-pvc
)";

constexpr std::string_view kServiceTemplate = R"(apiVersion: v1
kind: Service
metadata:
  name: {pod_name}-svc
spec:
  type: ClusterIP
  selector:
    app: {pod_name}
  ports:
  - protocol: TCP
    port: 80
    targetPort: 8080
)";

constexpr std::string_view kLocalPvTemplate = R"(apiVersion: v1
kind: PersistentVolume
metadata:
  name: {pod_name}-pv
spec:
  capacity:
    storage: {capacity}
  volumeMode: Filesystem
  accessModes:
  - ReadWriteOnce
  persistentVolumeReclaimPolicy: Retain
  storageClassName: j2k-local
  local:
    path: {local_path}
  nodeAffinity:
    required:
      nodeSelectorTerms:
      - matchExpressions:
        - key: kubernetes.io/hostname
          operator: In
          values:
          - {node_name}
)";

constexpr std::string_view kCloudPvTemplate = R"(apiVersion: v1
kind: PersistentVolume
metadata:
  name: {pod_name}-pv
spec:
  capacity:
    storage: {capacity}
  volumeMode: Filesystem
  accessModes:
  - ReadWriteMany
  persistentVolumeReclaimPolicy: Retain
  storageClassName: efs-sc
  csi:
    driver: efs.csi.aws.com
    volumeHandle: {efs_handle}
)";

constexpr std::string_view kPvcTemplate = R"(apiVersion: v1
kind: PersistentVolumeClaim
metadata:
  name: {pod_name}-efs-pvc
spec:
  accessModes:
  - {access_mode}
  storageClassName: {storage_class}
  resources:
    requests:
      storage: {capacity}
)";

constexpr std::string_view kHpaTemplate = R"(apiVersion: autoscaling/v2
kind: HorizontalPodAutoscaler
metadata:
  name: {pod_name}-hpa
spec:
  scaleTargetRef:
    apiVersion: apps/v1
    kind: Deployment
    name: {pod_name}-deployment
  minReplicas: {min_replicas}
  maxReplicas: {max_replicas}
  metrics:
  - type: Resource
    resource:
      name: cpu
      target:
        type: Utilization
        averageUtilization: {cpu_target}
)";

using Substitutions = std::vector<std::pair<std::string_view, std::string>>;

std::string Fill(std::string_view tmpl, const Substitutions& subs) {
  std::string out(tmpl);
  for (const auto& [key, value] : subs) {
    const std::string placeholder = "{" + std::string(key) + "}";
    for (std::size_t at = out.find(placeholder); at != std::string::npos;
         at = out.find(placeholder, at + value.size())) {
      out.replace(at, placeholder.size(), value);
    }
  }
  return out;
}

std::string QuoteYaml(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

void RequireLabel(std::string_view name, std::string_view what) {
  if (!IsDnsLabel(name)) {
    throw Error(ErrorCode::kInvalidName,
                std::string(what) + " '" + std::string(name) + "' is not a valid DNS label");
  }
}

// DNS-1123 subdomain (Deployment, PV, PVC, HPA names).
void RequireSubdomain(std::string_view name, std::string_view what) {
  bool ok = !name.empty() && name.size() <= 253;
  std::size_t start = 0;
  while (ok && start <= name.size()) {
    std::size_t dot = name.find('.', start);
    std::string_view label = name.substr(start, dot == std::string_view::npos ? name.npos : dot - start);
    ok = IsDnsLabel(label);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (!ok) {
    throw Error(ErrorCode::kInvalidName,
                std::string(what) + " '" + std::string(name) + "' is not a valid DNS subdomain");
  }
}

void ValidatePlan(const PodPlan& plan) {
  RequireLabel(plan.pod_name, "pod name");
  static const std::regex kTopic("^[a-z0-9-]+-to-[a-z0-9-]+$");
  for (const auto* topics : {&plan.produce_topics, &plan.consume_topics}) {
    for (const auto& topic : *topics) {
      if (!std::regex_match(topic, kTopic)) {
        throw Error(ErrorCode::kInvalidName, "topic '" + topic + "' is malformed");
      }
    }
  }
  bool produces = !plan.produce_topics.empty();
  bool consumes = !plan.consume_topics.empty();
  PodRole expected = produces && consumes ? PodRole::kBoth
                     : produces           ? PodRole::kProducer
                     : consumes           ? PodRole::kConsumer
                                          : PodRole::kIsolated;
  if (plan.role != expected) {
    throw Error(ErrorCode::kInvalidConfig,
                "pod '" + plan.pod_name + "' has role " + std::string(PodRoleName(plan.role)) +
                    " but its topics imply " + std::string(PodRoleName(expected)));
  }
}

std::string Join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out.push_back(sep);
    out += item;
  }
  return out;
}

std::string Lower(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

std::string_view PodRoleName(PodRole role) {
  switch (role) {
    case PodRole::kProducer: return "producer";
    case PodRole::kConsumer: return "consumer";
    case PodRole::kBoth: return "both";
    case PodRole::kIsolated: return "isolated";
  }
  return "isolated";
}

bool IsDnsLabel(std::string_view name) {
  if (name.empty() || name.size() > 63) return false;
  auto alnum = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
  if (!alnum(name.front()) || !alnum(name.back())) return false;
  return std::all_of(name.begin(), name.end(), [&](char c) { return alnum(c) || c == '-'; });
}

StorageConfig StorageFromEnvironment(const EnvironmentSpec& env) {
  StorageConfig storage;
  storage.mode = env.storage;
  storage.capacity = env.capacity;
  if (env.storage == StorageMode::kLocal) {
    storage.node_name = env.node_name;
    storage.local_path = env.local_path;
  } else {
    storage.efs_handle = env.efs_handle;
  }
  return storage;
}

std::vector<PodPlan> PlanPods(const StepGraph& graph, const EnvironmentSpec& env) {
  std::vector<PodPlan> plans;
  for (const Step& step : graph.steps) {
    PodPlan plan;
    plan.pod_name = step.id;
    plan.image_name = env.image_prefix + step.id;
    plan.tag = env.tag;
    for (const Edge& e : graph.edges) {
      std::string topic = TopicName(e.from, e.to);
      auto add = [&](std::vector<std::string>& topics) {
        if (std::find(topics.begin(), topics.end(), topic) == topics.end()) topics.push_back(topic);
      };
      if (e.from == step.id) add(plan.produce_topics);
      if (e.to == step.id) add(plan.consume_topics);
    }
    bool produces = !plan.produce_topics.empty();
    bool consumes = !plan.consume_topics.empty();
    plan.role = produces && consumes ? PodRole::kBoth
                : produces           ? PodRole::kProducer
                : consumes           ? PodRole::kConsumer
                                     : PodRole::kIsolated;
    plan.env.push_back({"J2K_STEP_ID", step.id});
    plan.env.push_back({"J2K_PRODUCE_TOPICS", Join(plan.produce_topics, ',')});
    plan.env.push_back({"J2K_CONSUME_TOPICS", Join(plan.consume_topics, ',')});
    for (const EnvVar& var : env.env) plan.env.push_back(var);
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::string RenderDeployment(const PodPlan& plan, std::string_view broker) {
  ValidatePlan(plan);
  RequireSubdomain(plan.pod_name + "-deployment", "deployment name");
  std::string env_content;
  for (const EnvVar& var : plan.env) {
    if (!env_content.empty()) env_content += "\n        ";
    env_content += "- name: " + var.name + "\n          value: " + QuoteYaml(var.value);
  }
  std::string text = Fill(kDeploymentTemplate, {{"pod_name", plan.pod_name},
                                                {"image_name", plan.image_name},
                                                {"tag", plan.tag}});
  // The broker value is already inside quotes in the template.
  std::string quoted_broker = QuoteYaml(broker);
  text = Fill(text, {{"broker", quoted_broker.substr(1, quoted_broker.size() - 2)}});
  const std::string env_line = "        {env_content}\n";
  std::size_t at = text.find(env_line);
  if (plan.env.empty()) text.erase(at, env_line.size());
  else text.replace(at, env_line.size(), "        " + env_content + "\n");
  return text;
}

std::string RenderService(const PodPlan& plan) {
  RequireLabel(plan.pod_name, "pod name");
  RequireLabel(plan.pod_name + "-svc", "service name");
  return Fill(kServiceTemplate, {{"pod_name", plan.pod_name}});
}

std::vector<ManifestDocument> RenderStorage(const PodPlan& plan, const StorageConfig& storage) {
  RequireLabel(plan.pod_name, "pod name");
  if (storage.capacity.empty()) throw Error(ErrorCode::kMissingField, "storage capacity is required");
  std::string pv_text;
  Substitutions pvc_subs = {{"pod_name", plan.pod_name}, {"capacity", storage.capacity}};
  if (storage.mode == StorageMode::kLocal) {
    if (storage.node_name.empty()) {
      throw Error(ErrorCode::kMissingField, "local storage requires node_name");
    }
    if (storage.local_path.empty()) {
      throw Error(ErrorCode::kMissingField, "local storage requires local_path");
    }
    pv_text = Fill(kLocalPvTemplate, {{"pod_name", plan.pod_name},
                                      {"capacity", storage.capacity},
                                      {"local_path", storage.local_path},
                                      {"node_name", storage.node_name}});
    pvc_subs.push_back({"access_mode", "ReadWriteOnce"});
    pvc_subs.push_back({"storage_class", "j2k-local"});
  } else {
    if (storage.efs_handle.empty()) {
      throw Error(ErrorCode::kMissingField, "cloud storage requires efs_handle");
    }
    pv_text = Fill(kCloudPvTemplate, {{"pod_name", plan.pod_name},
                                      {"capacity", storage.capacity},
                                      {"efs_handle", storage.efs_handle}});
    pvc_subs.push_back({"access_mode", "ReadWriteMany"});
    pvc_subs.push_back({"storage_class", "efs-sc"});
  }
  RequireSubdomain(plan.pod_name + "-efs-pvc", "claim name");
  return {
      ManifestDocument{"PersistentVolume", plan.pod_name + "-pv", std::move(pv_text)},
      ManifestDocument{"PersistentVolumeClaim", plan.pod_name + "-efs-pvc",
                       Fill(kPvcTemplate, pvc_subs)},
  };
}

std::string RenderHpa(const PodPlan& plan, int min_replicas, int max_replicas,
                      int cpu_target_percent) {
  RequireLabel(plan.pod_name, "pod name");
  if (min_replicas < 1 || min_replicas > max_replicas) {
    throw Error(ErrorCode::kInvalidBounds, "autoscaler needs 1 <= minReplicas <= maxReplicas, got " +
                                               std::to_string(min_replicas) + ".." +
                                               std::to_string(max_replicas));
  }
  if (cpu_target_percent < 1 || cpu_target_percent > 100) {
    throw Error(ErrorCode::kInvalidBounds,
                "CPU target must be within 1..100, got " + std::to_string(cpu_target_percent));
  }
  return Fill(kHpaTemplate, {{"pod_name", plan.pod_name},
                             {"min_replicas", std::to_string(min_replicas)},
                             {"max_replicas", std::to_string(max_replicas)},
                             {"cpu_target", std::to_string(cpu_target_percent)}});
}

BundleOptions BundleOptionsFromEnvironment(const EnvironmentSpec& env, bool hpa_enabled) {
  BundleOptions options;
  options.hpa_enabled = hpa_enabled;
  options.hpa_min_replicas = env.hpa_min_replicas;
  options.hpa_max_replicas = env.hpa_max_replicas;
  options.hpa_cpu_target_percent = env.hpa_cpu_target_percent;
  options.broker = env.broker;
  return options;
}

ManifestBundle BuildBundle(const std::vector<PodPlan>& plans, const StorageConfig& storage,
                           const BundleOptions& options) {
  std::vector<const PodPlan*> sorted;
  for (const PodPlan& plan : plans) sorted.push_back(&plan);
  std::sort(sorted.begin(), sorted.end(),
            [](const PodPlan* a, const PodPlan* b) { return a->pod_name < b->pod_name; });

  std::vector<ManifestDocument> pvs, pvcs, services, deployments, hpas;
  for (const PodPlan* plan : sorted) {
    auto storage_docs = RenderStorage(*plan, storage);
    pvs.push_back(std::move(storage_docs[0]));
    pvcs.push_back(std::move(storage_docs[1]));
    services.push_back({"Service", plan->pod_name + "-svc", RenderService(*plan)});
    deployments.push_back(
        {"Deployment", plan->pod_name + "-deployment", RenderDeployment(*plan, options.broker)});
    if (options.hpa_enabled) {
      hpas.push_back({"HorizontalPodAutoscaler", plan->pod_name + "-hpa",
                      RenderHpa(*plan, options.hpa_min_replicas, options.hpa_max_replicas,
                                options.hpa_cpu_target_percent)});
    }
  }
  ManifestBundle bundle;
  for (auto* group : {&pvs, &pvcs, &services, &deployments, &hpas}) {
    for (auto& doc : *group) bundle.documents.push_back(std::move(doc));
  }
  return bundle;
}

std::string JoinBundle(const ManifestBundle& bundle) {
  std::string out;
  for (std::size_t i = 0; i < bundle.documents.size(); ++i) {
    if (i > 0) out += "---\n";
    out += bundle.documents[i].yaml_text;
  }
  return out;
}

ManifestBundle SplitBundle(std::string_view text) {
  ManifestBundle bundle;
  std::vector<std::string> chunks(1);
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
    std::string_view line = text.substr(pos, end - pos);
    if (line == "---\n" || line == "---") chunks.emplace_back();
    else chunks.back() += line;
    pos = end;
  }
  for (std::string& chunk : chunks) {
    if (chunk.find_first_not_of(" \t\n") == std::string::npos) continue;
    try {
      YAML::Node node = YAML::Load(chunk);
      std::string kind = node["kind"].as<std::string>();
      std::string name = node["metadata"]["name"].as<std::string>();
      bundle.documents.push_back({std::move(kind), std::move(name), std::move(chunk)});
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::kMalformedDocument, std::string("manifest document: ") + e.what());
    }
  }
  return bundle;
}

void WriteBundle(const ManifestBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::size_t width = std::max<std::size_t>(2, std::to_string(bundle.documents.size()).size());
  for (std::size_t i = 0; i < bundle.documents.size(); ++i) {
    const ManifestDocument& doc = bundle.documents[i];
    std::string number = std::to_string(i);
    number.insert(0, width - number.size(), '0');
    std::ofstream out(dir / (number + "-" + Lower(doc.kind) + "-" + doc.name + ".yaml"),
                      std::ios::binary);
    out << doc.yaml_text;
    if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + doc.name);
  }
  std::ofstream all(dir / "all.yaml", std::ios::binary);
  all << JoinBundle(bundle);
  if (!all) throw Error(ErrorCode::kIo, "cannot write " + (dir / "all.yaml").string());
}

}  // namespace j2k
