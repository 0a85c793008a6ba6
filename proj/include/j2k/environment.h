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

#ifndef J2K_ENVIRONMENT_H_
#define J2K_ENVIRONMENT_H_

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace j2k {

enum class StorageMode { kLocal, kCloud };

std::string_view StorageModeName(StorageMode mode);
StorageMode ParseStorageMode(std::string_view text);  // throws Error(kInvalidConfig)

struct EnvVar {
  std::string name;
  std::string value;

  bool operator==(const EnvVar&) const = default;
};

// Contents of j2k.yml. Every field has a default, so an empty document is a
// valid environment.
struct EnvironmentSpec {
  std::map<std::string, std::string> package_map;  // import name -> package
  std::map<std::string, std::string> pins;         // package -> version
  std::vector<EnvVar> env;                         // document order
  std::string broker = "my-broker-address";
  StorageMode storage = StorageMode::kLocal;
  std::vector<std::string> builtin_extra;

  // Build context.
  std::string base_image = "python:3.11-slim";
  std::string install_command = "pip install --no-cache-dir {packages}";
  std::string runtime = "python";

  // Pod plan.
  std::string image_prefix = "j2k-";
  std::string tag = "latest";

  // Storage details.
  std::string node_name = "worker-1";
  std::string local_path = "/data/j2k";
  std::string capacity = "5Gi";
  std::string efs_handle;

  // Autoscaler.
  int hpa_min_replicas = 3;
  int hpa_max_replicas = 10;
  int hpa_cpu_target_percent = 50;
};

// Parses j2k.yml. Throws Error(kInvalidConfig) on YAML errors or wrongly
// typed fields; unknown keys are rejected so typos surface early.
EnvironmentSpec ParseEnvironmentSpec(std::string_view yaml_text);

// Default builtins plus builtin_extra.
std::set<std::string> BuiltinNames(const EnvironmentSpec& spec);

}  // namespace j2k

#endif  // J2K_ENVIRONMENT_H_
