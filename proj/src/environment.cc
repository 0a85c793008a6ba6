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

#include "j2k/environment.h"

#include <yaml-cpp/yaml.h>

#include "j2k/dataflow.h"
#include "j2k/error.h"

namespace j2k {
namespace {

std::string Scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw Error(ErrorCode::kInvalidConfig, "'" + key + "' must be a scalar");
  return node.as<std::string>();
}

std::map<std::string, std::string> StringMap(const YAML::Node& node, const std::string& key) {
  std::map<std::string, std::string> out;
  if (node.IsNull()) return out;
  if (!node.IsMap()) throw Error(ErrorCode::kInvalidConfig, "'" + key + "' must be a mapping");
  for (const auto& kv : node) {
    std::string k = Scalar(kv.first, key);
    out[k] = Scalar(kv.second, key + "." + k);
  }
  return out;
}

int Integer(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<int>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::kInvalidConfig, "'" + key + "' must be an integer");
  }
}

}  // namespace

std::string_view StorageModeName(StorageMode mode) {
  return mode == StorageMode::kLocal ? "local" : "cloud";
}

StorageMode ParseStorageMode(std::string_view text) {
  if (text == "local") return StorageMode::kLocal;
  if (text == "cloud") return StorageMode::kCloud;
  throw Error(ErrorCode::kInvalidConfig,
              "storage must be 'local' or 'cloud', got '" + std::string(text) + "'");
}

EnvironmentSpec ParseEnvironmentSpec(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("environment spec: ") + e.what());
  }
  EnvironmentSpec spec;
  if (root.IsNull()) return spec;
  if (!root.IsMap()) throw Error(ErrorCode::kInvalidConfig, "environment spec must be a mapping");

  for (const auto& kv : root) {
    const std::string key = Scalar(kv.first, "key");
    const YAML::Node& value = kv.second;
    if (key == "package_map") {
      spec.package_map = StringMap(value, key);
    } else if (key == "pins") {
      spec.pins = StringMap(value, key);
    } else if (key == "env") {
      if (value.IsNull()) continue;
      if (!value.IsMap()) throw Error(ErrorCode::kInvalidConfig, "'env' must be a mapping");
      for (const auto& entry : value) {
        std::string name = Scalar(entry.first, "env");
        spec.env.push_back(EnvVar{name, Scalar(entry.second, "env." + name)});
      }
    } else if (key == "broker") {
      spec.broker = Scalar(value, key);
    } else if (key == "storage") {
      spec.storage = ParseStorageMode(Scalar(value, key));
    } else if (key == "builtin_extra") {
      if (value.IsNull()) continue;
      if (!value.IsSequence()) throw Error(ErrorCode::kInvalidConfig, "'builtin_extra' must be a list");
      for (const auto& name : value) spec.builtin_extra.push_back(Scalar(name, key));
    } else if (key == "base_image") {
      spec.base_image = Scalar(value, key);
    } else if (key == "install_command") {
      spec.install_command = Scalar(value, key);
    } else if (key == "runtime") {
      spec.runtime = Scalar(value, key);
    } else if (key == "image_prefix") {
      spec.image_prefix = Scalar(value, key);
    } else if (key == "tag") {
      spec.tag = Scalar(value, key);
    } else if (key == "node_name") {
      spec.node_name = Scalar(value, key);
    } else if (key == "local_path") {
      spec.local_path = Scalar(value, key);
    } else if (key == "capacity") {
      spec.capacity = Scalar(value, key);
    } else if (key == "efs_handle") {
      spec.efs_handle = Scalar(value, key);
    } else if (key == "hpa") {
      if (!value.IsMap()) throw Error(ErrorCode::kInvalidConfig, "'hpa' must be a mapping");
      for (const auto& entry : value) {
        const std::string field = Scalar(entry.first, "hpa");
        if (field == "min_replicas") spec.hpa_min_replicas = Integer(entry.second, "hpa.min_replicas");
        else if (field == "max_replicas") spec.hpa_max_replicas = Integer(entry.second, "hpa.max_replicas");
        else if (field == "cpu_target_percent")
          spec.hpa_cpu_target_percent = Integer(entry.second, "hpa.cpu_target_percent");
        else throw Error(ErrorCode::kInvalidConfig, "unknown key 'hpa." + field + "'");
      }
    } else {
      throw Error(ErrorCode::kInvalidConfig, "unknown key '" + key + "' in environment spec");
    }
  }
  return spec;
}

std::set<std::string> BuiltinNames(const EnvironmentSpec& spec) {
  std::set<std::string> names = DefaultBuiltins();
  names.insert(spec.builtin_extra.begin(), spec.builtin_extra.end());
  return names;
}

}  // namespace j2k
