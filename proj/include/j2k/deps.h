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

#ifndef J2K_DEPS_H_
#define J2K_DEPS_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "j2k/dataflow.h"
#include "j2k/environment.h"

namespace j2k {

inline constexpr std::string_view kUnpinned = "unpinned";
inline constexpr std::string_view kSharedMount = "/mnt/efs";

struct PackageRef {
  std::string name;
  std::string version;  // or "unpinned"

  bool operator==(const PackageRef&) const = default;
};

// Per-step dependency record, written into the build context as manifest.yml.
struct DependencyManifest {
  std::string step_id;
  std::vector<PackageRef> packages;  // sorted and unique by name
  std::vector<std::string> input_files;
  std::vector<EnvVar> env_vars;
  std::vector<std::string> unmapped_imports;

  bool operator==(const DependencyManifest&) const = default;
};

// Maps the step's imports through the environment's package table. An import
// "a.b.c" is looked up as "a.b.c", then "a.b", then "a".
DependencyManifest CaptureDependencies(const Step& step, const EnvironmentSpec& env);

// Sorted-key YAML and its inverse (throws Error(kMalformedDocument)).
std::string ManifestToYaml(const DependencyManifest& manifest);
DependencyManifest ManifestFromYaml(std::string_view yaml_text);

// A container build context: relative path -> file content.
struct BuildContext {
  std::string step_id;
  std::map<std::string, std::string> files;
};

// Topic carrying availability signals from `producer` to `consumer`.
std::string TopicName(std::string_view producer, std::string_view consumer);

// Emits Dockerfile, step.src, manifest.yml and runner.src for one step. The
// graph supplies the step's inbound variables and outbound topics.
BuildContext EmitBuildContext(const Step& step, const DependencyManifest& manifest,
                              const StepGraph& graph, const EnvironmentSpec& env);

// One context per step; throws Error(kDuplicateStepId) when two steps share
// an id (their contexts would collide on disk).
std::vector<BuildContext> EmitBuildContexts(const StepGraph& graph,
                                            const std::vector<DependencyManifest>& manifests,
                                            const EnvironmentSpec& env);

}  // namespace j2k

#endif  // J2K_DEPS_H_
