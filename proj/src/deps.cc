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

#include "j2k/deps.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "j2k/error.h"
#include "j2k/pylex.h"

namespace j2k {
namespace {

// Looks like "data/train.csv": no whitespace, no URL scheme, and a short
// single-case alphanumeric extension after the last dot.
bool LooksLikeFilePath(std::string_view s) {
  if (s.empty() || s.size() > 4096) return false;
  if (s.find("://") != std::string_view::npos) return false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '{' || c == '}') return false;
  }
  std::size_t dot = s.rfind('.');
  std::size_t slash = s.rfind('/');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == s.size()) return false;
  if (slash != std::string_view::npos && slash > dot) return false;
  std::string_view ext = s.substr(dot + 1);
  if (ext.size() > 8) return false;
  bool has_alpha = false, has_lower = false, has_upper = false;
  for (char c : ext) {
    unsigned char u = static_cast<unsigned char>(c);
    if (!std::isalnum(u)) return false;
    has_alpha |= std::isalpha(u) != 0;
    has_lower |= std::islower(u) != 0;
    has_upper |= std::isupper(u) != 0;
  }
  return has_alpha && !(has_lower && has_upper);
}

std::string PyStr(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\\' || c == '"') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string PyList(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += PyStr(items[i]);
  }
  return out + "]";
}

std::string InstallCommand(const EnvironmentSpec& env, const DependencyManifest& manifest) {
  std::string packages;
  for (const PackageRef& p : manifest.packages) {
    if (!packages.empty()) packages += ' ';
    packages += p.version == kUnpinned ? p.name : p.name + "==" + p.version;
  }
  const std::string placeholder = "{packages}";
  std::string command = env.install_command;
  std::size_t at = command.find(placeholder);
  if (at == std::string::npos) return command;
  if (packages.empty()) return "true";
  return command.replace(at, placeholder.size(), packages);
}

std::string RenderDockerfile(const EnvironmentSpec& env, const DependencyManifest& manifest) {
  std::string out;
  out += "FROM " + env.base_image + "\n";
  out += "COPY manifest.yml step.src runner.src /app/\n";
  out += "WORKDIR /app\n";
  out += "RUN " + InstallCommand(env, manifest) + "\n";
  out += "EXPOSE 8080\n";
  out += "CMD [\"" + env.runtime + "\", \"runner.src\"]\n";
  return out;
}

constexpr std::string_view kRunnerPrelude = R"PY(import importlib
import os
import pickle
import sys
import threading
import time
import types
from http.server import BaseHTTPRequestHandler, HTTPServer

try:
    import cloudpickle as serializer
except ImportError:
    serializer = pickle

SHARED_ROOT = os.environ.get("J2K_SHARED_ROOT", "/mnt/efs")
BROKER = os.environ.get("KAFKA_BROKER", "")
POLL_SECONDS = float(os.environ.get("J2K_POLL_SECONDS", "2"))
LOCK_STALE_SECONDS = float(os.environ.get("J2K_LOCK_STALE_SECONDS", "60"))
PROBE_PORT = int(os.environ.get("J2K_PROBE_PORT", "8080"))
ONESHOT = os.environ.get("J2K_ONESHOT", "") == "1"
STATE = {"ready": False}


def log(message):
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    sys.stderr.write("%s %s: %s\n" % (stamp, STEP_ID, message))
    sys.stderr.flush()


class ProbeHandler(BaseHTTPRequestHandler):
    def do_GET(self):
        if self.path == "/healthz":
            self.reply(200, "ok")
        elif self.path == "/readiness":
            if STATE["ready"]:
                self.reply(200, "ok")
            else:
                self.reply(503, "waiting for inputs")
        else:
            self.reply(404, "not found")

    def reply(self, status, body):
        data = body.encode()
        self.send_response(status)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):
        pass


def serve_probes():
    if PROBE_PORT == 0:
        return
    server = HTTPServer(("0.0.0.0", PROBE_PORT), ProbeHandler)
    threading.Thread(target=server.serve_forever, daemon=True).start()


def step_dir(step):
    return os.path.join(SHARED_ROOT, step)


def done_marker(step):
    return os.path.join(step_dir(step), "_SUCCESS")


def broker_consumer(topics):
    if not BROKER or not topics:
        return None
    try:
        from kafka import KafkaConsumer
        return KafkaConsumer(*topics, bootstrap_servers=BROKER, group_id=STEP_ID,
                             auto_offset_reset="earliest")
    except Exception as exc:
        log("no broker, polling the shared volume (%s)" % exc)
        return None


def await_topics(consumer, topics):
    pending = set(topics)
    for message in consumer:
        pending.discard(message.topic)
        if not pending:
            break
    consumer.close()


def wait_for(producer, var):
    while not os.path.exists(done_marker(producer)):
        time.sleep(POLL_SECONDS)
    with open(os.path.join(step_dir(producer), var), "rb") as f:
        value = serializer.load(f)
    if isinstance(value, tuple) and len(value) == 2 and value[0] == "__j2k_module__":
        return importlib.import_module(value[1])
    return value


def export(namespace, var):
    value = namespace[var]
    if isinstance(value, types.ModuleType):
        value = ("__j2k_module__", value.__name__)
    os.makedirs(step_dir(STEP_ID), exist_ok=True)
    path = os.path.join(step_dir(STEP_ID), var)
    with open(path + ".tmp", "wb") as f:
        serializer.dump(value, f)
    os.replace(path + ".tmp", path)


def publish(topic):
    if not BROKER:
        return
    try:
        from kafka import KafkaProducer
        producer = KafkaProducer(bootstrap_servers=BROKER)
        producer.send(topic, STEP_ID.encode())
        producer.flush()
        producer.close()
    except Exception as exc:
        log("publish to %s skipped, consumers fall back to polling (%s)" % (topic, exc))


def claim():
    # One replica executes the step; the others stand by until it finishes
    # or its lock goes stale.
    os.makedirs(step_dir(STEP_ID), exist_ok=True)
    lock = os.path.join(step_dir(STEP_ID), "_LOCK")
    while not os.path.exists(done_marker(STEP_ID)):
        try:
            os.close(os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY))
        except FileExistsError:
            try:
                if time.time() - os.path.getmtime(lock) > LOCK_STALE_SECONDS:
                    os.remove(lock)
                    continue
            except FileNotFoundError:
                continue
            time.sleep(POLL_SECONDS)
            continue
        heartbeat = threading.Thread(target=keep_lock, args=(lock,), daemon=True)
        heartbeat.start()
        return True
    return False


def keep_lock(lock):
    while not os.path.exists(done_marker(STEP_ID)):
        try:
            os.utime(lock)
        except FileNotFoundError:
            return
        time.sleep(LOCK_STALE_SECONDS / 4)


def mark_done():
    with open(done_marker(STEP_ID), "w") as f:
        f.write(STEP_ID)


def run_step(namespace):
    with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), "step.src")) as f:
        code = compile(f.read(), "step.src", "exec")
    exec(code, namespace)


def idle():
    if ONESHOT:
        sys.exit(0)
    while True:
        time.sleep(3600)
)PY";

std::string RenderRunner(const Step& step, const StepGraph& graph) {
  std::vector<const Edge*> inbound;
  std::vector<std::string> consume_topics;
  std::vector<std::string> produce_topics;
  for (const Edge& e : graph.edges) {
    if (e.to == step.id) {
      inbound.push_back(&e);
      std::string topic = TopicName(e.from, e.to);
      if (std::find(consume_topics.begin(), consume_topics.end(), topic) == consume_topics.end()) {
        consume_topics.push_back(topic);
      }
    }
    if (e.from == step.id) {
      std::string topic = TopicName(e.from, e.to);
      if (std::find(produce_topics.begin(), produce_topics.end(), topic) == produce_topics.end()) {
        produce_topics.push_back(topic);
      }
    }
  }

  std::ostringstream out;
  out << "# Generated by j2k for step " << step.id << ". Do not edit.\n";
  out << "STEP_ID = " << PyStr(step.id) << "\n";
  out << "CONSUME_TOPICS = " << PyList(consume_topics) << "\n";
  out << "PRODUCE_TOPICS = " << PyList(produce_topics) << "\n\n";
  out << kRunnerPrelude;
  out << "\n\ndef main():\n";
  out << "    serve_probes()\n";
  out << "    namespace = {\"__name__\": \"__main__\"}\n";
  out << "    consumer = broker_consumer(CONSUME_TOPICS)\n";
  out << "    if consumer is not None:\n";
  out << "        await_topics(consumer, CONSUME_TOPICS)\n";
  for (const Edge* e : inbound) {
    out << "    namespace[" << PyStr(e->var) << "] = wait_for(" << PyStr(e->from) << ", "
        << PyStr(e->var) << ")\n";
  }
  out << "    STATE[\"ready\"] = True\n";
  out << "    if not claim():\n";
  out << "        log(\"outputs already present, skipping\")\n";
  out << "        idle()\n";
  out << "    log(\"executing\")\n";
  out << "    run_step(namespace)\n";
  for (const auto& var : step.exports) {
    out << "    export(namespace, " << PyStr(var) << ")\n";
  }
  out << "    mark_done()\n";
  for (const auto& topic : produce_topics) {
    out << "    publish(" << PyStr(topic) << ")\n";
  }
  out << "    log(\"done\")\n";
  out << "    idle()\n";
  out << "\n\nif __name__ == \"__main__\":\n";
  out << "    main()\n";
  return out.str();
}

std::vector<std::string> StringList(const YAML::Node& node, const char* key) {
  std::vector<std::string> out;
  const YAML::Node list = node[key];
  if (!list) return out;
  if (!list.IsSequence()) {
    throw Error(ErrorCode::kMalformedDocument, std::string("manifest: '") + key + "' must be a list");
  }
  for (const auto& item : list) out.push_back(item.as<std::string>());
  return out;
}

}  // namespace

std::string TopicName(std::string_view producer, std::string_view consumer) {
  return std::string(producer) + "-to-" + std::string(consumer);
}

DependencyManifest CaptureDependencies(const Step& step, const EnvironmentSpec& env) {
  DependencyManifest manifest;
  manifest.step_id = step.id;
  std::map<std::string, std::string> packages;
  for (const std::string& import : step.imports) {
    std::string candidate = import;
    std::string package;
    while (true) {
      auto it = env.package_map.find(candidate);
      if (it != env.package_map.end()) {
        package = it->second;
        break;
      }
      std::size_t dot = candidate.rfind('.');
      if (dot == std::string::npos) break;
      candidate.resize(dot);
    }
    if (package.empty()) {
      manifest.unmapped_imports.push_back(import);
      continue;
    }
    auto pin = env.pins.find(package);
    packages[package] = pin == env.pins.end() ? std::string(kUnpinned) : pin->second;
  }
  for (const auto& [name, version] : packages) manifest.packages.push_back({name, version});
  manifest.env_vars = env.env;
  std::set<std::string> seen;
  for (std::string& literal : pylex::StringLiterals(step.script)) {
    if (LooksLikeFilePath(literal) && seen.insert(literal).second) {
      manifest.input_files.push_back(std::move(literal));
    }
  }
  return manifest;
}

template <typename T>
YAML::EMITTER_MANIP SeqStyle(const std::vector<T>& items) {
  return items.empty() ? YAML::Flow : YAML::Block;
}

std::string ManifestToYaml(const DependencyManifest& manifest) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "env_vars" << YAML::Value << SeqStyle(manifest.env_vars) << YAML::BeginSeq;
  for (const EnvVar& var : manifest.env_vars) {
    out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << var.name << YAML::Key << "value"
        << YAML::Value << YAML::DoubleQuoted << var.value << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "input_files" << YAML::Value << SeqStyle(manifest.input_files) << YAML::BeginSeq;
  for (const auto& file : manifest.input_files) out << YAML::DoubleQuoted << file;
  out << YAML::EndSeq;
  out << YAML::Key << "packages" << YAML::Value << SeqStyle(manifest.packages) << YAML::BeginSeq;
  for (const PackageRef& p : manifest.packages) {
    out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << p.name << YAML::Key << "version"
        << YAML::Value << YAML::DoubleQuoted << p.version << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "step_id" << YAML::Value << manifest.step_id;
  out << YAML::Key << "unmapped_imports" << YAML::Value << SeqStyle(manifest.unmapped_imports) << YAML::BeginSeq;
  for (const auto& name : manifest.unmapped_imports) out << name;
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

DependencyManifest ManifestFromYaml(std::string_view yaml_text) {
  DependencyManifest manifest;
  try {
    YAML::Node root = YAML::Load(std::string(yaml_text));
    if (!root.IsMap()) throw Error(ErrorCode::kMalformedDocument, "manifest must be a mapping");
    manifest.step_id = root["step_id"].as<std::string>();
    if (const YAML::Node env = root["env_vars"]) {
      for (const auto& var : env) {
        manifest.env_vars.push_back({var["name"].as<std::string>(), var["value"].as<std::string>()});
      }
    }
    if (const YAML::Node packages = root["packages"]) {
      for (const auto& p : packages) {
        manifest.packages.push_back({p["name"].as<std::string>(), p["version"].as<std::string>()});
      }
    }
    manifest.input_files = StringList(root, "input_files");
    manifest.unmapped_imports = StringList(root, "unmapped_imports");
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("manifest: ") + e.what());
  }
  return manifest;
}

BuildContext EmitBuildContext(const Step& step, const DependencyManifest& manifest,
                              const StepGraph& graph, const EnvironmentSpec& env) {
  if (manifest.step_id != step.id) {
    throw Error(ErrorCode::kInvalidConfig,
                "manifest for '" + manifest.step_id + "' does not belong to step '" + step.id + "'");
  }
  BuildContext context;
  context.step_id = step.id;
  context.files["Dockerfile"] = RenderDockerfile(env, manifest);
  context.files["step.src"] = step.script;
  context.files["manifest.yml"] = ManifestToYaml(manifest);
  context.files["runner.src"] = RenderRunner(step, graph);
  return context;
}

std::vector<BuildContext> EmitBuildContexts(const StepGraph& graph,
                                            const std::vector<DependencyManifest>& manifests,
                                            const EnvironmentSpec& env) {
  if (manifests.size() != graph.steps.size()) {
    throw Error(ErrorCode::kInvalidConfig, "one dependency manifest per step is required");
  }
  std::set<std::string> ids;
  std::vector<BuildContext> contexts;
  for (std::size_t i = 0; i < graph.steps.size(); ++i) {
    const Step& step = graph.steps[i];
    if (!ids.insert(step.id).second) {
      throw Error(ErrorCode::kDuplicateStepId,
                  "two steps share the id '" + step.id + "' and would share a build directory");
    }
    contexts.push_back(EmitBuildContext(step, manifests[i], graph, env));
  }
  return contexts;
}

}  // namespace j2k
