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

#include "j2k/cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "j2k/dataflow.h"
#include "j2k/deps.h"
#include "j2k/environment.h"
#include "j2k/error.h"
#include "j2k/manifests.h"
#include "j2k/notebook.h"
#include "j2k/sim.h"

namespace j2k {
namespace {

namespace fs = std::filesystem;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

struct Options {
  std::string notebook;
  std::string env_spec;
  std::string out = "out";
  std::string storage;
  std::string namespace_name = "default";
  bool hpa = true;
  std::uint64_t seed = 0;
  int ticks = 40;
  std::string faults;
  std::string format = "json";
};

fs::path OutDir(const Options& opts) {
  if (const char* env = std::getenv("J2K_OUT"); env != nullptr && *env != '\0') return env;
  return opts.out;
}

// Explicit --env-spec, else a j2k.yml next to the notebook, else defaults.
EnvironmentSpec LoadEnvironment(const Options& opts) {
  EnvironmentSpec env;
  fs::path path = opts.env_spec;
  if (path.empty()) {
    fs::path sibling = fs::path(opts.notebook).parent_path() / "j2k.yml";
    if (fs::exists(sibling)) path = sibling;
  }
  if (!path.empty()) env = ParseEnvironmentSpec(ReadFile(path));
  if (!opts.storage.empty()) env.storage = ParseStorageMode(opts.storage);
  return env;
}

StepGraph LoadGraph(const Options& opts, const EnvironmentSpec& env) {
  Notebook notebook = ExtractMarkers(ParseNotebook(ReadFile(opts.notebook)));
  StepGraph graph = BuildStepGraph(notebook, BuiltinNames(env));
  TopologicalOrder(graph);
  return graph;
}

void Diagnose(const StepGraph& graph, std::ostream& err) {
  for (const UnresolvedUse& u : graph.unresolved) {
    err << "warning: unresolved use of '" << u.var << "' in " << u.step << " (cell " << u.cell
        << ")\n";
  }
  if (graph.lossy_lines > 0) {
    err << "warning: " << graph.lossy_lines
        << " line(s) could not be analyzed precisely; their names were treated as uses\n";
  }
}

int Translate(const Options& opts, std::ostream& out, std::ostream& err) {
  EnvironmentSpec env = LoadEnvironment(opts);
  StepGraph graph = LoadGraph(opts, env);
  Diagnose(graph, err);

  std::vector<DependencyManifest> manifests;
  for (const Step& step : graph.steps) {
    manifests.push_back(CaptureDependencies(step, env));
    for (const std::string& module : manifests.back().unmapped_imports) {
      err << "warning: import '" << module << "' in " << step.id
          << " has no package mapping (cell " << step.min_cell() << ")\n";
    }
  }
  std::vector<BuildContext> contexts = EmitBuildContexts(graph, manifests, env);
  ManifestBundle bundle = BuildBundle(PlanPods(graph, env), StorageFromEnvironment(env),
                                      BundleOptionsFromEnvironment(env, opts.hpa));

  const fs::path root = OutDir(opts);
  fs::remove_all(root / "build");
  fs::remove_all(root / "manifests");
  WriteFile(root / "graph.json", GraphToJson(graph));
  for (const BuildContext& ctx : contexts) {
    for (const auto& [name, text] : ctx.files) WriteFile(root / "build" / ctx.step_id / name, text);
  }
  WriteBundle(bundle, root / "manifests");
  out << "translated " << graph.steps.size() << " step(s), " << graph.edges.size()
      << " edge(s), " << bundle.documents.size() << " manifest(s) into " << root.string() << "\n";
  return kExitOk;
}

int Graph(const Options& opts, std::ostream& out, std::ostream& err) {
  EnvironmentSpec env = LoadEnvironment(opts);
  StepGraph graph = LoadGraph(opts, env);
  Diagnose(graph, err);
  if (opts.format == "dot") out << GraphToDot(graph);
  else out << GraphToJson(graph);
  return kExitOk;
}

int Simulate(const Options& opts, std::ostream& out) {
  const fs::path root = OutDir(opts);
  ManifestBundle bundle = SplitBundle(ReadFile(root / "manifests" / "all.yaml"));
  StepGraph graph = GraphFromJson(ReadFile(root / "graph.json"));
  sim::FaultScript faults;
  if (!opts.faults.empty()) faults = sim::ParseFaultScript(ReadFile(opts.faults));

  sim::ClusterState state = sim::NewCluster(opts.namespace_name, opts.seed);
  state = sim::ApplyBundle(std::move(state), bundle);
  state = sim::AttachWorkflow(std::move(state), graph);
  state = sim::Advance(std::move(state), opts.ticks, faults);
  WriteFile(root / "events.jsonl", sim::EventsToJsonLines(state.events));

  sim::RunSummary summary = sim::Summarize(state);
  out << "steps completed: " << summary.steps_completed << "/" << summary.steps_total << "\n"
      << "liveness restarts: " << summary.liveness_restarts << "\n"
      << "pod replacements: " << summary.pod_replacements << "\n"
      << "scale events: " << summary.scale_events << "\n"
      << "events: " << state.events.size() << " -> " << (root / "events.jsonl").string() << "\n";
  return summary.steps_completed == summary.steps_total ? kExitOk : kExitIncomplete;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opts;
  CLI::App app{"Translate Jupyter notebooks into containerized Kubernetes workflows"};
  app.require_subcommand(1);

  CLI::App* translate = app.add_subcommand("translate", "Emit graph, build contexts and manifests");
  translate->add_option("--notebook", opts.notebook, "Input .ipynb")->required();
  translate->add_option("--env-spec", opts.env_spec, "Environment spec (j2k.yml)");
  translate->add_option("--out", opts.out, "Output directory");
  translate->add_option("--storage", opts.storage, "local or cloud");
  translate->add_flag("--hpa,!--no-hpa", opts.hpa, "Emit autoscalers");

  CLI::App* graph = app.add_subcommand("graph", "Print the step graph");
  graph->add_option("--notebook", opts.notebook, "Input .ipynb")->required();
  graph->add_option("--env-spec", opts.env_spec, "Environment spec (j2k.yml)");
  graph->add_option("--format", opts.format, "json or dot")
      ->check(CLI::IsMember({"json", "dot"}));

  CLI::App* simulate = app.add_subcommand("simulate", "Run the translated workflow in the simulator");
  simulate->add_option("--out", opts.out, "Directory written by translate");
  simulate->add_option("--namespace", opts.namespace_name, "Cluster namespace");
  simulate->add_option("--seed", opts.seed, "Fault RNG seed");
  simulate->add_option("--ticks", opts.ticks, "Ticks to run")->check(CLI::NonNegativeNumber);
  simulate->add_option("--faults", opts.faults, "Fault script (YAML)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (translate->parsed()) return Translate(opts, out, err);
    if (graph->parsed()) return Graph(opts, out, err);
    return Simulate(opts, out);
  } catch (const Error& e) {
    err << "error: " << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace j2k
