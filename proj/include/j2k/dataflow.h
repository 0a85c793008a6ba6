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

#ifndef J2K_DATAFLOW_H_
#define J2K_DATAFLOW_H_

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "j2k/notebook.h"

namespace j2k {

// Insertion-ordered set of strings. Notebooks hold a handful of names per
// cell, so linear lookup is fine.
class OrderedSet {
 public:
  OrderedSet() = default;
  OrderedSet(std::initializer_list<std::string> items) {
    for (const auto& item : items) Insert(item);
  }

  bool Insert(const std::string& item) {
    if (Contains(item)) return false;
    items_.push_back(item);
    return true;
  }
  bool Contains(std::string_view item) const {
    return std::find(items_.begin(), items_.end(), item) != items_.end();
  }

  const std::vector<std::string>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  bool operator==(const OrderedSet&) const = default;

 private:
  std::vector<std::string> items_;
};

// Builtins that never count as cross-cell uses.
const std::set<std::string>& DefaultBuiltins();

struct DefUseSet {
  OrderedSet defs;
  OrderedSet uses;
  OrderedSet imports;
  // Uses whose first read happens before any binding of the same name inside
  // the analyzed source. Only these need a value from an earlier step.
  OrderedSet exposed_uses;
  int lossy_lines = 0;

  bool operator==(const DefUseSet&) const = default;
};

// Line-oriented def/use scan over a restricted statement grammar. Lines the
// scanner cannot make sense of are treated conservatively: every identifier
// on them becomes a use and none becomes a def.
DefUseSet ExtractDefUse(std::string_view source,
                        const std::set<std::string>& builtins = DefaultBuiltins());

struct Step {
  std::string id;
  std::vector<std::size_t> cell_indices;
  OrderedSet defs;
  OrderedSet uses;
  OrderedSet imports;
  OrderedSet exposed_uses;
  OrderedSet exports;  // defs read by later steps
  std::string script;

  std::size_t min_cell() const { return cell_indices.front(); }
  bool operator==(const Step&) const = default;
};

struct Edge {
  std::string from;
  std::string to;
  std::string var;

  auto operator<=>(const Edge&) const = default;
};

struct UnresolvedUse {
  std::string step;
  std::size_t cell = 0;
  std::string var;

  bool operator==(const UnresolvedUse&) const = default;
};

struct StepGraph {
  std::vector<Step> steps;
  std::vector<Edge> edges;
  std::vector<UnresolvedUse> unresolved;
  int lossy_lines = 0;

  const Step* Find(std::string_view id) const;
  bool operator==(const StepGraph&) const = default;
};

// Groups cells into steps and links them with last-writer-wins edges.
// Marker-less cells become singleton steps named step-<k>; a marked cell opens
// a step that absorbs the following marker-less cells.
StepGraph BuildStepGraph(const Notebook& notebook,
                         const std::set<std::string>& builtins = DefaultBuiltins());

// Kahn's algorithm with ties broken by ascending minimum cell index. Throws
// Error(kCycleDetected) if the graph is not a DAG.
std::vector<std::string> TopologicalOrder(const StepGraph& graph);

// {steps: [{id, cells, defs, uses, exports}], edges: [{from, to, var}],
//  unresolved: [{var, step, cell}]}, two-space indented.
std::string GraphToJson(const StepGraph& graph);
std::string GraphToDot(const StepGraph& graph);

// Inverse of GraphToJson for the fields the simulator needs (ids, cells,
// defs, uses, exports, edges). Throws Error(kMalformedDocument).
StepGraph GraphFromJson(std::string_view text);

}  // namespace j2k

#endif  // J2K_DATAFLOW_H_
