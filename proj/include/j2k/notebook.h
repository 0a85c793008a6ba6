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

#ifndef J2K_NOTEBOOK_H_
#define J2K_NOTEBOOK_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace j2k {

// Slugs are capped so that every derived Kubernetes object name
// ("<slug>-deployment", "<slug>-svc", ...) stays a valid DNS label.
inline constexpr std::size_t kMaxSlugLength = 40;

struct Cell {
  std::size_t index = 0;  // 0-based position among code cells
  std::string source;
  std::optional<std::string> marker;

  bool operator==(const Cell&) const = default;
};

struct Notebook {
  std::string format_version;  // "<nbformat>.<nbformat_minor>"
  std::string kernel_language;
  std::vector<Cell> cells;
  std::size_t skipped_count = 0;  // markdown/raw cells dropped while parsing

  bool operator==(const Notebook&) const = default;
};

// Parses an nbformat-4 JSON document. Throws Error(kMalformedDocument) when
// the document is not a notebook and Error(kUnsupportedFormat) for any major
// version other than 4.
Notebook ParseNotebook(std::string_view raw_bytes);

// Reads `# j2k: step <name>` marker lines. The marker line is removed from the
// cell source and the name is slugified; colliding names get -2, -3, ...
// suffixes in cell order. Cells that already carry a marker keep it, which
// makes the transformation idempotent.
Notebook ExtractMarkers(Notebook notebook);

// Lowercases and collapses every run of characters outside [a-z0-9] to a
// single '-'. Returns an empty string when nothing slug-worthy remains.
std::string Slugify(std::string_view name);

}  // namespace j2k

#endif  // J2K_NOTEBOOK_H_
