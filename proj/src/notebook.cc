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

#include "j2k/notebook.h"

#include <set>
#include <string>
#include <utility>

#include "j2k/error.h"
#include "json.hpp"

namespace j2k {
namespace {

using nlohmann::json;

constexpr std::string_view kMarkerPrefix = "# j2k: step";

std::string NormalizeNewlines(std::string text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    out.push_back(text[i]);
  }
  return out;
}

std::string JoinSource(const json& source, std::size_t cell_position) {
  if (source.is_string()) return source.get<std::string>();
  if (!source.is_array()) {
    throw Error(ErrorCode::kMalformedDocument,
                "cell " + std::to_string(cell_position) +
                    ": 'source' must be a string or a list of strings");
  }
  std::string joined;
  for (const auto& line : source) {
    if (!line.is_string()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "cell " + std::to_string(cell_position) +
                      ": 'source' list holds a non-string entry");
    }
    joined += line.get_ref<const std::string&>();
  }
  return joined;
}

std::string KernelLanguage(const json& doc) {
  auto metadata = doc.find("metadata");
  if (metadata == doc.end() || !metadata->is_object()) return "";
  auto spec = metadata->find("kernelspec");
  if (spec != metadata->end() && spec->is_object()) {
    auto language = spec->find("language");
    if (language != spec->end() && language->is_string()) return *language;
  }
  auto info = metadata->find("language_info");
  if (info != metadata->end() && info->is_object()) {
    auto name = info->find("name");
    if (name != info->end() && name->is_string()) return *name;
  }
  return "";
}

std::string_view TrimView(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  std::size_t e = s.size();
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

struct MarkerLine {
  std::size_t begin = 0;  // offset of the marker line
  std::size_t end = 0;    // offset just past its newline (or end of text)
  std::string name;
};

// Locates the first non-blank line and reports it when it is a marker.
std::optional<MarkerLine> FindMarkerLine(const std::string& source) {
  std::size_t pos = 0;
  while (pos < source.size()) {
    std::size_t nl = source.find('\n', pos);
    std::size_t line_end = nl == std::string::npos ? source.size() : nl;
    std::string_view line = TrimView(std::string_view(source).substr(pos, line_end - pos));
    if (line.empty()) {
      pos = nl == std::string::npos ? source.size() : nl + 1;
      continue;
    }
    if (line.substr(0, kMarkerPrefix.size()) != kMarkerPrefix) return std::nullopt;
    std::string_view rest = line.substr(kMarkerPrefix.size());
    if (!rest.empty() && rest.front() != ' ' && rest.front() != '\t') return std::nullopt;
    return MarkerLine{pos, nl == std::string::npos ? source.size() : nl + 1,
                      std::string(TrimView(rest))};
  }
  return std::nullopt;
}

std::string UniqueName(const std::string& base, const std::set<std::string>& used) {
  if (!used.contains(base)) return base;
  for (int n = 2;; ++n) {
    std::string suffix = "-" + std::to_string(n);
    std::string stem = base.substr(0, kMaxSlugLength - std::min(kMaxSlugLength, suffix.size()));
    while (!stem.empty() && stem.back() == '-') stem.pop_back();
    std::string candidate = stem + suffix;
    if (!used.contains(candidate)) return candidate;
  }
}

}  // namespace

Notebook ParseNotebook(std::string_view raw_bytes) {
  json doc = json::parse(raw_bytes.begin(), raw_bytes.end(), nullptr,
                         /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::kMalformedDocument, "notebook is not valid JSON");
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kMalformedDocument, "notebook root must be a JSON object");
  }
  auto cells = doc.find("cells");
  if (cells == doc.end() || !cells->is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "notebook has no 'cells' list");
  }
  auto major = doc.find("nbformat");
  if (major == doc.end() || !major->is_number_integer()) {
    throw Error(ErrorCode::kMalformedDocument, "notebook has no integer 'nbformat'");
  }
  if (major->get<long long>() != 4) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "nbformat " + std::to_string(major->get<long long>()) +
                    " is not supported (only major version 4)");
  }
  long long minor = 0;
  if (auto it = doc.find("nbformat_minor"); it != doc.end()) {
    if (!it->is_number_integer()) {
      throw Error(ErrorCode::kMalformedDocument, "'nbformat_minor' must be an integer");
    }
    minor = it->get<long long>();
  }

  Notebook notebook;
  notebook.format_version = std::to_string(major->get<long long>()) + "." + std::to_string(minor);
  notebook.kernel_language = KernelLanguage(doc);

  std::size_t position = 0;
  for (const auto& cell : *cells) {
    if (!cell.is_object()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "cell " + std::to_string(position) + " is not an object");
    }
    auto type = cell.find("cell_type");
    if (type == cell.end() || !type->is_string()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "cell " + std::to_string(position) + " has no 'cell_type'");
    }
    auto source = cell.find("source");
    if (source == cell.end()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "cell " + std::to_string(position) + " has no 'source'");
    }
    std::string text = JoinSource(*source, position);
    ++position;
    if (*type != "code") {
      ++notebook.skipped_count;
      continue;
    }
    notebook.cells.push_back(Cell{notebook.cells.size(), NormalizeNewlines(std::move(text)),
                                  std::nullopt});
  }
  return notebook;
}

std::string Slugify(std::string_view name) {
  std::string slug;
  bool pending_dash = false;
  for (char raw : name) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      if (pending_dash && !slug.empty()) slug.push_back('-');
      pending_dash = false;
      slug.push_back(static_cast<char>(c));
    } else {
      pending_dash = true;
    }
  }
  if (slug.size() > kMaxSlugLength) slug.resize(kMaxSlugLength);
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  return slug;
}

Notebook ExtractMarkers(Notebook notebook) {
  std::set<std::string> used;
  for (const Cell& cell : notebook.cells) {
    if (cell.marker) used.insert(*cell.marker);
  }
  for (Cell& cell : notebook.cells) {
    if (cell.marker) continue;
    auto line = FindMarkerLine(cell.source);
    if (!line) continue;
    std::string slug = Slugify(line->name);
    if (slug.empty()) {
      throw Error(ErrorCode::kInvalidMarker,
                  "step marker '" + line->name + "' has no usable name (cell " +
                      std::to_string(cell.index) + ")");
    }
    std::string name = UniqueName(slug, used);
    used.insert(name);
    cell.marker = name;
    cell.source.erase(line->begin, line->end - line->begin);
  }
  return notebook;
}

}  // namespace j2k
