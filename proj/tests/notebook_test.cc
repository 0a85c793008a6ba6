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

#include <gtest/gtest.h>

#include "j2k/error.h"
#include "json.hpp"
#include "test_support.h"

namespace j2k {
namespace {

using testing::Fixture;
using testing::ReadText;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::string OneCell(const std::string& source) {
  nlohmann::json doc = {{"nbformat", 4},
                        {"nbformat_minor", 5},
                        {"metadata", nlohmann::json::object()},
                        {"cells", {{{"cell_type", "code"}, {"source", source}}}}};
  return doc.dump();
}

TEST(ParseNotebook, Linear3Fixture) {
  std::string raw = ReadText(Fixture("linear3.ipynb"));
  Notebook nb = ParseNotebook(raw);
  ASSERT_EQ(nb.cells.size(), 3u);
  EXPECT_EQ(nb.cells[1].source, "b = a + 1");
  EXPECT_EQ(nb.kernel_language, "python");
  EXPECT_EQ(nb.format_version, "4.5");

  // Independent read of the same file.
  nlohmann::json doc = nlohmann::json::parse(raw);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(nb.cells[i].source, doc["cells"][i]["source"].get<std::string>());
    EXPECT_EQ(nb.cells[i].index, i);
  }
}

TEST(ParseNotebook, MarkdownCellsAreSkippedAndCounted) {
  Notebook nb = ParseNotebook(ReadText(Fixture("pipeline.ipynb")));
  EXPECT_EQ(nb.skipped_count, 1u);
  EXPECT_EQ(nb.cells.size(), 4u);
  EXPECT_EQ(nb.cells[0].index, 0u);
}

TEST(ParseNotebook, ListSourcesJoinWithoutSeparator) {
  nlohmann::json doc = {{"nbformat", 4},
                        {"nbformat_minor", 2},
                        {"cells", {{{"cell_type", "code"}, {"source", {"x = 1\r\n", "y = x"}}}}}};
  Notebook nb = ParseNotebook(doc.dump());
  EXPECT_EQ(nb.cells[0].source, "x = 1\ny = x");
}

TEST(ParseNotebook, RoundTripPreservesSources) {
  std::string raw = ReadText(Fixture("diamond.ipynb"));
  nlohmann::json doc = nlohmann::json::parse(raw);
  std::string expected;
  for (const auto& cell : doc["cells"]) {
    if (cell["cell_type"] == "code") expected += cell["source"].get<std::string>();
  }
  std::string actual;
  for (const Cell& c : ParseNotebook(raw).cells) actual += c.source;
  EXPECT_EQ(actual, expected);
}

TEST(ParseNotebook, Errors) {
  EXPECT_EQ(CodeOf([] { ParseNotebook("{not json"); }), ErrorCode::kMalformedDocument);
  EXPECT_EQ(CodeOf([] { ParseNotebook(R"({"nbformat": 4})"); }), ErrorCode::kMalformedDocument);
  EXPECT_EQ(CodeOf([] { ParseNotebook(R"({"cells": []})"); }), ErrorCode::kMalformedDocument);
  EXPECT_EQ(CodeOf([] { ParseNotebook(R"({"nbformat": 3, "cells": []})"); }),
            ErrorCode::kUnsupportedFormat);
  EXPECT_EQ(CodeOf([] { ParseNotebook(""); }), ErrorCode::kMalformedDocument);
}

TEST(ExtractMarkers, SlugifiesAndStripsMarkerLine) {
  Notebook nb = ExtractMarkers(ParseNotebook(OneCell("# j2k: step Load Data\nx=1")));
  ASSERT_TRUE(nb.cells[0].marker.has_value());
  EXPECT_EQ(*nb.cells[0].marker, "load-data");
  EXPECT_EQ(nb.cells[0].source, "x=1");
}

TEST(ExtractMarkers, LeadingBlankLinesAllowed) {
  Notebook nb = ExtractMarkers(ParseNotebook(OneCell("\n   \n# j2k: step prep\ny = 2\n")));
  EXPECT_EQ(nb.cells[0].marker, "prep");
  EXPECT_EQ(nb.cells[0].source, "\n   \ny = 2\n");
}

TEST(ExtractMarkers, NoMarkerIsIdentity) {
  Notebook in = ParseNotebook(OneCell("x = 1\n# j2k: step late\n"));
  Notebook out = ExtractMarkers(in);
  EXPECT_FALSE(out.cells[0].marker.has_value());
  EXPECT_EQ(out.cells[0].source, in.cells[0].source);
}

TEST(ExtractMarkers, NotAMarkerWithoutSeparator) {
  Notebook nb = ExtractMarkers(ParseNotebook(OneCell("# j2k: steps x\nz = 1")));
  EXPECT_FALSE(nb.cells[0].marker.has_value());
}

TEST(ExtractMarkers, CollisionsGetSuffixes) {
  Notebook nb;
  for (std::size_t i = 0; i < 3; ++i) nb.cells.push_back(Cell{i, "# j2k: step train\nx = 1\n", {}});
  nb = ExtractMarkers(nb);
  EXPECT_EQ(nb.cells[0].marker, "train");
  EXPECT_EQ(nb.cells[1].marker, "train-2");
  EXPECT_EQ(nb.cells[2].marker, "train-3");
}

TEST(ExtractMarkers, Idempotent) {
  Notebook nb;
  nb.cells.push_back(Cell{0, "# j2k: step A\nx = 1\n", {}});
  nb.cells.push_back(Cell{1, "# j2k: step a\n# j2k: step b\n", {}});
  nb.cells.push_back(Cell{2, "y = x\n", {}});
  Notebook once = ExtractMarkers(nb);
  EXPECT_EQ(ExtractMarkers(once), once);
  EXPECT_EQ(once.cells[1].marker, "a-2");
  EXPECT_EQ(once.cells[1].source, "# j2k: step b\n");
}

TEST(ExtractMarkers, EmptyOrUnsluggableNameIsInvalid) {
  EXPECT_EQ(CodeOf([] { ExtractMarkers(ParseNotebook(OneCell("# j2k: step   \nx = 1"))); }),
            ErrorCode::kInvalidMarker);
  EXPECT_EQ(CodeOf([] { ExtractMarkers(ParseNotebook(OneCell("# j2k: step ???\nx = 1"))); }),
            ErrorCode::kInvalidMarker);
}

TEST(Slugify, Rules) {
  EXPECT_EQ(Slugify("Load Data"), "load-data");
  EXPECT_EQ(Slugify("  --Train__Model!! "), "train-model");
  EXPECT_EQ(Slugify("v2.0"), "v2-0");
  EXPECT_EQ(Slugify(std::string(60, 'x')).size(), kMaxSlugLength);
  EXPECT_EQ(Slugify("***"), "");
}

}  // namespace
}  // namespace j2k
