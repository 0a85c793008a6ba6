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

// A small tokenizer for notebook (Python) cell sources. It knows just enough
// of the lexical grammar to split logical lines and drop comments and string
// literals; it does not build a syntax tree.

#ifndef J2K_PYLEX_H_
#define J2K_PYLEX_H_

#include <string>
#include <string_view>
#include <vector>

namespace j2k::pylex {

enum class TokenKind { kName, kNumber, kString, kOp };

struct Token {
  TokenKind kind;
  std::string text;  // for kString: the literal body without prefix or quotes

  bool Is(std::string_view op) const { return kind == TokenKind::kOp && text == op; }
  bool IsName(std::string_view name) const { return kind == TokenKind::kName && text == name; }
};

struct LogicalLine {
  int indent = 0;      // indentation column (tabs advance to the next multiple of 8)
  int first_line = 0;  // 1-based physical line where the logical line starts
  std::vector<Token> tokens;
  bool malformed = false;  // unterminated string or unbalanced brackets
};

// Splits source text into logical lines. Bracket nesting and backslash
// continuations join physical lines. Comments vanish. Plain string literals
// become single kString tokens; an f-string is replaced by a parenthesized,
// comma-separated group holding the tokens of its replacement fields, so the
// names it interpolates are still visible to callers.
std::vector<LogicalLine> SplitLogicalLines(std::string_view source);

// Bodies of every non-f string literal in `source`, in order of appearance.
std::vector<std::string> StringLiterals(std::string_view source);

bool IsKeyword(std::string_view name);

}  // namespace j2k::pylex

#endif  // J2K_PYLEX_H_
