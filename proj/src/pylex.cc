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

#include "j2k/pylex.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

namespace j2k::pylex {
namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False",  "None",   "True",    "and",      "as",       "assert", "async",
    "await",  "break",  "class",   "continue", "def",      "del",    "elif",
    "else",   "except", "finally", "for",      "from",     "global", "if",
    "import", "in",     "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",   "raise",  "return",  "try",      "while",    "with",   "yield"};

constexpr std::array<std::string_view, 5> kThreeCharOps = {"**=", "//=", ">>=", "<<=", "..."};
constexpr std::array<std::string_view, 19> kTwoCharOps = {
    "->", ":=", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "@=", "**", "//", "<<", ">>"};

bool IsIdentStart(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return std::isalpha(u) || c == '_' || u >= 0x80;
}

bool IsIdentChar(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_' || u >= 0x80;
}

bool IsStringPrefix(std::string_view name, bool* is_fstring) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  static constexpr std::array<std::string_view, 8> kPrefixes = {"r",  "u",  "f",  "b",
                                                                "br", "rb", "fr", "rf"};
  if (std::find(kPrefixes.begin(), kPrefixes.end(), lower) == kPrefixes.end()) return false;
  *is_fstring = lower.find('f') != std::string::npos;
  return true;
}

// Pulls the expression parts out of one f-string replacement field. `i` sits
// just past the opening brace and is left just past the closing one.
void ExtractField(std::string_view body, std::size_t& i, std::vector<std::string>& out) {
  const std::size_t n = body.size();
  const std::size_t start = i;
  int depth = 0;
  char quote = 0;
  while (i < n) {
    char c = body[i];
    if (quote != 0) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      ++i;
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if ((c == ')' || c == ']' || c == '}') && depth > 0) {
      --depth;
    } else if (depth == 0 &&
               (c == '}' || c == ':' || (c == '!' && !(i + 1 < n && body[i + 1] == '=')))) {
      break;
    }
    ++i;
  }
  std::string expr(body.substr(start, i - start));
  while (!expr.empty() && std::isspace(static_cast<unsigned char>(expr.back()))) expr.pop_back();
  // Self-documenting form: f"{x=}".
  if (expr.size() >= 2 && expr.back() == '=' &&
      std::string_view("=!<>").find(expr[expr.size() - 2]) == std::string_view::npos) {
    expr.pop_back();
  }
  out.push_back(std::move(expr));
  if (i < n && body[i] == '!') {
    while (i < n && body[i] != ':' && body[i] != '}') ++i;
  }
  if (i < n && body[i] == ':') {
    ++i;
    while (i < n && body[i] != '}') {
      if (body[i] == '{') {
        ++i;
        ExtractField(body, i, out);
      } else {
        ++i;
      }
    }
  }
  if (i < n && body[i] == '}') ++i;
}

std::vector<std::string> FStringExpressions(std::string_view body) {
  std::vector<std::string> exprs;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        i += 2;
        continue;
      }
      ++i;
      ExtractField(body, i, exprs);
    } else {
      ++i;
    }
  }
  return exprs;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<LogicalLine> Run() {
    const std::size_t n = src_.size();
    bool at_line_start = true;
    while (pos_ < n) {
      if (at_line_start && current_.tokens.empty() && depth_ == 0) {
        if (!MeasureIndent()) continue;
        at_line_start = false;
      }
      char c = src_[pos_];
      if (c == '\n') {
        ++pos_;
        ++line_;
        if (depth_ == 0) {
          Finish();
          at_line_start = true;
        }
        continue;
      }
      if (c == '\\' && pos_ + 1 < n && src_[pos_ + 1] == '\n') {
        pos_ += 2;
        ++line_;
        continue;
      }
      if (c == '\\' && pos_ + 2 < n && src_[pos_ + 1] == '\r' && src_[pos_ + 2] == '\n') {
        pos_ += 3;
        ++line_;
        continue;
      }
      if (c == '#') {
        while (pos_ < n && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
        ++pos_;
        continue;
      }
      if (c == '\'' || c == '"') {
        LexString(/*is_fstring=*/false);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < n && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        LexNumber();
        continue;
      }
      if (IsIdentStart(c)) {
        LexName();
        continue;
      }
      LexOp();
    }
    if (depth_ != 0) current_.malformed = true;
    Finish();
    return std::move(lines_);
  }

  std::vector<std::string> TakeStrings() { return std::move(strings_); }

 private:
  // Returns false when the physical line is blank or comment-only (and has
  // been consumed).
  bool MeasureIndent() {
    const std::size_t n = src_.size();
    int col = 0;
    std::size_t p = pos_;
    while (p < n) {
      char c = src_[p];
      if (c == ' ') ++col;
      else if (c == '\t') col = (col / 8 + 1) * 8;
      else if (c == '\f') col = 0;
      else break;
      ++p;
    }
    if (p < n && src_[p] == '\r' && p + 1 < n && src_[p + 1] == '\n') ++p;
    if (p >= n || src_[p] == '\n' || src_[p] == '#') {
      while (p < n && src_[p] != '\n') ++p;
      if (p < n) {
        ++p;
        ++line_;
      }
      pos_ = p;
      return false;
    }
    pos_ = p;
    current_.indent = col;
    current_.first_line = line_;
    return true;
  }

  void Finish() {
    if (!current_.tokens.empty()) lines_.push_back(std::move(current_));
    current_ = LogicalLine{};
  }

  void Push(TokenKind kind, std::string text) {
    if (current_.tokens.empty()) current_.first_line = line_;
    current_.tokens.push_back(Token{kind, std::move(text)});
  }

  void LexString(bool is_fstring) {
    const std::size_t n = src_.size();
    char q = src_[pos_];
    bool triple = pos_ + 2 < n && src_[pos_ + 1] == q && src_[pos_ + 2] == q;
    std::size_t qlen = triple ? 3 : 1;
    std::size_t start = pos_ + qlen;
    std::size_t p = start;
    bool terminated = false;
    std::size_t body_end = n;
    while (p < n) {
      char c = src_[p];
      if (c == '\\') {
        p = std::min(n, p + 2);
        continue;
      }
      if (!triple && c == '\n') break;
      if (c == q && (!triple || (p + 2 < n && src_[p + 1] == q && src_[p + 2] == q))) {
        body_end = p;
        terminated = true;
        p += qlen;
        break;
      }
      ++p;
    }
    if (!terminated) {
      body_end = p;
      current_.malformed = true;
    }
    std::string_view body = src_.substr(start, body_end - start);
    line_ += static_cast<int>(std::count(src_.begin() + static_cast<long>(pos_),
                                         src_.begin() + static_cast<long>(p), '\n'));
    pos_ = p;
    if (!is_fstring) {
      strings_.emplace_back(body);
      Push(TokenKind::kString, std::string(body));
      return;
    }
    Push(TokenKind::kOp, "(");
    bool first = true;
    for (const std::string& expr : FStringExpressions(body)) {
      if (!first) Push(TokenKind::kOp, ",");
      first = false;
      Lexer sub(expr);
      for (LogicalLine& line : sub.Run()) {
        if (line.malformed) current_.malformed = true;
        for (Token& tok : line.tokens) current_.tokens.push_back(std::move(tok));
      }
    }
    Push(TokenKind::kOp, ")");
  }

  void LexNumber() {
    const std::size_t n = src_.size();
    std::size_t start = pos_;
    while (pos_ < n) {
      char c = src_[pos_];
      if (IsIdentChar(c) || c == '.') {
        ++pos_;
      } else if ((c == '+' || c == '-') && pos_ > start &&
                 (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E') &&
                 !(src_[start] == '0' && pos_ - start > 1 &&
                   (src_[start + 1] == 'x' || src_[start + 1] == 'X'))) {
        ++pos_;
      } else {
        break;
      }
    }
    Push(TokenKind::kNumber, std::string(src_.substr(start, pos_ - start)));
  }

  void LexName() {
    const std::size_t n = src_.size();
    std::size_t start = pos_;
    while (pos_ < n && IsIdentChar(src_[pos_])) ++pos_;
    std::string_view name = src_.substr(start, pos_ - start);
    bool is_fstring = false;
    if (pos_ < n && (src_[pos_] == '\'' || src_[pos_] == '"') && IsStringPrefix(name, &is_fstring)) {
      LexString(is_fstring);
      return;
    }
    Push(TokenKind::kName, std::string(name));
  }

  void LexOp() {
    std::string_view rest = src_.substr(pos_);
    for (std::string_view op : kThreeCharOps) {
      if (rest.substr(0, 3) == op) {
        Push(TokenKind::kOp, std::string(op));
        pos_ += 3;
        return;
      }
    }
    for (std::string_view op : kTwoCharOps) {
      if (rest.substr(0, 2) == op) {
        Push(TokenKind::kOp, std::string(op));
        pos_ += 2;
        return;
      }
    }
    char c = src_[pos_++];
    if (c == '(' || c == '[' || c == '{') {
      ++depth_;
    } else if (c == ')' || c == ']' || c == '}') {
      if (depth_ == 0) current_.malformed = true;
      else --depth_;
    }
    Push(TokenKind::kOp, std::string(1, c));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  int line_ = 1;
  LogicalLine current_;
  std::vector<LogicalLine> lines_;
  std::vector<std::string> strings_;
};

}  // namespace

std::vector<LogicalLine> SplitLogicalLines(std::string_view source) {
  return Lexer(source).Run();
}

std::vector<std::string> StringLiterals(std::string_view source) {
  Lexer lexer(source);
  lexer.Run();
  return lexer.TakeStrings();
}

bool IsKeyword(std::string_view name) {
  return std::find(kKeywords.begin(), kKeywords.end(), name) != kKeywords.end();
}

}  // namespace j2k::pylex
