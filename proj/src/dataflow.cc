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

#include "j2k/dataflow.h"

#include <map>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <utility>

#include "j2k/error.h"
#include "j2k/pylex.h"
#include "json.hpp"

namespace j2k {
namespace {

using pylex::Token;
using pylex::TokenKind;
using TokenSpan = std::span<const Token>;

// ---------------------------------------------------------------------------
// Statement structure

struct Stmt {
  int indent = 0;  // doubled source indentation; +1 for an inline suite
  std::vector<Token> tokens;
  bool malformed = false;
  bool compound = false;
};

struct Block {
  Stmt header;
  std::vector<Block> body;
};

bool IsOpener(const Token& t) {
  return t.kind == TokenKind::kOp && (t.text == "(" || t.text == "[" || t.text == "{");
}
bool IsCloser(const Token& t) {
  return t.kind == TokenKind::kOp && (t.text == ")" || t.text == "]" || t.text == "}");
}

// Index of the bracket closing the opener at `i`, or tokens.size().
std::size_t MatchBracket(TokenSpan tokens, std::size_t i) {
  int depth = 0;
  for (std::size_t j = i; j < tokens.size(); ++j) {
    if (IsOpener(tokens[j])) ++depth;
    else if (IsCloser(tokens[j]) && --depth == 0) return j;
  }
  return tokens.size();
}

// Positions of depth-0 tokens satisfying `pred`.
template <typename Pred>
std::vector<std::size_t> TopLevel(TokenSpan tokens, Pred pred) {
  std::vector<std::size_t> found;
  int depth = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (IsOpener(tokens[i])) {
      ++depth;
    } else if (IsCloser(tokens[i])) {
      if (depth > 0) --depth;
    } else if (depth == 0 && pred(tokens[i])) {
      found.push_back(i);
    }
  }
  return found;
}

std::vector<TokenSpan> SplitTopLevel(TokenSpan tokens, std::string_view sep) {
  std::vector<TokenSpan> parts;
  std::size_t start = 0;
  for (std::size_t pos : TopLevel(tokens, [&](const Token& t) { return t.Is(sep); })) {
    parts.push_back(tokens.subspan(start, pos - start));
    start = pos + 1;
  }
  parts.push_back(tokens.subspan(start));
  return parts;
}

// The depth-0 colon ending a compound statement header. Colons that belong
// to depth-0 lambdas are skipped.
std::optional<std::size_t> HeaderColon(TokenSpan tokens) {
  int pending_lambdas = 0;
  int depth = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (IsOpener(tokens[i])) {
      ++depth;
    } else if (IsCloser(tokens[i])) {
      if (depth > 0) --depth;
    } else if (depth == 0 && tokens[i].IsName("lambda")) {
      ++pending_lambdas;
    } else if (depth == 0 && tokens[i].Is(":")) {
      if (pending_lambdas > 0) {
        --pending_lambdas;
        continue;
      }
      return i;
    }
  }
  return std::nullopt;
}

bool StartsCompound(TokenSpan t) {
  if (t.empty() || t[0].kind != TokenKind::kName) return false;
  static const std::set<std::string> kHeads = {"if",     "elif", "else",    "while", "for", "try",
                                               "except", "with", "finally", "def",   "class"};
  const std::string& head = t[0].text;
  if (kHeads.contains(head)) return true;
  if (head == "async") {
    return t.size() > 1 && (t[1].IsName("def") || t[1].IsName("for") || t[1].IsName("with"));
  }
  if (head == "match" || head == "case") {
    if (t.size() < 3) return false;
    const Token& second = t[1];
    if (second.kind == TokenKind::kOp && second.text != "(" && second.text != "[" &&
        second.text != "{" && second.text != "-" && second.text != "*") {
      return false;
    }
    return HeaderColon(t).has_value();
  }
  return false;
}

void AppendSimple(TokenSpan tokens, int indent, bool malformed, std::vector<Stmt>& out) {
  for (TokenSpan part : SplitTopLevel(tokens, ";")) {
    if (part.empty()) continue;
    out.push_back(Stmt{indent, {part.begin(), part.end()}, malformed, false});
  }
}

void AppendStatements(TokenSpan tokens, int indent, bool malformed, std::vector<Stmt>& out) {
  if (!StartsCompound(tokens)) {
    AppendSimple(tokens, indent, malformed, out);
    return;
  }
  auto colon = HeaderColon(tokens);
  if (!colon) {
    out.push_back(Stmt{indent, {tokens.begin(), tokens.end()}, true, false});
    return;
  }
  out.push_back(Stmt{indent, {tokens.begin(), tokens.begin() + *colon + 1}, malformed, true});
  TokenSpan rest = tokens.subspan(*colon + 1);
  if (!rest.empty()) AppendStatements(rest, indent + 1, malformed, out);
}

std::vector<Block> BuildBlocks(const std::vector<Stmt>& stmts, std::size_t& i, int parent_indent) {
  std::vector<Block> blocks;
  while (i < stmts.size() && stmts[i].indent > parent_indent) {
    Block block{stmts[i], {}};
    ++i;
    if (block.header.compound) block.body = BuildBlocks(stmts, i, block.header.indent);
    blocks.push_back(std::move(block));
  }
  return blocks;
}

// ---------------------------------------------------------------------------
// Name events

enum class EventKind {
  kRead,        // read in the current scope
  kDeferredRead,  // read from a nested function body; skips class scopes
  kBind,
  kGlobalBind,  // bind of a name declared global inside a function
  kGlobalDecl,
  kImport,
};

struct Event {
  EventKind kind;
  std::string name;
};

using Events = std::vector<Event>;

class Analyzer {
 public:
  int lossy_lines() const { return lossy_; }

  void AnalyzeBlocks(const std::vector<Block>& blocks, Events& out) {
    for (const Block& block : blocks) AnalyzeBlock(block, out);
  }

 private:
  void Lossy(TokenSpan t, Events& out) {
    ++lossy_;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].kind != TokenKind::kName || pylex::IsKeyword(t[i].text)) continue;
      if (i > 0 && t[i - 1].Is(".")) continue;
      out.push_back({EventKind::kRead, t[i].text});
    }
  }

  static bool CallsExecOrEval(TokenSpan t) {
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      if ((t[i].IsName("exec") || t[i].IsName("eval")) && t[i + 1].Is("(") &&
          (i == 0 || !t[i - 1].Is("."))) {
        return true;
      }
    }
    return false;
  }

  // Reads (and walrus binds) in an expression. `excluded` holds names bound
  // by enclosing comprehensions or lambdas.
  void ScanExpr(TokenSpan t, Events& out, const std::set<std::string>& excluded = {},
                bool in_parens = false, bool bracketed = false) {
    std::set<std::string> scope = excluded;
    if (bracketed) {
      for (std::size_t i : TopLevel(t, [](const Token& tok) { return tok.IsName("for"); })) {
        for (std::size_t j = i + 1; j < t.size() && !t[j].IsName("in"); ++j) {
          if (t[j].kind == TokenKind::kName && !pylex::IsKeyword(t[j].text)) scope.insert(t[j].text);
        }
      }
    }
    std::set<std::string> lambda_params;
    std::size_t i = 0;
    while (i < t.size()) {
      const Token& tok = t[i];
      if (IsOpener(tok)) {
        std::size_t close = MatchBracket(t, i);
        std::set<std::string> nested = scope;
        nested.insert(lambda_params.begin(), lambda_params.end());
        std::size_t inner_end = std::min(close, t.size());
        ScanExpr(t.subspan(i + 1, inner_end - (i + 1)), out, nested, tok.text == "(", true);
        i = close + 1;
        continue;
      }
      if (tok.Is(",")) lambda_params.clear();
      if (tok.kind != TokenKind::kName) {
        ++i;
        continue;
      }
      if (tok.text == "lambda") {
        i = ScanLambdaParams(t, i + 1, out, scope, lambda_params);
        continue;
      }
      bool skip = pylex::IsKeyword(tok.text) || (i > 0 && t[i - 1].Is(".")) ||
                  (in_parens && i + 1 < t.size() && t[i + 1].Is("="));
      if (!skip && i + 1 < t.size() && t[i + 1].Is(":=")) {
        out.push_back({EventKind::kBind, tok.text});
        skip = true;
      }
      if (!skip && !scope.contains(tok.text) && !lambda_params.contains(tok.text)) {
        out.push_back({EventKind::kRead, tok.text});
      }
      ++i;
    }
  }

  // Parses `lambda` parameters starting at `i`; returns the index past the
  // lambda's colon. Defaults are scanned as reads.
  std::size_t ScanLambdaParams(TokenSpan t, std::size_t i, Events& out,
                               const std::set<std::string>& scope,
                               std::set<std::string>& params) {
    std::size_t colon = t.size();
    int depth = 0;
    for (std::size_t j = i; j < t.size(); ++j) {
      if (IsOpener(t[j])) ++depth;
      else if (IsCloser(t[j])) --depth;
      else if (depth == 0 && t[j].Is(":")) {
        colon = j;
        break;
      }
    }
    TokenSpan header = t.subspan(i, colon - i);
    if (!header.empty()) {
      for (TokenSpan param : SplitTopLevel(header, ",")) {
        auto eq = TopLevel(param, [](const Token& tok) { return tok.Is("="); });
        std::size_t name_end = eq.empty() ? param.size() : eq.front();
        for (std::size_t k = 0; k < name_end; ++k) {
          if (param[k].kind == TokenKind::kName) {
            params.insert(param[k].text);
            break;
          }
        }
        if (!eq.empty()) ScanExpr(param.subspan(eq.front() + 1), out, scope);
      }
    }
    return colon + 1;
  }

  void AnalyzeTarget(TokenSpan t, Events& out) {
    if (t.empty()) return;
    auto parts = SplitTopLevel(t, ",");
    if (parts.size() > 1) {
      for (TokenSpan part : parts) AnalyzeTarget(part, out);
      return;
    }
    TokenSpan p = t;
    while (!p.empty() && (p[0].Is("*") || p[0].Is("**"))) p = p.subspan(1);
    if (p.empty()) return;
    if ((p[0].Is("(") || p[0].Is("[")) && MatchBracket(p, 0) == p.size() - 1) {
      AnalyzeTarget(p.subspan(1, p.size() - 2), out);
      return;
    }
    if (p.size() == 1 && p[0].kind == TokenKind::kName && !pylex::IsKeyword(p[0].text)) {
      out.push_back({EventKind::kBind, p[0].text});
      return;
    }
    ScanExpr(p, out);
  }

  void AnalyzeImport(TokenSpan t, Events& out) {
    // import a.b.c [as d], ...
    for (TokenSpan item : SplitTopLevel(t.subspan(1), ",")) {
      std::string module;
      std::size_t k = 0;
      while (k < item.size() && item[k].kind == TokenKind::kName && !item[k].IsName("as")) {
        module += item[k].text;
        ++k;
        if (k < item.size() && item[k].Is(".")) {
          module += ".";
          ++k;
        } else {
          break;
        }
      }
      if (module.empty() || module.back() == '.') return Lossy(t, out);
      std::string bound = module.substr(0, module.find('.'));
      if (k < item.size()) {
        if (!item[k].IsName("as") || k + 2 != item.size() || item[k + 1].kind != TokenKind::kName) {
          return Lossy(t, out);
        }
        bound = item[k + 1].text;
      }
      out.push_back({EventKind::kImport, module});
      out.push_back({EventKind::kBind, bound});
    }
  }

  void AnalyzeFromImport(TokenSpan t, Events& out) {
    std::size_t k = 1;
    std::string module;
    bool relative = false;
    while (k < t.size() && !t[k].IsName("import")) {
      if (t[k].Is(".") || t[k].Is("...")) {
        if (module.empty()) relative = true;
        else module += ".";
      } else if (t[k].kind == TokenKind::kName) {
        module += t[k].text;
      } else {
        return Lossy(t, out);
      }
      ++k;
    }
    if (k >= t.size() || (module.empty() && !relative)) return Lossy(t, out);
    TokenSpan names = t.subspan(k + 1);
    if (!names.empty() && names[0].Is("(") && MatchBracket(names, 0) == names.size() - 1) {
      names = names.subspan(1, names.size() - 2);
    }
    if (names.empty() || (names.size() == 1 && names[0].Is("*"))) return Lossy(t, out);
    std::vector<std::string> bound;
    for (TokenSpan item : SplitTopLevel(names, ",")) {
      if (item.empty()) continue;  // trailing comma
      if (item.size() == 1 && item[0].kind == TokenKind::kName) {
        bound.push_back(item[0].text);
      } else if (item.size() == 3 && item[0].kind == TokenKind::kName && item[1].IsName("as") &&
                 item[2].kind == TokenKind::kName) {
        bound.push_back(item[2].text);
      } else {
        return Lossy(t, out);
      }
    }
    if (!relative && module != "__future__") out.push_back({EventKind::kImport, module});
    for (auto& name : bound) out.push_back({EventKind::kBind, std::move(name)});
  }

  void AnalyzeSimple(const Stmt& stmt, Events& out) {
    TokenSpan t = stmt.tokens;
    if (stmt.malformed || CallsExecOrEval(t)) return Lossy(t, out);
    const Token& head = t[0];
    if (head.IsName("import")) return AnalyzeImport(t, out);
    if (head.IsName("from")) return AnalyzeFromImport(t, out);
    if (head.IsName("global") || head.IsName("nonlocal")) {
      for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i].kind == TokenKind::kName) out.push_back({EventKind::kGlobalDecl, t[i].text});
      }
      return;
    }
    if (head.Is("@")) return ScanExpr(t.subspan(1), out);

    auto is_aug = [](const Token& tok) {
      static const std::set<std::string> kAug = {"+=", "-=", "*=",  "/=",  "//=", "%=", "**=",
                                                 ">>=", "<<=", "&=", "|=", "^=",  "@="};
      return tok.kind == TokenKind::kOp && kAug.contains(tok.text);
    };
    // Everything after a depth-0 lambda belongs to the value expression.
    auto lambdas = TopLevel(t, [](const Token& tok) { return tok.IsName("lambda"); });
    std::size_t limit = lambdas.empty() ? t.size() : lambdas.front();
    TokenSpan head_part = t.first(limit);
    auto eqs = TopLevel(head_part, [](const Token& tok) { return tok.Is("="); });
    auto augs = TopLevel(head_part, is_aug);
    auto colons = TopLevel(head_part, [](const Token& tok) { return tok.Is(":"); });

    if (!augs.empty() && (eqs.empty() || augs.front() < eqs.front())) {
      std::size_t op = augs.front();
      TokenSpan target = t.first(op);
      bool simple = target.size() == 1 && target[0].kind == TokenKind::kName;
      if (simple) out.push_back({EventKind::kRead, target[0].text});
      else ScanExpr(target, out);
      ScanExpr(t.subspan(op + 1), out);
      if (simple) out.push_back({EventKind::kBind, target[0].text});
      return;
    }
    if (!eqs.empty()) {
      if (!colons.empty() && colons.front() < eqs.front()) {
        ScanExpr(t.subspan(eqs.front() + 1), out);
        ScanExpr(t.subspan(colons.front() + 1, eqs.front() - colons.front() - 1), out);
        AnalyzeTarget(t.first(colons.front()), out);
        return;
      }
      ScanExpr(t.subspan(eqs.back() + 1), out);
      std::size_t start = 0;
      for (std::size_t eq : eqs) {
        AnalyzeTarget(t.subspan(start, eq - start), out);
        start = eq + 1;
      }
      return;
    }
    if (!colons.empty()) {
      // Bare annotation: `x: int` declares but does not bind.
      ScanExpr(t.subspan(colons.front() + 1), out);
      TokenSpan target = t.first(colons.front());
      if (!(target.size() == 1 && target[0].kind == TokenKind::kName)) ScanExpr(target, out);
      return;
    }
    ScanExpr(t, out);
  }

  // Resolves the events of a function or class body against its local names
  // and returns what escapes to the enclosing scope.
  Events CloseScope(const Events& body, const std::set<std::string>& params, bool is_class) {
    std::set<std::string> globals;
    for (const Event& e : body) {
      if (e.kind == EventKind::kGlobalDecl) globals.insert(e.name);
    }
    std::set<std::string> locals = params;
    for (const Event& e : body) {
      if (e.kind == EventKind::kBind && !globals.contains(e.name)) locals.insert(e.name);
    }
    Events escaped;
    for (const Event& e : body) {
      switch (e.kind) {
        case EventKind::kRead:
          if (!locals.contains(e.name)) {
            escaped.push_back({is_class ? EventKind::kRead : EventKind::kDeferredRead, e.name});
          }
          break;
        case EventKind::kDeferredRead:
          if (is_class || !locals.contains(e.name)) escaped.push_back(e);
          break;
        case EventKind::kBind:
          if (globals.contains(e.name)) escaped.push_back({EventKind::kGlobalBind, e.name});
          break;
        case EventKind::kGlobalBind:
        case EventKind::kImport:
          escaped.push_back(e);
          break;
        case EventKind::kGlobalDecl:
          break;
      }
    }
    return escaped;
  }

  void AnalyzeDef(const Block& block, TokenSpan t, Events& out) {
    std::size_t k = t[0].IsName("async") ? 2 : 1;
    if (k + 1 >= t.size() || t[k].kind != TokenKind::kName || !t[k + 1].Is("(")) {
      Lossy(t, out);
      AnalyzeBlocks(block.body, out);
      return;
    }
    const std::string name = t[k].text;
    std::size_t close = MatchBracket(t, k + 1);
    std::set<std::string> params;
    if (close < t.size()) {
      TokenSpan inner = t.subspan(k + 2, close - (k + 2));
      for (TokenSpan param : SplitTopLevel(inner, ",")) {
        std::size_t p = 0;
        while (p < param.size() && (param[p].Is("*") || param[p].Is("**") || param[p].Is("/"))) ++p;
        if (p >= param.size() || param[p].kind != TokenKind::kName) continue;
        params.insert(param[p].text);
        TokenSpan rest = param.subspan(p + 1);
        // Annotations and defaults are evaluated at definition time.
        if (!rest.empty() && (rest[0].Is(":") || rest[0].Is("="))) ScanExpr(rest.subspan(1), out);
      }
      // Return annotation: ") -> expr :"
      if (close + 1 < t.size() && t[close + 1].Is("->")) {
        ScanExpr(t.subspan(close + 2, t.size() - 1 - (close + 2)), out);
      }
    }
    out.push_back({EventKind::kBind, name});
    Events body;
    AnalyzeBlocks(block.body, body);
    for (Event& e : CloseScope(body, params, /*is_class=*/false)) out.push_back(std::move(e));
  }

  void AnalyzeClass(const Block& block, TokenSpan t, Events& out) {
    if (t.size() < 2 || t[1].kind != TokenKind::kName) {
      Lossy(t, out);
      AnalyzeBlocks(block.body, out);
      return;
    }
    if (t.size() > 2 && t[2].Is("(")) {
      std::size_t close = MatchBracket(t, 2);
      ScanExpr(t.subspan(3, std::min(close, t.size()) - 3), out, {}, /*in_parens=*/true);
    }
    Events body;
    AnalyzeBlocks(block.body, body);
    Events escaped = CloseScope(body, {}, /*is_class=*/true);
    for (const Event& e : escaped) {
      if (e.kind != EventKind::kDeferredRead) out.push_back(e);
    }
    out.push_back({EventKind::kBind, t[1].text});
    for (const Event& e : escaped) {
      if (e.kind == EventKind::kDeferredRead) out.push_back(e);
    }
  }

  void AnalyzeBlock(const Block& block, Events& out) {
    const Stmt& stmt = block.header;
    if (!stmt.compound) return AnalyzeSimple(stmt, out);
    TokenSpan t = TokenSpan(stmt.tokens).first(stmt.tokens.size() - 1);  // drop ':'
    if (stmt.malformed) {
      Lossy(t, out);
      return AnalyzeBlocks(block.body, out);
    }
    std::size_t k = t[0].IsName("async") ? 1 : 0;
    const std::string& head = t[k].text;
    if (head == "def") return AnalyzeDef(block, t, out);
    if (head == "class") return AnalyzeClass(block, t, out);
    if (head == "case" || CallsExecOrEval(t)) {
      Lossy(t, out);
    } else if (head == "if" || head == "elif" || head == "while" || head == "match") {
      ScanExpr(t.subspan(1), out);
    } else if (head == "for") {
      auto ins = TopLevel(t, [](const Token& tok) { return tok.IsName("in"); });
      if (ins.empty()) {
        Lossy(t, out);
      } else {
        ScanExpr(t.subspan(ins.front() + 1), out);
        AnalyzeTarget(t.subspan(k + 1, ins.front() - (k + 1)), out);
      }
    } else if (head == "with") {
      TokenSpan items = t.subspan(k + 1);
      if (!items.empty() && items[0].Is("(") && MatchBracket(items, 0) == items.size() - 1) {
        TokenSpan inner = items.subspan(1, items.size() - 2);
        if (!TopLevel(inner, [](const Token& tok) { return tok.IsName("as"); }).empty()) {
          items = inner;
        }
      }
      for (TokenSpan item : SplitTopLevel(items, ",")) {
        auto as = TopLevel(item, [](const Token& tok) { return tok.IsName("as"); });
        if (as.empty()) {
          ScanExpr(item, out);
        } else {
          ScanExpr(item.first(as.front()), out);
          AnalyzeTarget(item.subspan(as.front() + 1), out);
        }
      }
    } else if (head == "except") {
      TokenSpan rest = t.subspan(1);
      auto as = TopLevel(rest, [](const Token& tok) { return tok.IsName("as"); });
      if (as.empty()) {
        ScanExpr(rest, out);
      } else {
        ScanExpr(rest.first(as.front()), out);
        AnalyzeTarget(rest.subspan(as.front() + 1), out);
      }
    }
    // else / try / finally carry no names.
    AnalyzeBlocks(block.body, out);
  }

  int lossy_ = 0;
};

}  // namespace

const std::set<std::string>& DefaultBuiltins() {
  static const std::set<std::string> kBuiltins = {
      "print", "len",   "range",  "enumerate", "zip", "list",   "dict", "set",
      "tuple", "str",   "int",    "float",     "bool", "open",  "sum",  "min",
      "max",   "abs",   "sorted", "map",       "filter", "type", "isinstance", "Exception"};
  return kBuiltins;
}

DefUseSet ExtractDefUse(std::string_view source, const std::set<std::string>& builtins) {
  std::vector<Stmt> stmts;
  for (const pylex::LogicalLine& line : pylex::SplitLogicalLines(source)) {
    AppendStatements(line.tokens, line.indent * 2, line.malformed, stmts);
  }
  std::size_t i = 0;
  std::vector<Block> blocks = BuildBlocks(stmts, i, -1);

  Analyzer analyzer;
  Events events;
  analyzer.AnalyzeBlocks(blocks, events);

  DefUseSet result;
  result.lossy_lines = analyzer.lossy_lines();
  for (const Event& e : events) {
    switch (e.kind) {
      case EventKind::kRead:
      case EventKind::kDeferredRead:
        if (builtins.contains(e.name)) break;
        result.uses.Insert(e.name);
        if (!result.defs.Contains(e.name)) result.exposed_uses.Insert(e.name);
        break;
      case EventKind::kBind:
      case EventKind::kGlobalBind:
        result.defs.Insert(e.name);
        break;
      case EventKind::kImport:
        result.imports.Insert(e.name);
        break;
      case EventKind::kGlobalDecl:
        break;
    }
  }
  return result;
}

const Step* StepGraph::Find(std::string_view id) const {
  for (const Step& step : steps) {
    if (step.id == id) return &step;
  }
  return nullptr;
}

StepGraph BuildStepGraph(const Notebook& notebook, const std::set<std::string>& builtins) {
  StepGraph graph;
  std::set<std::string> taken;
  for (const Cell& cell : notebook.cells) {
    if (cell.marker) taken.insert(*cell.marker);
  }

  // Grouping.
  std::vector<std::vector<const Cell*>> groups;
  bool open_marked = false;
  for (const Cell& cell : notebook.cells) {
    if (cell.marker) {
      groups.push_back({&cell});
      graph.steps.emplace_back().id = *cell.marker;
      open_marked = true;
    } else if (open_marked) {
      groups.back().push_back(&cell);
    } else {
      std::string id = "step-" + std::to_string(graph.steps.size() + 1);
      for (int n = 2; taken.contains(id); ++n) {
        id = "step-" + std::to_string(graph.steps.size() + 1) + "-" + std::to_string(n);
      }
      taken.insert(id);
      groups.push_back({&cell});
      graph.steps.emplace_back().id = id;
    }
  }

  // Per-step def/use aggregation; remember the cell of each first exposed use.
  std::vector<std::map<std::string, std::size_t>> exposed_cell(graph.steps.size());
  for (std::size_t s = 0; s < graph.steps.size(); ++s) {
    Step& step = graph.steps[s];
    for (const Cell* cell : groups[s]) {
      step.cell_indices.push_back(cell->index);
      DefUseSet du = ExtractDefUse(cell->source, builtins);
      graph.lossy_lines += du.lossy_lines;
      for (const auto& v : du.exposed_uses) {
        if (!step.defs.Contains(v) && step.exposed_uses.Insert(v)) exposed_cell[s][v] = cell->index;
      }
      for (const auto& v : du.defs) step.defs.Insert(v);
      for (const auto& v : du.uses) step.uses.Insert(v);
      for (const auto& v : du.imports) step.imports.Insert(v);
      step.script += cell->source;
      if (!cell->source.empty() && cell->source.back() != '\n') step.script += '\n';
    }
  }

  // Last-writer-wins edges in notebook order.
  std::map<std::string, std::size_t> last_writer;
  std::vector<std::set<std::string>> exported(graph.steps.size());
  for (std::size_t s = 0; s < graph.steps.size(); ++s) {
    Step& step = graph.steps[s];
    for (const auto& v : step.exposed_uses) {
      auto it = last_writer.find(v);
      if (it == last_writer.end()) {
        graph.unresolved.push_back(UnresolvedUse{step.id, exposed_cell[s][v], v});
        continue;
      }
      graph.edges.push_back(Edge{graph.steps[it->second].id, step.id, v});
      exported[it->second].insert(v);
    }
    for (const auto& v : step.defs) last_writer[v] = s;
  }
  for (std::size_t s = 0; s < graph.steps.size(); ++s) {
    for (const auto& v : graph.steps[s].defs) {
      if (exported[s].contains(v)) graph.steps[s].exports.Insert(v);
    }
  }
  return graph;
}

std::vector<std::string> TopologicalOrder(const StepGraph& graph) {
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < graph.steps.size(); ++i) position[graph.steps[i].id] = i;
  std::vector<int> indegree(graph.steps.size(), 0);
  std::vector<std::vector<std::size_t>> successors(graph.steps.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Edge& e : graph.edges) {
    auto from = position.find(e.from);
    auto to = position.find(e.to);
    if (from == position.end() || to == position.end()) {
      throw Error(ErrorCode::kMalformedDocument, "edge references unknown step " + e.from + " -> " + e.to);
    }
    if (!seen.insert({from->second, to->second}).second) continue;
    successors[from->second].push_back(to->second);
    ++indegree[to->second];
  }
  using Entry = std::pair<std::size_t, std::size_t>;  // (min cell, step position)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  for (std::size_t i = 0; i < graph.steps.size(); ++i) {
    if (indegree[i] == 0) ready.push({graph.steps[i].min_cell(), i});
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto [cell, i] = ready.top();
    ready.pop();
    order.push_back(graph.steps[i].id);
    for (std::size_t next : successors[i]) {
      if (--indegree[next] == 0) ready.push({graph.steps[next].min_cell(), next});
    }
  }
  if (order.size() != graph.steps.size()) {
    throw Error(ErrorCode::kCycleDetected, "step graph contains a cycle");
  }
  return order;
}

std::string GraphToJson(const StepGraph& graph) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["steps"] = ordered_json::array();
  for (const Step& step : graph.steps) {
    ordered_json s;
    s["id"] = step.id;
    s["cells"] = step.cell_indices;
    s["defs"] = step.defs.items();
    s["uses"] = step.uses.items();
    s["exports"] = step.exports.items();
    s["imports"] = step.imports.items();
    doc["steps"].push_back(std::move(s));
  }
  doc["edges"] = ordered_json::array();
  for (const Edge& e : graph.edges) {
    doc["edges"].push_back(ordered_json{{"from", e.from}, {"to", e.to}, {"var", e.var}});
  }
  doc["unresolved"] = ordered_json::array();
  for (const UnresolvedUse& u : graph.unresolved) {
    doc["unresolved"].push_back(ordered_json{{"var", u.var}, {"step", u.step}, {"cell", u.cell}});
  }
  return doc.dump(2) + "\n";
}

std::string GraphToDot(const StepGraph& graph) {
  std::ostringstream out;
  out << "digraph steps {\n  rankdir=LR;\n";
  for (const Step& step : graph.steps) {
    out << "  \"" << step.id << "\" [label=\"" << step.id << "\\ncells";
    for (std::size_t c : step.cell_indices) out << ' ' << c;
    out << "\"];\n";
  }
  for (const Edge& e : graph.edges) {
    out << "  \"" << e.from << "\" -> \"" << e.to << "\" [label=\"" << e.var << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

StepGraph GraphFromJson(std::string_view text) {
  using nlohmann::json;
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("steps") || !doc.contains("edges")) {
    throw Error(ErrorCode::kMalformedDocument, "graph document is not a step graph");
  }
  auto names = [](const json& node, const char* key) {
    OrderedSet set;
    if (node.contains(key)) {
      for (const auto& v : node.at(key)) set.Insert(v.get<std::string>());
    }
    return set;
  };
  StepGraph graph;
  try {
    for (const auto& s : doc.at("steps")) {
      Step step;
      step.id = s.at("id").get<std::string>();
      step.cell_indices = s.at("cells").get<std::vector<std::size_t>>();
      step.defs = names(s, "defs");
      step.uses = names(s, "uses");
      step.exports = names(s, "exports");
      step.imports = names(s, "imports");
      if (step.cell_indices.empty()) {
        throw Error(ErrorCode::kMalformedDocument, "step " + step.id + " has no cells");
      }
      graph.steps.push_back(std::move(step));
    }
    for (const auto& e : doc.at("edges")) {
      graph.edges.push_back(Edge{e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                                 e.at("var").get<std::string>()});
    }
    if (doc.contains("unresolved")) {
      for (const auto& u : doc.at("unresolved")) {
        graph.unresolved.push_back(UnresolvedUse{u.at("step").get<std::string>(),
                                                 u.at("cell").get<std::size_t>(),
                                                 u.at("var").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("graph document: ") + e.what());
  }
  return graph;
}

}  // namespace j2k
