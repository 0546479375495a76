#pragma once

// A recursive-descent frontend for a small C subset that emits a code property
// graph: AST edges (syntax tree), CFG edges, reaching-definition DDG edges and
// structural CDG edges.
//
// Grammar: scalar/array/pointer declarations of int, char, float (and a few
// other integral spellings), assignments, arithmetic/relational/logical
// expressions, calls, if/else, while, for, return.

#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ifmavd/cpg.hpp"
#include "ifmavd/errors.hpp"

namespace ifmavd::minic {

enum class TokKind { Ident, Keyword, Number, String, Char, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  int line = 1;
  int column = 1;
};

inline bool is_type_keyword(std::string_view s) {
  static const std::set<std::string_view> kTypes = {"void", "int", "char", "float", "double", "long",
                                                     "short", "unsigned", "signed", "size_t"};
  return kTypes.count(s) > 0;
}

inline bool is_keyword(std::string_view s) {
  return is_type_keyword(s) || s == "if" || s == "else" || s == "while" || s == "for" || s == "return";
}

inline std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1;
  int col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  static const char* kPuncts[] = {"<<=", ">>=", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
                                  "/=",  "%=",  "&=", "|=", "^=", "<<", ">>", "+",  "-",  "*",  "/",  "%",  "=",
                                  "<",   ">",   "!",  "&",  "|",  "^",  "~",  ",",  ";",  "(",  ")",  "{",  "}",
                                  "[",   "]"};
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      const int l0 = line, c0 = col;
      advance(2);
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) advance(1);
      if (i + 1 >= src.size()) throw ParseError("unterminated comment", l0, c0);
      advance(2);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = is_keyword(t.text) ? TokKind::Keyword : TokKind::Ident;
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = TokKind::Number;
      advance(j - i);
    } else if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != c && src[j] != '\n') j += (src[j] == '\\') ? 2 : 1;
      if (j >= src.size() || src[j] != c) throw ParseError("unterminated literal", line, col);
      t.text = std::string(src.substr(i, j + 1 - i));
      t.kind = c == '"' ? TokKind::String : TokKind::Char;
      advance(j + 1 - i);
    } else {
      bool matched = false;
      for (const char* p : kPuncts) {
        const std::string_view pv(p);
        if (src.substr(i, pv.size()) == pv) {
          t.text = std::string(pv);
          t.kind = TokKind::Punct;
          advance(pv.size());
          matched = true;
          break;
        }
      }
      if (!matched) throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = TokKind::End;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Syntax tree
// ---------------------------------------------------------------------------

enum class ExprKind { Ident, Literal, Unary, Postfix, Binary, Assign, Call, Index };

struct Expr {
  ExprKind kind = ExprKind::Literal;
  std::string text;  // identifier, literal, operator, or callee name
  int line = 0;
  std::vector<std::unique_ptr<Expr>> kids;
};
using ExprPtr = std::unique_ptr<Expr>;

struct Declarator {
  std::string name;
  int line = 0;
  bool pointer = false;
  bool array = false;
  ExprPtr array_size;
  ExprPtr init;
};

enum class StmtKind { Decl, ExprStmt, If, While, For, Return, Block, Empty };

struct Stmt {
  StmtKind kind = StmtKind::Empty;
  int line = 0;
  std::size_t tok_begin = 0;  // token range used for the node label
  std::size_t tok_end = 0;
  std::string type;                  // Decl
  std::vector<Declarator> decls;     // Decl
  ExprPtr expr;                      // ExprStmt, Return, condition of If/While/For
  std::size_t cond_begin = 0, cond_end = 0;
  std::unique_ptr<Stmt> init;        // For
  ExprPtr step;                      // For
  std::size_t step_begin = 0, step_end = 0;
  std::vector<std::unique_ptr<Stmt>> body;       // Block / loop body / then branch
  std::vector<std::unique_ptr<Stmt>> else_body;  // If
  bool has_else = false;
};
using StmtPtr = std::unique_ptr<Stmt>;

struct Param {
  std::string type;
  Declarator decl;
  std::size_t tok_begin = 0, tok_end = 0;
};

struct Function {
  std::string return_type;
  std::string name;
  int line = 0;
  std::vector<Param> params;
  std::vector<StmtPtr> body;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const std::vector<Token>& tokens() const { return toks_; }

  Function parse_function() {
    Function fn;
    fn.line = peek().line;
    fn.return_type = parse_type_name();
    while (accept("*")) fn.return_type += "*";
    fn.name = expect_ident().text;
    expect("(");
    if (!check(")")) {
      if (check("void") && toks_[pos_ + 1].text == ")") {
        ++pos_;
      } else {
        do {
          Param p;
          p.tok_begin = pos_;
          p.type = parse_type_name();
          p.decl = parse_declarator(/*allow_init=*/false, /*allow_unsized_array=*/true);
          p.tok_end = pos_;
          fn.params.push_back(std::move(p));
        } while (accept(","));
      }
    }
    expect(")");
    expect("{");
    while (!check("}")) {
      if (peek().kind == TokKind::End) fail("unexpected end of input, expected '}'");
      fn.body.push_back(parse_statement());
    }
    expect("}");
    if (peek().kind != TokKind::End) fail("trailing input after function body");
    return fn;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  bool check(std::string_view text) const {
    const auto& t = peek();
    return (t.kind == TokKind::Punct || t.kind == TokKind::Keyword) && t.text == text;
  }
  bool accept(std::string_view text) {
    if (!check(text)) return false;
    ++pos_;
    return true;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().line, peek().column); }
  const Token& expect(std::string_view text) {
    if (!check(text)) fail("expected '" + std::string(text) + "' but found '" + peek().text + "'");
    return toks_[pos_++];
  }
  const Token& expect_ident() {
    if (peek().kind != TokKind::Ident) fail("expected identifier but found '" + peek().text + "'");
    return toks_[pos_++];
  }

  bool at_type() const { return peek().kind == TokKind::Keyword && is_type_keyword(peek().text); }

  std::string parse_type_name() {
    if (!at_type()) fail("expected a type name but found '" + peek().text + "'");
    std::string t = toks_[pos_++].text;
    while (at_type()) t += " " + toks_[pos_++].text;
    return t;
  }

  Declarator parse_declarator(bool allow_init, bool allow_unsized_array) {
    Declarator d;
    while (accept("*")) d.pointer = true;
    const auto& name = expect_ident();
    d.name = name.text;
    d.line = name.line;
    if (accept("[")) {
      d.array = true;
      if (!check("]")) {
        d.array_size = parse_expr();
      } else if (!allow_unsized_array) {
        fail("array declaration needs a size");
      }
      expect("]");
    }
    if (allow_init && accept("=")) d.init = parse_assign();
    return d;
  }

  StmtPtr parse_statement() {
    auto s = std::make_unique<Stmt>();
    s->line = peek().line;
    s->tok_begin = pos_;
    if (accept("{")) {
      s->kind = StmtKind::Block;
      while (!check("}")) {
        if (peek().kind == TokKind::End) fail("unexpected end of input, expected '}'");
        s->body.push_back(parse_statement());
      }
      expect("}");
    } else if (accept(";")) {
      s->kind = StmtKind::Empty;
    } else if (at_type()) {
      parse_decl_into(*s);
      expect(";");
    } else if (accept("if")) {
      s->kind = StmtKind::If;
      expect("(");
      s->cond_begin = pos_;
      s->expr = parse_expr();
      s->cond_end = pos_;
      expect(")");
      s->body.push_back(parse_statement());
      if (accept("else")) {
        s->has_else = true;
        s->else_body.push_back(parse_statement());
      }
    } else if (accept("while")) {
      s->kind = StmtKind::While;
      expect("(");
      s->cond_begin = pos_;
      s->expr = parse_expr();
      s->cond_end = pos_;
      expect(")");
      s->body.push_back(parse_statement());
    } else if (accept("for")) {
      s->kind = StmtKind::For;
      expect("(");
      if (!check(";")) {
        auto init = std::make_unique<Stmt>();
        init->line = peek().line;
        init->tok_begin = pos_;
        if (at_type()) {
          parse_decl_into(*init);
        } else {
          init->kind = StmtKind::ExprStmt;
          init->expr = parse_expr();
        }
        init->tok_end = pos_;
        s->init = std::move(init);
      }
      expect(";");
      if (check(";")) fail("for loop needs a condition");
      s->cond_begin = pos_;
      s->expr = parse_expr();
      s->cond_end = pos_;
      expect(";");
      if (!check(")")) {
        s->step_begin = pos_;
        s->step = parse_expr();
        s->step_end = pos_;
      }
      expect(")");
      s->body.push_back(parse_statement());
    } else if (accept("return")) {
      s->kind = StmtKind::Return;
      if (!check(";")) s->expr = parse_expr();
      expect(";");
    } else {
      s->kind = StmtKind::ExprStmt;
      s->expr = parse_expr();
      expect(";");
    }
    s->tok_end = pos_;
    return s;
  }

  void parse_decl_into(Stmt& s) {
    s.kind = StmtKind::Decl;
    s.type = parse_type_name();
    do {
      s.decls.push_back(parse_declarator(/*allow_init=*/true, /*allow_unsized_array=*/false));
    } while (accept(","));
  }

  ExprPtr make(ExprKind k, const Token& t) {
    auto e = std::make_unique<Expr>();
    e->kind = k;
    e->text = t.text;
    e->line = t.line;
    return e;
  }

  ExprPtr parse_expr() {
    auto e = parse_assign();
    if (check(",")) fail("comma expressions are not supported");
    return e;
  }

  ExprPtr parse_assign() {
    auto lhs = parse_binary(0);
    static const std::set<std::string_view> kAssign = {"=",  "+=", "-=", "*=", "/=",  "%=",
                                                       "&=", "|=", "^=", "<<=", ">>="};
    if (peek().kind == TokKind::Punct && kAssign.count(peek().text)) {
      if (lhs->kind != ExprKind::Ident && lhs->kind != ExprKind::Index &&
          !(lhs->kind == ExprKind::Unary && lhs->text == "*"))
        fail("left side of assignment is not assignable");
      auto op = make(ExprKind::Assign, toks_[pos_++]);
      op->kids.push_back(std::move(lhs));
      op->kids.push_back(parse_assign());
      return op;
    }
    return lhs;
  }

  static int precedence(std::string_view op) {
    static const std::map<std::string_view, int> kPrec = {
        {"||", 1}, {"&&", 2}, {"|", 3},  {"^", 4},  {"&", 5},  {"==", 6}, {"!=", 6}, {"<", 7},  {">", 7},
        {"<=", 7}, {">=", 7}, {"<<", 8}, {">>", 8}, {"+", 9},  {"-", 9},  {"*", 10}, {"/", 10}, {"%", 10}};
    auto it = kPrec.find(op);
    return it == kPrec.end() ? -1 : it->second;
  }

  ExprPtr parse_binary(int min_prec) {
    auto lhs = parse_unary();
    while (peek().kind == TokKind::Punct) {
      const int p = precedence(peek().text);
      if (p < 0 || p <= min_prec) break;
      auto op = make(ExprKind::Binary, toks_[pos_++]);
      auto rhs = parse_binary(p);
      op->kids.push_back(std::move(lhs));
      op->kids.push_back(std::move(rhs));
      lhs = std::move(op);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    static const std::set<std::string_view> kUnary = {"!", "-", "+", "~", "*", "&", "++", "--"};
    if (peek().kind == TokKind::Punct && kUnary.count(peek().text)) {
      auto op = make(ExprKind::Unary, toks_[pos_++]);
      op->kids.push_back(parse_unary());
      if ((op->text == "++" || op->text == "--") && op->kids[0]->kind != ExprKind::Ident &&
          op->kids[0]->kind != ExprKind::Index)
        fail("operand of " + op->text + " is not assignable");
      return op;
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    auto e = parse_primary();
    while (true) {
      if (check("[")) {
        auto idx = make(ExprKind::Index, toks_[pos_++]);
        idx->kids.push_back(std::move(e));
        idx->kids.push_back(parse_expr());
        expect("]");
        e = std::move(idx);
      } else if (check("(")) {
        if (e->kind != ExprKind::Ident) fail("only named functions can be called");
        ++pos_;
        auto call = std::make_unique<Expr>();
        call->kind = ExprKind::Call;
        call->text = e->text;
        call->line = e->line;
        if (!check(")")) {
          do {
            call->kids.push_back(parse_assign());
          } while (accept(","));
        }
        expect(")");
        e = std::move(call);
      } else if (check("++") || check("--")) {
        if (e->kind != ExprKind::Ident && e->kind != ExprKind::Index) fail("operand of postfix operator is not assignable");
        auto op = make(ExprKind::Postfix, toks_[pos_++]);
        op->kids.push_back(std::move(e));
        e = std::move(op);
      } else {
        break;
      }
    }
    return e;
  }

  ExprPtr parse_primary() {
    const auto& t = peek();
    switch (t.kind) {
      case TokKind::Ident: ++pos_; return make(ExprKind::Ident, t);
      case TokKind::Number:
      case TokKind::String:
      case TokKind::Char: ++pos_; return make(ExprKind::Literal, t);
      default: break;
    }
    if (accept("(")) {
      auto e = parse_expr();
      expect(")");
      return e;
    }
    fail("expected an expression but found '" + (t.kind == TokKind::End ? std::string("end of input") : t.text) + "'");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// CPG construction
// ---------------------------------------------------------------------------

/// Variables a statement node writes and reads. Pointer targets appear as "*p".
struct DefUse {
  std::set<std::string> defs;
  std::set<std::string> uses;
};

struct ParsedFunction {
  Cpg cpg;
  std::map<NodeId, DefUse> def_use;  // statement and condition nodes only
};

namespace detail {

inline void collect(const Expr& e, DefUse& du);

inline void collect_target(const Expr& t, DefUse& du, bool also_read) {
  switch (t.kind) {
    case ExprKind::Ident:
      du.defs.insert(t.text);
      if (also_read) du.uses.insert(t.text);
      break;
    case ExprKind::Index:
      // One variable per array name: an element write defines the whole array and reads the rest of it.
      if (t.kids[0]->kind == ExprKind::Ident) {
        du.defs.insert(t.kids[0]->text);
        du.uses.insert(t.kids[0]->text);
      } else {
        collect(*t.kids[0], du);
      }
      collect(*t.kids[1], du);
      break;
    case ExprKind::Unary:  // *p
      if (t.kids[0]->kind == ExprKind::Ident) {
        du.uses.insert(t.kids[0]->text);
        du.defs.insert("*" + t.kids[0]->text);
        if (also_read) du.uses.insert("*" + t.kids[0]->text);
      } else {
        collect(*t.kids[0], du);
      }
      break;
    default: collect(t, du); break;
  }
}

inline void collect(const Expr& e, DefUse& du) {
  switch (e.kind) {
    case ExprKind::Ident: du.uses.insert(e.text); break;
    case ExprKind::Literal: break;
    case ExprKind::Assign:
      collect_target(*e.kids[0], du, e.text != "=");
      collect(*e.kids[1], du);
      break;
    case ExprKind::Unary:
      if (e.text == "++" || e.text == "--") {
        collect_target(*e.kids[0], du, true);
      } else if (e.text == "*" && e.kids[0]->kind == ExprKind::Ident) {
        du.uses.insert(e.kids[0]->text);
        du.uses.insert("*" + e.kids[0]->text);
      } else {
        collect(*e.kids[0], du);
      }
      break;
    case ExprKind::Postfix: collect_target(*e.kids[0], du, true); break;
    case ExprKind::Binary:
    case ExprKind::Call:
    case ExprKind::Index:
      for (const auto& k : e.kids) collect(*k, du);
      break;
  }
}

class CpgBuilder {
 public:
  CpgBuilder(const std::vector<Token>& toks, std::string function_id) : toks_(toks) {
    out_.cpg.function_id = std::move(function_id);
  }

  ParsedFunction build(const Function& fn) {
    const NodeId entry = add_node(NodeKind::Entry, {}, fn.line);
    std::vector<NodeId> preds{entry};
    for (const auto& p : fn.params) {
      const NodeId n = add_node(NodeKind::Statement, token_texts(p.tok_begin, p.tok_end), p.decl.line);
      edge(entry, n, EdgeKind::AST);
      DefUse du;
      du.defs.insert(p.decl.name);
      out_.def_use[n] = du;
      add_declarator_syntax(n, p.decl);
      link(preds, n);
      preds = {n};
    }
    build_list(fn.body, entry, std::nullopt, preds);
    compute_ddg();
    std::sort(out_.cpg.edges.begin(), out_.cpg.edges.end());
    return std::move(out_);
  }

 private:
  std::vector<std::string> token_texts(std::size_t b, std::size_t e) const {
    std::vector<std::string> v;
    for (std::size_t i = b; i < e; ++i)
      if (toks_[i].text != ";") v.push_back(toks_[i].text);
    return v;
  }

  NodeId add_node(NodeKind kind, std::vector<std::string> tokens, int line) {
    CpgNode n;
    n.node_id = static_cast<NodeId>(out_.cpg.nodes.size());
    n.kind = kind;
    n.tokens = std::move(tokens);
    n.line = line;
    out_.cpg.nodes.push_back(std::move(n));
    return out_.cpg.nodes.back().node_id;
  }

  void edge(NodeId s, NodeId d, EdgeKind k) {
    if (edge_set_.emplace(s, d, k).second) out_.cpg.edges.push_back({s, d, k});
  }

  void link(const std::vector<NodeId>& preds, NodeId n) {
    for (NodeId p : preds) {
      edge(p, n, EdgeKind::CFG);
      cfg_succ_[p].push_back(n);
    }
  }

  void add_expr_syntax(NodeId parent, const Expr& e) {
    const NodeId n = add_node(NodeKind::Syntax, {e.text}, e.line);
    edge(parent, n, EdgeKind::AST);
    for (const auto& k : e.kids) add_expr_syntax(n, *k);
  }

  void add_declarator_syntax(NodeId parent, const Declarator& d) {
    const NodeId n = add_node(NodeKind::Syntax, {d.name}, d.line);
    edge(parent, n, EdgeKind::AST);
    if (d.array_size) add_expr_syntax(n, *d.array_size);
    if (d.init) add_expr_syntax(n, *d.init);
  }

  NodeId add_simple(const std::vector<Declarator>& decls, const Expr* expr, int line, std::vector<std::string> tokens,
                    NodeId ast_parent, std::optional<NodeId> ctrl, std::vector<NodeId>& preds) {
    const NodeId n = add_node(NodeKind::Statement, std::move(tokens), line);
    edge(ast_parent, n, EdgeKind::AST);
    if (ctrl) edge(*ctrl, n, EdgeKind::CDG);
    DefUse du;
    for (const auto& d : decls) {
      du.defs.insert(d.name);
      if (d.array_size) collect(*d.array_size, du);
      if (d.init) collect(*d.init, du);
      add_declarator_syntax(n, d);
    }
    if (expr) {
      collect(*expr, du);
      add_expr_syntax(n, *expr);
    }
    out_.def_use[n] = du;
    link(preds, n);
    preds = {n};
    return n;
  }

  NodeId add_simple(const Stmt& s, NodeId ast_parent, std::optional<NodeId> ctrl, std::vector<NodeId>& preds) {
    return add_simple(s.decls, s.expr.get(), s.line, token_texts(s.tok_begin, s.tok_end), ast_parent, ctrl, preds);
  }

  NodeId add_condition(std::string keyword, const Stmt& s, NodeId ast_parent, std::optional<NodeId> ctrl,
                       std::vector<NodeId>& preds) {
    std::vector<std::string> tokens{std::move(keyword)};
    for (auto& t : token_texts(s.cond_begin, s.cond_end)) tokens.push_back(std::move(t));
    const NodeId c = add_node(NodeKind::Condition, std::move(tokens), s.line);
    edge(ast_parent, c, EdgeKind::AST);
    if (ctrl) edge(*ctrl, c, EdgeKind::CDG);
    DefUse du;
    collect(*s.expr, du);
    out_.def_use[c] = du;
    add_expr_syntax(c, *s.expr);
    link(preds, c);
    return c;
  }

  // Appends the statements of `list` and returns through `preds` the nodes that fall through.
  void build_list(const std::vector<StmtPtr>& list, NodeId ast_parent, std::optional<NodeId> ctrl,
                  std::vector<NodeId>& preds) {
    for (const auto& s : list) build_stmt(*s, ast_parent, ctrl, preds);
  }

  void build_stmt(const Stmt& s, NodeId ast_parent, std::optional<NodeId> ctrl, std::vector<NodeId>& preds) {
    switch (s.kind) {
      case StmtKind::Empty: return;
      case StmtKind::Block: build_list(s.body, ast_parent, ctrl, preds); return;
      case StmtKind::Decl:
      case StmtKind::ExprStmt: add_simple(s, ast_parent, ctrl, preds); return;
      case StmtKind::Return:
        add_simple(s, ast_parent, ctrl, preds);
        preds.clear();
        return;
      case StmtKind::If: {
        const NodeId c = add_condition("if", s, ast_parent, ctrl, preds);
        std::vector<NodeId> then_preds{c};
        build_list(s.body, c, c, then_preds);
        std::vector<NodeId> else_preds{c};
        if (s.has_else) build_list(s.else_body, c, c, else_preds);
        preds = then_preds;
        for (NodeId n : else_preds)
          if (std::find(preds.begin(), preds.end(), n) == preds.end()) preds.push_back(n);
        return;
      }
      case StmtKind::While: {
        const NodeId c = add_condition("while", s, ast_parent, ctrl, preds);
        std::vector<NodeId> body_preds{c};
        build_list(s.body, c, c, body_preds);
        link(body_preds, c);
        preds = {c};
        return;
      }
      case StmtKind::For: {
        if (s.init) add_simple(*s.init, ast_parent, ctrl, preds);
        const NodeId c = add_condition("for", s, ast_parent, ctrl, preds);
        std::vector<NodeId> body_preds{c};
        build_list(s.body, c, c, body_preds);
        if (s.step)
          add_simple({}, s.step.get(), s.step->line, token_texts(s.step_begin, s.step_end), c, c, body_preds);
        link(body_preds, c);
        preds = {c};
        return;
      }
    }
  }

  // Iterative reaching definitions, one fact per (variable, defining node).
  void compute_ddg() {
    using Fact = std::pair<std::string, NodeId>;
    std::vector<NodeId> order;
    for (const auto& [n, du] : out_.def_use) order.push_back(n);
    std::map<NodeId, std::vector<NodeId>> preds;
    for (const auto& [p, succs] : cfg_succ_)
      for (NodeId s : succs) preds[s].push_back(p);

    std::map<NodeId, std::set<Fact>> in, out;
    bool changed = true;
    while (changed) {
      changed = false;
      for (NodeId n : order) {
        std::set<Fact> new_in;
        for (NodeId p : preds[n])
          if (auto it = out.find(p); it != out.end()) new_in.insert(it->second.begin(), it->second.end());
        const auto& defs = out_.def_use[n].defs;
        std::set<Fact> new_out;
        for (const auto& f : new_in)
          if (!defs.count(f.first)) new_out.insert(f);
        for (const auto& v : defs) new_out.emplace(v, n);
        if (new_in != in[n] || new_out != out[n]) {
          in[n] = std::move(new_in);
          out[n] = std::move(new_out);
          changed = true;
        }
      }
    }
    for (NodeId n : order) {
      const auto& uses = out_.def_use[n].uses;
      for (const auto& [var, def] : in[n])
        if (uses.count(var)) edge(def, n, EdgeKind::DDG);
    }
  }

  const std::vector<Token>& toks_;
  ParsedFunction out_;
  std::set<std::tuple<NodeId, NodeId, EdgeKind>> edge_set_;
  std::map<NodeId, std::vector<NodeId>> cfg_succ_;
};

}  // namespace detail

/// Parses one function and returns the CPG together with per-node def/use sets.
inline ParsedFunction analyze_function(std::string_view source, std::string function_id = {}) {
  Parser parser(lex(source));
  Function fn = parser.parse_function();
  if (function_id.empty()) function_id = fn.name;
  detail::CpgBuilder builder(parser.tokens(), std::move(function_id));
  return builder.build(fn);
}

inline Cpg parse_function(std::string_view source, std::string function_id = {}) {
  return analyze_function(source, std::move(function_id)).cpg;
}

}  // namespace ifmavd::minic
