#pragma once

// Vulnerability interest points and bidirectional PDG slices (behavior subgraphs).
//
// Interest-point rules work on node tokens alone, so they apply equally to
// graphs built by the mini-C frontend and to graphs imported from elsewhere.

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ifmavd/cpg.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/minic.hpp"

namespace ifmavd {

enum class InterestCategory { SensitiveApi, Array, Integer, Pointer };

inline std::string_view to_string(InterestCategory c) {
  switch (c) {
    case InterestCategory::SensitiveApi: return "sensitive_api";
    case InterestCategory::Array: return "array";
    case InterestCategory::Integer: return "integer";
    case InterestCategory::Pointer: return "pointer";
  }
  return "array";
}

struct InterestPoint {
  NodeId node_id = 0;
  InterestCategory category = InterestCategory::Array;
  friend bool operator==(const InterestPoint&, const InterestPoint&) = default;
};

struct BehaviorSubgraph {
  std::string function_id;
  InterestPoint interest_point;
  std::vector<NodeId> node_ids;  // ascending
  std::vector<CpgEdge> edges;    // induced PDG edges, sorted
};

using ApiList = std::set<std::string, std::less<>>;

/// One name per line; '#' starts a comment; blank lines ignored.
inline ApiList parse_api_list(std::string_view text) {
  ApiList out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.insert(line.substr(b, e - b + 1));
  }
  return out;
}

inline ApiList load_api_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read api list '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_api_list(ss.str());
}

namespace detail {

inline bool is_identifier(std::string_view t) {
  return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_') && !minic::is_keyword(t);
}

// Token that can end an operand, so a following '*', '-', '&' or '[' is binary/postfix.
inline bool ends_operand(std::string_view t) {
  if (t.empty()) return false;
  if (t == ")" || t == "]") return true;
  if (is_identifier(t)) return true;
  return std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '"' || t[0] == '\'' || t[0] == '.';
}

inline bool is_integer_type(std::string_view t) {
  return t == "int" || t == "long" || t == "short" || t == "unsigned" || t == "signed" || t == "size_t";
}

inline bool is_declaration(const std::vector<std::string>& toks) {
  return !toks.empty() && minic::is_type_keyword(toks.front());
}

// Declared names of a declaration node, with a flag for pointer declarators.
inline std::vector<std::pair<std::string, bool>> declared_names(const std::vector<std::string>& toks) {
  std::vector<std::pair<std::string, bool>> names;
  std::size_t i = 0;
  while (i < toks.size() && minic::is_type_keyword(toks[i])) ++i;
  int depth = 0;
  bool expect_name = true;
  bool pointer = false;
  for (; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t == "(" || t == "[") ++depth;
    if (t == ")" || t == "]") --depth;
    if (depth != 0) continue;
    if (t == ",") {
      expect_name = true;
      pointer = false;
    } else if (expect_name && t == "*") {
      pointer = true;
    } else if (expect_name && is_identifier(t)) {
      names.emplace_back(t, pointer);
      expect_name = false;
    }
  }
  return names;
}

inline std::set<std::string> declared_integers(const Cpg& cpg) {
  std::set<std::string> ints;
  for (const auto& n : cpg.nodes) {
    if (!is_pdg_kind(n.kind) || !is_declaration(n.tokens)) continue;
    bool integral = false;
    for (const auto& t : n.tokens) {
      if (!minic::is_type_keyword(t)) break;
      integral = integral || is_integer_type(t);
    }
    if (!integral) continue;
    for (const auto& [name, ptr] : declared_names(n.tokens))
      if (!ptr) ints.insert(name);
  }
  return ints;
}

// Index one past the declarator part of a declaration (first top-level '='), or 0 for non-declarations.
inline std::size_t declarator_end(const std::vector<std::string>& toks) {
  if (!is_declaration(toks)) return 0;
  for (std::size_t i = 0; i < toks.size(); ++i)
    if (toks[i] == "=") return i;
  return toks.size();
}

inline bool calls_api(const std::vector<std::string>& toks, const ApiList& apis) {
  for (std::size_t i = 0; i + 1 < toks.size(); ++i)
    if (toks[i + 1] == "(" && apis.count(toks[i])) return true;
  return false;
}

inline bool has_subscript(const std::vector<std::string>& toks) {
  const std::size_t skip = declarator_end(toks);
  for (std::size_t i = std::max<std::size_t>(skip, 1); i < toks.size(); ++i)
    if (toks[i] == "[" && ends_operand(toks[i - 1])) return true;
  return false;
}

inline bool has_integer_arithmetic(const std::vector<std::string>& toks, const std::set<std::string>& ints) {
  static const std::set<std::string_view> kBinary = {"+", "-", "*", "/", "%", "<<", ">>"};
  static const std::set<std::string_view> kUpdate = {"++", "--", "+=", "-=", "*=", "/=", "%=", "<<=", ">>="};
  bool arith = false;
  bool mentions_int = false;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (kUpdate.count(t)) arith = true;
    if (i > 0 && kBinary.count(t) && ends_operand(toks[i - 1])) arith = true;
    if (ints.count(t)) mentions_int = true;
  }
  return arith && mentions_int;
}

inline bool has_pointer_op(const std::vector<std::string>& toks) {
  const std::size_t decl_end = declarator_end(toks);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t != "*" && t != "&") continue;
    if (i < decl_end) continue;  // declarator '*' in "int *p"
    if (i == 0 || !ends_operand(toks[i - 1])) return true;
  }
  return false;
}

}  // namespace detail

/// One interest point per matching PDG node, ordered by node_id. Rule precedence:
/// sensitive call, array subscript, integer arithmetic, pointer operation.
inline std::vector<InterestPoint> find_interest_points(const Pdg& pdg, const Cpg& cpg, const ApiList& api_list) {
  const auto ints = detail::declared_integers(cpg);
  std::map<NodeId, const CpgNode*> by_id;
  for (const auto& n : cpg.nodes) by_id[n.node_id] = &n;
  std::vector<InterestPoint> points;
  for (NodeId id : pdg.nodes) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw UnknownNode(id);
    const auto& toks = it->second->tokens;
    if (detail::calls_api(toks, api_list)) {
      points.push_back({id, InterestCategory::SensitiveApi});
    } else if (detail::has_subscript(toks)) {
      points.push_back({id, InterestCategory::Array});
    } else if (detail::has_integer_arithmetic(toks, ints)) {
      points.push_back({id, InterestCategory::Integer});
    } else if (detail::has_pointer_op(toks)) {
      points.push_back({id, InterestCategory::Pointer});
    }
  }
  return points;
}

namespace detail {

struct PdgAdjacency {
  std::map<NodeId, std::vector<NodeId>> succ;
  std::map<NodeId, std::vector<NodeId>> pred;

  explicit PdgAdjacency(const Pdg& pdg) {
    for (const auto& e : pdg.edges) {
      succ[e.src].push_back(e.dst);
      pred[e.dst].push_back(e.src);
    }
  }
};

inline void closure(NodeId start, const std::map<NodeId, std::vector<NodeId>>& next, std::set<NodeId>& seen) {
  std::deque<NodeId> work{start};
  while (!work.empty()) {
    const NodeId v = work.front();
    work.pop_front();
    auto it = next.find(v);
    if (it == next.end()) continue;
    for (NodeId w : it->second)
      if (seen.insert(w).second) work.push_back(w);
  }
}

inline BehaviorSubgraph slice_with(const Pdg& pdg, const PdgAdjacency& adj, const InterestPoint& point) {
  if (!pdg.contains(point.node_id)) throw UnknownNode(point.node_id);
  std::set<NodeId> keep{point.node_id};
  std::set<NodeId> backward;
  closure(point.node_id, adj.succ, keep);
  closure(point.node_id, adj.pred, backward);
  keep.insert(backward.begin(), backward.end());
  BehaviorSubgraph sub;
  sub.function_id = pdg.function_id;
  sub.interest_point = point;
  sub.node_ids.assign(keep.begin(), keep.end());
  for (const auto& e : pdg.edges)
    if (keep.count(e.src) && keep.count(e.dst)) sub.edges.push_back(e);
  return sub;
}

}  // namespace detail

/// Forward and backward closure of the point over DDG and CDG edges, plus the induced edges.
inline BehaviorSubgraph slice(const Pdg& pdg, const InterestPoint& point) {
  return detail::slice_with(pdg, detail::PdgAdjacency(pdg), point);
}

/// Slices at every interest point, keeping the first slice for each distinct node set.
inline std::vector<BehaviorSubgraph> behaviors_of(const Pdg& pdg, const Cpg& cpg, const ApiList& api_list) {
  const detail::PdgAdjacency adj(pdg);
  std::vector<BehaviorSubgraph> out;
  std::set<std::vector<NodeId>> seen;
  for (const auto& p : find_interest_points(pdg, cpg, api_list)) {
    auto sub = detail::slice_with(pdg, adj, p);
    if (seen.insert(sub.node_ids).second) out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace ifmavd
