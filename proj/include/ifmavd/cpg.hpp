#pragma once

// Code property graph types, the PDG projection and the JSON exchange format
// used to import graphs produced by external parsers.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ifmavd/errors.hpp"

namespace ifmavd {

using NodeId = std::int64_t;

enum class Label { Vulnerable, Clean, Unknown };

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::Vulnerable: return "vulnerable";
    case Label::Clean: return "clean";
    case Label::Unknown: return "unknown";
  }
  return "unknown";
}

inline std::optional<Label> label_from_string(std::string_view s) {
  if (s == "vulnerable") return Label::Vulnerable;
  if (s == "clean") return Label::Clean;
  if (s == "unknown") return Label::Unknown;
  return std::nullopt;
}

enum class NodeKind { Entry, Statement, Condition, Syntax };
enum class EdgeKind { AST, CFG, DDG, CDG };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Entry: return "entry";
    case NodeKind::Statement: return "statement";
    case NodeKind::Condition: return "condition";
    case NodeKind::Syntax: return "syntax";
  }
  return "syntax";
}

inline std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::AST: return "AST";
    case EdgeKind::CFG: return "CFG";
    case EdgeKind::DDG: return "DDG";
    case EdgeKind::CDG: return "CDG";
  }
  return "AST";
}

inline std::optional<NodeKind> node_kind_from_string(std::string_view s) {
  if (s == "entry") return NodeKind::Entry;
  if (s == "statement") return NodeKind::Statement;
  if (s == "condition") return NodeKind::Condition;
  if (s == "syntax") return NodeKind::Syntax;
  return std::nullopt;
}

inline std::optional<EdgeKind> edge_kind_from_string(std::string_view s) {
  if (s == "AST") return EdgeKind::AST;
  if (s == "CFG") return EdgeKind::CFG;
  if (s == "DDG") return EdgeKind::DDG;
  if (s == "CDG") return EdgeKind::CDG;
  return std::nullopt;
}

/// True for nodes that take part in control flow and dependence (statements and conditions).
inline bool is_pdg_kind(NodeKind k) { return k == NodeKind::Statement || k == NodeKind::Condition; }

struct CpgNode {
  NodeId node_id = 0;
  NodeKind kind = NodeKind::Syntax;
  std::vector<std::string> tokens;
  int line = 0;

  friend bool operator==(const CpgNode&, const CpgNode&) = default;
};

struct CpgEdge {
  NodeId src = 0;
  NodeId dst = 0;
  EdgeKind kind = EdgeKind::AST;

  friend bool operator==(const CpgEdge&, const CpgEdge&) = default;
  friend auto operator<=>(const CpgEdge& a, const CpgEdge& b) {
    return std::tie(a.src, a.dst, a.kind) <=> std::tie(b.src, b.dst, b.kind);
  }
};

struct Cpg {
  std::string function_id;
  Label label = Label::Unknown;
  std::vector<CpgNode> nodes;
  std::vector<CpgEdge> edges;

  /// Position of a node in `nodes`, or nullopt.
  std::optional<std::size_t> index_of(NodeId id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].node_id == id) return i;
    return std::nullopt;
  }

  const CpgNode& node(NodeId id) const {
    auto idx = index_of(id);
    if (!idx) throw UnknownNode(id);
    return nodes[*idx];
  }

  friend bool operator==(const Cpg&, const Cpg&) = default;
};

struct Pdg {
  std::string function_id;
  std::vector<NodeId> nodes;  // ascending
  std::vector<CpgEdge> edges;  // DDG and CDG only, sorted

  bool contains(NodeId id) const { return std::binary_search(nodes.begin(), nodes.end(), id); }

  friend bool operator==(const Pdg&, const Pdg&) = default;
};

/// Checks every structural invariant of a Cpg; throws SchemaError or DanglingEdge.
inline void validate(const Cpg& cpg) {
  std::unordered_map<NodeId, NodeKind> kinds;
  bool has_entry = false;
  for (std::size_t i = 0; i < cpg.nodes.size(); ++i) {
    const auto& n = cpg.nodes[i];
    if (!kinds.emplace(n.node_id, n.kind).second)
      throw SchemaError("nodes[" + std::to_string(i) + "].node_id", "duplicate node_id " + std::to_string(n.node_id));
    if (n.kind == NodeKind::Entry) has_entry = true;
    if (is_pdg_kind(n.kind) && n.tokens.empty())
      throw SchemaError("nodes[" + std::to_string(i) + "].tokens", "statement/condition nodes need tokens");
  }
  if (!has_entry) throw SchemaError("nodes", "no entry node");

  std::set<std::tuple<NodeId, NodeId, EdgeKind>> seen;
  std::unordered_map<NodeId, NodeId> ast_parent;
  for (std::size_t i = 0; i < cpg.edges.size(); ++i) {
    const auto& e = cpg.edges[i];
    auto s = kinds.find(e.src);
    if (s == kinds.end()) throw DanglingEdge(e.src);
    auto d = kinds.find(e.dst);
    if (d == kinds.end()) throw DanglingEdge(e.dst);
    if (!seen.emplace(e.src, e.dst, e.kind).second)
      throw SchemaError("edges[" + std::to_string(i) + "]", "duplicate (src,dst,kind) triple");
    if (e.kind == EdgeKind::CFG && (s->second == NodeKind::Syntax || d->second == NodeKind::Syntax))
      throw SchemaError("edges[" + std::to_string(i) + "].kind", "CFG edge touches a syntax node");
    if (e.kind == EdgeKind::AST) {
      if (!ast_parent.emplace(e.dst, e.src).second)
        throw SchemaError("edges[" + std::to_string(i) + "].dst", "node has more than one AST parent");
    }
  }
  // Walk each AST parent chain: it must terminate (no cycles) at an entry node.
  for (const auto& [child, parent] : ast_parent) {
    NodeId cur = child;
    std::size_t steps = 0;
    while (true) {
      auto it = ast_parent.find(cur);
      if (it == ast_parent.end()) break;
      cur = it->second;
      if (++steps > ast_parent.size()) throw SchemaError("edges", "AST edges contain a cycle");
    }
    if (kinds.at(cur) != NodeKind::Entry)
      throw SchemaError("edges", "AST tree rooted at non-entry node " + std::to_string(cur));
  }
}

/// The dependence-only projection: statement/condition nodes and their DDG/CDG edges.
inline Pdg pdg_view(const Cpg& cpg) {
  Pdg pdg;
  pdg.function_id = cpg.function_id;
  for (const auto& n : cpg.nodes)
    if (is_pdg_kind(n.kind)) pdg.nodes.push_back(n.node_id);
  std::sort(pdg.nodes.begin(), pdg.nodes.end());
  for (const auto& e : cpg.edges) {
    if (e.kind != EdgeKind::DDG && e.kind != EdgeKind::CDG) continue;
    // External producers may hang dependence edges off non-statement nodes; those are outside the PDG.
    if (pdg.contains(e.src) && pdg.contains(e.dst)) pdg.edges.push_back(e);
  }
  std::sort(pdg.edges.begin(), pdg.edges.end());
  return pdg;
}

/// Re-embeds a PDG into a Cpg holding the source graph's entry nodes plus the PDG's nodes and edges.
inline Cpg embed_pdg(const Pdg& pdg, const Cpg& source) {
  Cpg out;
  out.function_id = pdg.function_id;
  out.label = source.label;
  for (const auto& n : source.nodes)
    if (n.kind == NodeKind::Entry || pdg.contains(n.node_id)) out.nodes.push_back(n);
  out.edges = pdg.edges;
  return out;
}

// ---------------------------------------------------------------------------
// Exchange format
// ---------------------------------------------------------------------------

inline constexpr int kCpgFormatVersion = 1;

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

inline std::int64_t require_int(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer()) throw SchemaError(path + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::string require_string(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(path.empty() ? key : path + "." + key, "expected a string");
  return v.get<std::string>();
}

}  // namespace detail

inline Cpg cpg_from_json(const nlohmann::json& doc) {
  using detail::require;
  if (!doc.is_object()) throw SchemaError("<document>", "expected a JSON object");
  if (auto it = doc.find("format_version"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() != kCpgFormatVersion)
      throw SchemaError("format_version", "unsupported version");
  }
  Cpg cpg;
  cpg.function_id = detail::require_string(doc, "function_id", "");
  if (auto it = doc.find("label"); it != doc.end()) {
    if (!it->is_string()) throw SchemaError("label", "expected a string");
    auto l = label_from_string(it->get<std::string>());
    if (!l) throw SchemaError("label", "expected vulnerable|clean|unknown");
    cpg.label = *l;
  }
  const auto& nodes = require(doc, "nodes", "");
  if (!nodes.is_array()) throw SchemaError("nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const auto& jn = nodes[i];
    CpgNode n;
    n.node_id = detail::require_int(jn, "node_id", path);
    auto kind = node_kind_from_string(detail::require_string(jn, "kind", path));
    if (!kind) throw SchemaError(path + ".kind", "expected entry|statement|condition|syntax");
    n.kind = *kind;
    const auto& toks = require(jn, "tokens", path);
    if (!toks.is_array()) throw SchemaError(path + ".tokens", "expected an array");
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (!toks[t].is_string()) throw SchemaError(path + ".tokens[" + std::to_string(t) + "]", "expected a string");
      n.tokens.push_back(toks[t].get<std::string>());
    }
    n.line = static_cast<int>(detail::require_int(jn, "line", path));
    cpg.nodes.push_back(std::move(n));
  }
  const auto& edges = require(doc, "edges", "");
  if (!edges.is_array()) throw SchemaError("edges", "expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "edges[" + std::to_string(i) + "]";
    const auto& je = edges[i];
    CpgEdge e;
    e.src = detail::require_int(je, "src", path);
    e.dst = detail::require_int(je, "dst", path);
    auto kind = edge_kind_from_string(detail::require_string(je, "kind", path));
    if (!kind) throw SchemaError(path + ".kind", "expected AST|CFG|DDG|CDG");
    e.kind = *kind;
    cpg.edges.push_back(e);
  }
  validate(cpg);
  return cpg;
}

inline Cpg load_cpg(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("<document>", e.what());
  }
  return cpg_from_json(doc);
}

/// Canonical JSON: nodes ordered by node_id, edges by (src, dst, kind), keys sorted.
inline nlohmann::json cpg_to_json(const Cpg& cpg) {
  std::vector<const CpgNode*> nodes;
  for (const auto& n : cpg.nodes) nodes.push_back(&n);
  std::sort(nodes.begin(), nodes.end(), [](auto* a, auto* b) { return a->node_id < b->node_id; });
  std::vector<CpgEdge> edges = cpg.edges;
  std::sort(edges.begin(), edges.end());

  nlohmann::json doc;
  doc["format_version"] = kCpgFormatVersion;
  doc["function_id"] = cpg.function_id;
  doc["label"] = std::string(to_string(cpg.label));
  doc["nodes"] = nlohmann::json::array();
  for (const auto* n : nodes) {
    doc["nodes"].push_back({{"node_id", n->node_id},
                            {"kind", std::string(to_string(n->kind))},
                            {"tokens", n->tokens},
                            {"line", n->line}});
  }
  doc["edges"] = nlohmann::json::array();
  for (const auto& e : edges)
    doc["edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"kind", std::string(to_string(e.kind))}});
  return doc;
}

inline std::string save_cpg(const Cpg& cpg) { return cpg_to_json(cpg).dump(); }

}  // namespace ifmavd
