#include <gtest/gtest.h>

#include <algorithm>
#include <string>

#include <json.hpp>

#include "ifmavd/cpg.hpp"
#include "ifmavd/minic.hpp"
#include "ifmavd/rng.hpp"

using namespace ifmavd;
using nlohmann::json;

namespace {

const char* kTwoNodeDoc = R"({
  "function_id": "g", "label": "clean",
  "nodes": [
    {"node_id": 0, "kind": "entry", "tokens": [], "line": 1},
    {"node_id": 1, "kind": "statement", "tokens": ["return", "0"], "line": 2}
  ],
  "edges": [{"src": 0, "dst": 1, "kind": "AST"}]
})";

// Random valid document with shuffled node/edge order.
json random_document(Rng& rng) {
  const int n = 1 + static_cast<int>(rng.below(12));
  json nodes = json::array();
  std::vector<std::string> kinds;
  for (int i = 0; i < n; ++i) {
    std::string kind = i == 0 ? "entry" : (rng.bernoulli(0.5) ? "statement" : (rng.bernoulli(0.5) ? "condition" : "syntax"));
    json toks = json::array();
    if (kind != "entry")
      for (std::uint64_t t = 0, k = 1 + rng.below(3); t < k; ++t) toks.push_back("t" + std::to_string(rng.below(5)));
    nodes.push_back({{"node_id", i * 3 + 7}, {"kind", kind}, {"tokens", toks}, {"line", 1 + i}});
    kinds.push_back(kind);
  }
  json edges = json::array();
  std::set<std::tuple<int, int, std::string>> used;
  for (int i = 1; i < n; ++i) {  // AST tree rooted at the entry
    const int parent = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
    edges.push_back({{"src", parent * 3 + 7}, {"dst", i * 3 + 7}, {"kind", "AST"}});
  }
  for (int k = 0; k < n; ++k) {
    const int a = static_cast<int>(rng.below(n)), b = static_cast<int>(rng.below(n));
    const char* ek[] = {"CFG", "DDG", "CDG"};
    std::string kind = ek[rng.below(3)];
    if (kind == "CFG" && (kinds[a] == "syntax" || kinds[b] == "syntax")) continue;
    if (!used.emplace(a, b, kind).second) continue;
    edges.push_back({{"src", a * 3 + 7}, {"dst", b * 3 + 7}, {"kind", kind}});
  }
  std::vector<json> nv(nodes.begin(), nodes.end()), ev(edges.begin(), edges.end());
  rng.shuffle(nv);
  rng.shuffle(ev);
  return {{"function_id", "r" + std::to_string(rng.below(1000))}, {"label", "unknown"}, {"nodes", nv}, {"edges", ev}};
}

// Independent canonicalization: sort nodes by id and edges by (src, dst, kind-order).
json canonicalize(json d) {
  auto& nodes = d["nodes"];
  std::sort(nodes.begin(), nodes.end(), [](const json& a, const json& b) { return a["node_id"] < b["node_id"]; });
  auto order = [](const std::string& k) { return k == "AST" ? 0 : k == "CFG" ? 1 : k == "DDG" ? 2 : 3; };
  auto& edges = d["edges"];
  std::sort(edges.begin(), edges.end(), [&](const json& a, const json& b) {
    return std::make_tuple(a["src"].get<int>(), a["dst"].get<int>(), order(a["kind"])) <
           std::make_tuple(b["src"].get<int>(), b["dst"].get<int>(), order(b["kind"]));
  });
  d["format_version"] = 1;
  return d;
}

}  // namespace

TEST(CpgExchange, LoadsTwoNodeDocument) {
  const Cpg g = load_cpg(kTwoNodeDoc);
  EXPECT_EQ(g.function_id, "g");
  EXPECT_EQ(g.label, Label::Clean);
  EXPECT_EQ(g.nodes.size(), 2u);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0], (CpgEdge{0, 1, EdgeKind::AST}));
}

TEST(CpgExchange, DanglingEdgeNamesMissingNode) {
  json d = json::parse(kTwoNodeDoc);
  d["edges"].push_back({{"src", 1}, {"dst", 99}, {"kind", "DDG"}});
  try {
    load_cpg(d.dump());
    FAIL();
  } catch (const DanglingEdge& e) {
    EXPECT_EQ(e.node_id(), 99);
  }
}

TEST(CpgExchange, SchemaErrorsNameTheField) {
  auto field_of = [](const json& d) -> std::string {
    try {
      load_cpg(d.dump());
    } catch (const SchemaError& e) {
      return e.field();
    }
    return "<none>";
  };
  json d = json::parse(kTwoNodeDoc);
  json bad = d;
  bad.erase("function_id");
  EXPECT_EQ(field_of(bad), "function_id");
  bad = d;
  bad["nodes"][1]["kind"] = "block";
  EXPECT_EQ(field_of(bad), "nodes[1].kind");
  bad = d;
  bad["edges"][0]["kind"] = "ast";
  EXPECT_EQ(field_of(bad), "edges[0].kind");
  bad = d;
  bad["nodes"][1]["tokens"] = json::array();
  EXPECT_EQ(field_of(bad), "nodes[1].tokens");
  bad = d;
  bad["nodes"][0]["kind"] = "statement";
  bad["nodes"][0]["tokens"] = {"x"};
  EXPECT_EQ(field_of(bad), "nodes");  // no entry node
  bad = d;
  bad["edges"].push_back(d["edges"][0]);
  EXPECT_EQ(field_of(bad), "edges[1]");
  EXPECT_THROW(load_cpg("{not json"), SchemaError);
}

TEST(CpgExchange, RoundTripEqualsCanonicalizedDocument) {
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const json d = random_document(rng);
    const std::string saved = save_cpg(load_cpg(d.dump()));
    EXPECT_EQ(json::parse(saved), canonicalize(d));
    EXPECT_EQ(saved, canonicalize(d).dump());
  }
}

TEST(CpgExchange, ParsedGraphsSurviveRoundTrip) {
  const Cpg g = minic::parse_function("int f(int n){ int s=0; while(n>0){ s+=n; n--; } return s; }");
  EXPECT_EQ(load_cpg(save_cpg(g)), g);
}

TEST(PdgView, OnlyAstEdgesGivesEmptyPdg) {
  const Cpg g = load_cpg(kTwoNodeDoc);
  const Pdg p = pdg_view(g);
  EXPECT_TRUE(p.edges.empty());
  EXPECT_EQ(p.nodes, std::vector<NodeId>{1});
}

TEST(PdgView, ThreeStatementSequenceHasOneDdgEdge) {
  const Cpg g = minic::parse_function("void f(){ int a=1; int b=2; foo(a); }");
  const Pdg p = pdg_view(g);
  ASSERT_EQ(p.edges.size(), 1u);
  EXPECT_EQ(p.edges[0].kind, EdgeKind::DDG);
  EXPECT_EQ(p.nodes.size(), 3u);
  EXPECT_LE(p.edges.size(), g.edges.size());
}

TEST(PdgView, IdempotentUnderReembedding) {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Cpg g = load_cpg(random_document(rng).dump());
    const Pdg p = pdg_view(g);
    EXPECT_LE(p.edges.size(), g.edges.size());
    for (const auto& e : p.edges) EXPECT_TRUE(e.kind == EdgeKind::DDG || e.kind == EdgeKind::CDG);
    EXPECT_EQ(pdg_view(embed_pdg(p, g)), p);
  }
}
