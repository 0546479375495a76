#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "ifmavd/minic.hpp"
#include "ifmavd/rng.hpp"
#include "ifmavd/slicer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ifmavd;
using ifmavd::test::find_node;
using oracle::make_pdg;
using oracle::random_edges;

namespace {

void expect_induced(const Pdg& pdg, const BehaviorSubgraph& s) {
  std::set<NodeId> keep(s.node_ids.begin(), s.node_ids.end());
  EXPECT_TRUE(keep.count(s.interest_point.node_id));
  std::vector<CpgEdge> want;
  for (const auto& e : pdg.edges)
    if (keep.count(e.src) && keep.count(e.dst)) want.push_back(e);
  EXPECT_EQ(s.edges, want);
}

}  // namespace

TEST(InterestPoints, SensitiveApiCall) {
  const Cpg g = minic::parse_function("void f(char *d, char *s){ strcpy(d,s); }");
  const auto pts = find_interest_points(pdg_view(g), g, ApiList{"strcpy"});
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].category, InterestCategory::SensitiveApi);
  EXPECT_EQ(pts[0].node_id, find_node(g, "strcpy ( d , s )"));
}

TEST(InterestPoints, NothingRiskyGivesEmptyList) {
  const Cpg g = minic::parse_function("void f(float x){ float y = x * 2.0; log_value(y); if (y > 1.0) { y = 0.5; } }");
  EXPECT_TRUE(find_interest_points(pdg_view(g), g, ApiList{"strcpy"}).empty());
}

TEST(InterestPoints, ArraySubscript) {
  const Cpg g = minic::parse_function("void f(int i){ int a[4]; a[i]=0; }");
  const auto pts = find_interest_points(pdg_view(g), g, {});
  ASSERT_EQ(pts.size(), 1u);  // the declaration alone is not a subscript
  EXPECT_EQ(pts[0].category, InterestCategory::Array);
  EXPECT_EQ(pts[0].node_id, find_node(g, "a [ i ] = 0"));
}

TEST(InterestPoints, IntegerArithmeticAndPointerRules) {
  const Cpg g = minic::parse_function(
      "void f(int n, int *p){ float h = 1.5; h = h * 2.0; n = n * 4; int *q = &n; h = -h; *p = 3; n++; }");
  const auto pts = find_interest_points(pdg_view(g), g, {});
  std::map<NodeId, InterestCategory> got;
  for (auto p : pts) got[p.node_id] = p.category;
  EXPECT_EQ(got.size(), 4u);
  EXPECT_EQ(got.at(find_node(g, "n = n * 4")), InterestCategory::Integer);
  EXPECT_EQ(got.at(find_node(g, "n ++")), InterestCategory::Integer);
  EXPECT_EQ(got.at(find_node(g, "int * q = & n")), InterestCategory::Pointer);
  EXPECT_EQ(got.at(find_node(g, "* p = 3")), InterestCategory::Pointer);
  EXPECT_FALSE(got.count(find_node(g, "int * p")));  // declarator, not a dereference
}

TEST(InterestPoints, RulePrecedenceAndApiListParsing) {
  const ApiList apis = parse_api_list("# comment\n memcpy \n\nstrcpy # inline\n");
  EXPECT_EQ(apis, (ApiList{"memcpy", "strcpy"}));
  const Cpg g = minic::parse_function("void f(int i, char *d){ int b[8]; memcpy(d, b[i], i + 1); }");
  const auto pts = find_interest_points(pdg_view(g), g, apis);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].category, InterestCategory::SensitiveApi);
}

TEST(Slice, ChainFromMiddle) {
  const Pdg p = make_pdg(3, {{0, 1}, {1, 2}});
  const auto s = slice(p, {1, InterestCategory::Array});
  EXPECT_EQ(s.node_ids, (std::vector<NodeId>{0, 1, 2}));
  expect_induced(p, s);
}

TEST(Slice, IsolatedPoint) {
  const Pdg p = make_pdg(3, {{0, 1}});
  const auto s = slice(p, {2, InterestCategory::Array});
  EXPECT_EQ(s.node_ids, (std::vector<NodeId>{2}));
  EXPECT_TRUE(s.edges.empty());
}

TEST(Slice, CompleteDagCoversEverything) {
  std::vector<std::pair<int, int>> e;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) e.emplace_back(a, b);
  const Pdg p = make_pdg(4, e);
  for (int pt = 0; pt < 4; ++pt) EXPECT_EQ(slice(p, {pt, InterestCategory::Array}).node_ids.size(), 4u);
}

TEST(Slice, UnknownNodeThrows) {
  const Pdg p = make_pdg(2, {});
  EXPECT_THROW(slice(p, {5, InterestCategory::Array}), UnknownNode);
}

TEST(SliceProperty, MatchesMatrixPowerClosureOnRandomDigraphs) {
  Rng rng(2024);
  for (int trial = 0; trial < 250; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(20));
    const auto edges = random_edges(rng, n);
    const Pdg p = make_pdg(n, edges);
    for (int pt = 0; pt < n; ++pt) {
      const auto s = slice(p, {pt, InterestCategory::Integer});
      ASSERT_EQ(s.node_ids, oracle::slice(n, edges, pt)) << "trial " << trial << " point " << pt;
      expect_induced(p, s);
    }
  }
}

TEST(SliceProperty, AddingAnEdgeNeverShrinksASlice) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(15));
    auto edges = random_edges(rng, n);
    const Pdg before = make_pdg(n, edges);
    edges.emplace_back(static_cast<int>(rng.below(n)), static_cast<int>(rng.below(n)));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    const Pdg after = make_pdg(n, edges);
    for (int pt = 0; pt < n; ++pt) {
      const auto a = slice(before, {pt, InterestCategory::Array}).node_ids;
      const auto b = slice(after, {pt, InterestCategory::Array}).node_ids;
      EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
  }
}

TEST(Behaviors, IdenticalSlicesCollapse) {
  // Both subscript statements sit on one dependence chain, so their slices coincide.
  const Cpg g = minic::parse_function("void f(int i){ int a[4]; a[i] = 1; a[i] = a[i] + 2; }");
  const Pdg p = pdg_view(g);
  EXPECT_EQ(find_interest_points(p, g, {}).size(), 2u);
  const auto b = behaviors_of(p, g, {});
  ASSERT_EQ(b.size(), 1u);
  expect_induced(p, b[0]);
}

TEST(Behaviors, NoInterestPointsNoBehaviors) {
  const Cpg g = minic::parse_function("void f(){ float x = 1.0; log_value(x); }");
  EXPECT_TRUE(behaviors_of(pdg_view(g), g, {}).empty());
}

TEST(Behaviors, ThreeDistinctSlices) {
  const Cpg g = minic::parse_function(
      "void f(int i, int j, char *d, char *s){ int a[4]; a[i] = 0; j = j * 2; strcpy(d, s); }");
  const Pdg p = pdg_view(g);
  const auto b = behaviors_of(p, g, ApiList{"strcpy"});
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].interest_point.category, InterestCategory::Array);
  EXPECT_EQ(b[1].interest_point.category, InterestCategory::Integer);
  EXPECT_EQ(b[2].interest_point.category, InterestCategory::SensitiveApi);
  for (const auto& s : b) expect_induced(p, s);
}
