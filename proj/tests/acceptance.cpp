// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ifmavd/detector.hpp"
#include "ifmavd/ggnn.hpp"
#include "ifmavd/hypergraph.hpp"
#include "ifmavd/metrics.hpp"
#include "ifmavd/minic.hpp"
#include "ifmavd/pipeline.hpp"
#include "ifmavd/report.hpp"
#include "ifmavd/slicer.hpp"
#include "ifmavd/synthetic.hpp"
#include "oracles.hpp"

using namespace ifmavd;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

Outcome hypergraph_fixture() {
  const auto t0 = Clock::now();
  const Hypergraph hg = incidence({{0, {"f1", "f2"}}, {1, {"f2", "f3"}}}, {"f1", "f2", "f3"});
  const DegreeDiags d = degrees(hg);
  const bool degrees_exact = d.edge == Vector::Constant(2, 2.0) && d.vertex(0) == 1.0 && d.vertex(1) == 2.0 && d.vertex(2) == 1.0;
  // theta = Dv^-1/2 H De^-1 H^T Dv^-1/2 by hand: 1/2 on the diagonal, 1/(2 sqrt 2) between edge neighbours.
  const double q = 1.0 / (2.0 * std::sqrt(2.0));
  Matrix want(3, 3);
  want << 0.5, q, 0.0, q, 0.5, q, 0.0, q, 0.5;
  const double err = (Matrix(normalized_operator(hg).theta) - want).cwiseAbs().maxCoeff();
  const double s = seconds_since(t0);
  return {degrees_exact && err <= 1e-12 && s < 1.0,
          std::string("degrees ") + (degrees_exact ? "exact" : "WRONG") + fmt(", max |theta - hand| = %.2e, %.4fs", err, s)};
}

Outcome psd_property() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = std::numeric_limits<double>::infinity();
  int count = 0;
  for (; count < 150; ++count) {
    const int n = 1 + static_cast<int>(rng.below(50));
    const int k = static_cast<int>(rng.below(21));
    const Hypergraph hg = oracle::random_hypergraph(rng, n, k, rng.uniform(0.05, 0.5));
    worst = std::min(worst, spectral_oracle(Matrix(normalized_operator(hg).delta)).eigenvalues.minCoeff());
  }
  const double s = seconds_since(t0);
  return {worst >= -1e-8 && s < 10.0, fmt("%.0f hypergraphs, min eigenvalue %.3e, %.2fs", count, worst, s)};
}

Outcome conv_oracle() {
  Rng rng(202);
  double worst = 0;
  int count = 0;
  for (; count < 80; ++count) {
    const int n = 1 + static_cast<int>(rng.below(30));
    const Hypergraph hg = oracle::random_hypergraph(rng, n, static_cast<int>(rng.below(12)), 0.3);
    const Eigen::Index c1 = 1 + static_cast<Eigen::Index>(rng.below(6)), c2 = 1 + static_cast<Eigen::Index>(rng.below(6));
    const Matrix x = oracle::random_matrix(rng, n, c1), beta = oracle::random_matrix(rng, c1, c2);
    const Matrix theta = oracle::dense_theta(Matrix(hg.incidence), hg.weights);
    for (bool act : {true, false}) {
      const Matrix got = hyperedge_conv(x, hg.incidence, hg.weights, beta, act);
      worst = std::max(worst, (got - oracle::dense_conv(theta, x, beta, act)).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-12, fmt("%.0f instances, max abs error %.2e", count, worst)};
}

Outcome gradients() {
  Rng rng(303);
  // GGNN cell, projection and intra head together.
  const int d = 4;
  auto adj = [](const std::vector<std::pair<int, int>>& e, int n) {
    std::vector<NodeId> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<CpgEdge> es;
    for (auto [a, b] : e) es.push_back({a, b, EdgeKind::CFG});
    return detail::adjacency_from(ids, es);
  };
  std::vector<GraphInput> graphs;
  graphs.push_back({oracle::random_matrix(rng, 5, d), adj({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {0, 2}}, 5)});
  graphs.push_back({oracle::random_matrix(rng, 3, d), adj({{0, 2}}, 3)});
  graphs.push_back({oracle::random_matrix(rng, 1, d), adj({}, 1)});
  const std::vector<int> labels{1, 0, 1};
  const std::vector<std::size_t> batch{0, 1, 2};
  GgnnParams p = GgnnParams::init(d, 3, rng);
  for (Vector* v : {&p.bz, &p.br, &p.bh, &p.proj_bias})
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = rng.uniform(-0.5, 0.5);
  LogisticHead head{oracle::random_matrix(rng, d, 1).col(0), 0.3};
  GgnnParams g;
  LogisticHead hg;
  intra_loss(graphs, labels, batch, p, head, 0.01, &g, &hg);
  auto ps = p.spans(), gs = g.spans();
  const auto hps = head.spans(), hgs = hg.spans();
  ps.insert(ps.end(), hps.begin(), hps.end());
  gs.insert(gs.end(), hgs.begin(), hgs.end());
  const double ggnn_err = oracle::max_gradient_error(ps, gs, [&] { return intra_loss(graphs, labels, batch, p, head, 0.01); });

  // Hypergraph detector: beta layers and head.
  double hgnn_err = 0;
  for (int layers : {1, 2, 3}) {
    const Hypergraph h = oracle::random_hypergraph(rng, 10, 4, 0.3);
    const ThetaOperator th(h);
    const Matrix x = oracle::random_matrix(rng, 10, 3, 2.0);
    HgnnParams hp = HgnnParams::init(3, layers, rng);
    hp.b = 0.2;
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) y.push_back(rng.bernoulli(0.5));
    const std::vector<std::size_t> mask{0, 2, 3, 5, 8, 9};
    HgnnParams hgrad;
    loss_and_gradient(x, th, y, mask, hp, 0.01, &hgrad);
    hgnn_err = std::max(hgnn_err, oracle::max_gradient_error(hp.spans(), hgrad.spans(),
                                                             [&] { return loss_and_gradient(x, th, y, mask, hp, 0.01); }));
  }

  // Logistic baseline head.
  const Matrix x = oracle::random_matrix(rng, 12, 5);
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) y.push_back(i % 2);
  LogisticHead lh{oracle::random_matrix(rng, 5, 1).col(0), -0.3};
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 9, 11};
  LogisticHead lg;
  logistic_loss(x, y, idx, lh, 0.02, &lg);
  const double log_err = oracle::max_gradient_error(lh.spans(), lg.spans(), [&] { return logistic_loss(x, y, idx, lh, 0.02); });

  const double worst = std::max({ggnn_err, hgnn_err, log_err});
  return {worst <= 1e-4, fmt("max relative error: ggnn+projection %.1e, hgnn %.1e, logistic %.1e", ggnn_err, hgnn_err, log_err)};
}

Outcome slicing_oracle() {
  Rng rng(404);
  int graphs = 0, points = 0;
  for (; graphs < 250; ++graphs) {
    const int n = 1 + static_cast<int>(rng.below(20));
    const auto edges = oracle::random_edges(rng, n);
    const Pdg p = oracle::make_pdg(n, edges);
    for (int pt = 0; pt < n; ++pt, ++points) {
      if (slice(p, {pt, InterestCategory::Integer}).node_ids != oracle::slice(n, edges, pt))
        return {false, "mismatch on graph " + std::to_string(graphs) + " point " + std::to_string(pt)};
    }
  }
  return {true, std::to_string(graphs) + " digraphs, " + std::to_string(points) + " slices, all sets equal"};
}

Outcome permutation() {
  Rng rng(505);
  // Encoder: relabel node ids with a random bijection and shuffle node and edge order.
  const std::vector<std::string> sources = {
      "int f(int n, char *s){ int a[8]; int i = 0; while (i < n) { a[i] = s[i] * 2; i++; } if (n > 3) { n = a[1]; } return n; }",
      "void g(char *src, int len){ char buf[64]; if (len < 64) { memcpy(buf, src, len); } else { len = 0; } }",
  };
  std::vector<Cpg> cpgs;
  for (const auto& s : sources) cpgs.push_back(minic::parse_function(s));
  SkipgramConfig sc;
  sc.dim = 6;
  sc.epochs = 1;
  const auto emb = train_skipgram(build_corpus(cpgs), sc);
  GgnnParams p = GgnnParams::init(6, 3, rng);
  int encode_trials = 0;
  for (const auto& g : cpgs) {
    const Vector base = encode_function(g, emb.vocab, emb.table, p);
    for (int t = 0; t < 25; ++t, ++encode_trials) {
      std::vector<NodeId> fresh(g.nodes.size());
      std::iota(fresh.begin(), fresh.end(), NodeId{1000});
      rng.shuffle(fresh);
      std::map<NodeId, NodeId> relabel;
      Cpg q = g;
      for (std::size_t i = 0; i < q.nodes.size(); ++i) relabel[q.nodes[i].node_id] = fresh[i];
      for (auto& n : q.nodes) n.node_id = relabel.at(n.node_id);
      for (auto& e : q.edges) e = {relabel.at(e.src), relabel.at(e.dst), e.kind};
      rng.shuffle(q.nodes);
      rng.shuffle(q.edges);
      if (!(encode_function(q, emb.vocab, emb.table, p) == base))
        return {false, "encode_function changed under relabeling, trial " + std::to_string(encode_trials)};
    }
  }
  // Detector: permute functions jointly in features and hyperedge membership.
  int forward_trials = 0;
  for (; forward_trials < 30; ++forward_trials) {
    const int n = 4 + static_cast<int>(rng.below(30));
    const Hypergraph hg = oracle::random_hypergraph(rng, n, 6, 0.25);
    const Matrix x = oracle::random_matrix(rng, n, 5);
    const HgnnParams hp = HgnnParams::init(5, 2, rng);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const Matrix h(hg.incidence);
    std::vector<std::string> names(static_cast<std::size_t>(n));
    Matrix px(n, 5);
    for (int i = 0; i < n; ++i) {
      names[i] = hg.function_ids[perm[i]];
      px.row(i) = x.row(perm[i]);
    }
    HyperedgeSet edges;
    for (Eigen::Index e = 0; e < h.cols(); ++e) {
      if (hg.edge_clusters[e] == kSingletonEdge) continue;
      Hyperedge he{hg.edge_clusters[e], {}};
      for (int i = 0; i < n; ++i)
        if (h(i, e) != 0) he.members.push_back(hg.function_ids[i]);
      edges.push_back(he);
    }
    const Vector base = forward(x, hg, hp);
    const Vector moved = forward(px, incidence(edges, names), hp);
    for (int i = 0; i < n; ++i)
      if (moved(i) != base(perm[i])) return {false, "forward not equivariant, trial " + std::to_string(forward_trials)};
  }
  return {true, std::to_string(encode_trials) + " relabelings bit-identical, " + std::to_string(forward_trials) +
                    " joint permutations bit-identical"};
}

Outcome metrics_suite() {
  int cases = 0;
  for (std::size_t tp = 0; tp <= 5; ++tp)
    for (std::size_t fp = 0; fp <= 5; ++fp)
      for (std::size_t fn = 0; fn <= 5; ++fn)
        for (std::size_t tn = 0; tn <= 3; ++tn, ++cases) {
          std::vector<int> y, pr;
          auto push = [&](std::size_t count, int yy, int pp) {
            for (std::size_t k = 0; k < count; ++k) {
              y.push_back(yy);
              pr.push_back(pp);
            }
          };
          push(tp, 1, 1);
          push(fp, 0, 1);
          push(fn, 1, 0);
          push(tn, 0, 0);
          const Metrics m = evaluate(pr, y);
          const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
          const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
          const double f = 2 * tp + fp + fn ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0;
          if (m.tp != tp || m.fp != fp || m.fn != fn || m.tn != tn || m.total() != y.size() || m.recall != r ||
              m.precision != p || m.f_measure != f)
            return {false, fmt("mismatch at TP=%.0f FP=%.0f FN=%.0f", double(tp), double(fp), double(fn))};
        }
  return {true, std::to_string(cases) + " confusion matrices exact, zero denominators included"};
}

// The benchmark and the reproducibility check share the first run.
struct Benchmark {
  PipelineResult first;
  double seconds = 0;
};

PipelineConfig benchmark_config() {
  PipelineConfig c;
  c.clusters = 16;
  c.dim = 32;
  c.steps = 2;
  c.layers = 2;
  c.train.epochs = 100;
  c.seed = 1;
  return c;
}

const Benchmark& benchmark() {
  static const Benchmark b = [] {
    SyntheticConfig s;  // 400 functions, generator seed 7
    const auto corpus = generate_planted(s);
    const auto t0 = Clock::now();
    Benchmark out{run_pipeline(corpus.manifest, benchmark_config()), 0};
    out.seconds = seconds_since(t0);
    return out;
  }();
  return b;
}

Outcome planted_benchmark() {
  const auto& b = benchmark();
  const double f = b.first.report.detector.test.f_measure, base = b.first.report.baseline.test.f_measure;
  const bool ok = f >= 0.85 && f - base >= 0.05 && b.seconds < 300;
  return {ok, fmt("test F %.4f, baseline %.4f, margin %+.1f points", f, base, 100 * (f - base)) +
                  fmt(", %.1fs", b.seconds)};
}

Outcome reproducibility() {
  const auto& b = benchmark();
  SyntheticConfig s;
  const PipelineResult again = run_pipeline(generate_planted(s).manifest, benchmark_config());
  const std::string a = report_text(b.first.report), c = report_text(again.report);
  return {a == c, std::string(a == c ? "identical" : "DIFFERENT") + " report bytes (" + std::to_string(a.size()) +
                      " bytes, bundle sha256 " + again.report.bundle_sha256.substr(0, 12) + ")"};
}

}  // namespace

int main() {
  report("hypergraph algebra fixture", hypergraph_fixture);
  report("laplacian psd", psd_property);
  report("convolution oracle", conv_oracle);
  report("gradient checks", gradients);
  report("slicing oracle", slicing_oracle);
  report("permutation properties", permutation);
  report("metrics suite", metrics_suite);
  report("planted benchmark", planted_benchmark);
  report("reproducibility", reproducibility);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
