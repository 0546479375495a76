#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ifmavd/detector.hpp"
#include "oracles.hpp"

using namespace ifmavd;
using oracle::dense_forward;
using oracle::random_matrix;

namespace {

std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("f" + std::to_string(i));
  return out;
}

Hypergraph random_hypergraph(Rng& rng, int n, int k) {
  const auto names = ids(n);
  HyperedgeSet edges;
  for (int e = 0; e < k; ++e) {
    Hyperedge h{e, {}};
    for (int i = 0; i < n; ++i)
      if (rng.bernoulli(0.25)) h.members.push_back(names[i]);
    if (!h.members.empty()) edges.push_back(h);
  }
  return incidence(edges, names);
}

HgnnParams random_params(int d, int layers, std::uint64_t seed) {
  Rng rng(seed);
  HgnnParams p = HgnnParams::init(d, layers, rng);
  p.b = 0.2;
  return p;
}

// Half the functions are vulnerable and share hyperedges only with each other.
struct Planted {
  Matrix x;
  Hypergraph hg;
  std::vector<int> labels;
};

Planted planted_blocks(int n, int d, int edges_per_block, std::uint64_t seed) {
  Rng rng(seed);
  Planted p;
  const auto names = ids(n);
  for (int i = 0; i < n; ++i) p.labels.push_back(i % 2);
  HyperedgeSet edges;
  for (int block = 0; block < 2; ++block)
    for (int e = 0; e < edges_per_block; ++e) {
      Hyperedge h{block * edges_per_block + e, {}};
      for (int i = block; i < n; i += 2)
        if (rng.bernoulli(0.3)) h.members.push_back(names[i]);
      if (!h.members.empty()) edges.push_back(h);
    }
  p.hg = incidence(edges, names);
  p.x = random_matrix(rng, n, d);
  return p;
}

}  // namespace

TEST(Metrics, WorkedExample) {
  const std::vector<int> y{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<int> p{1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
  const Metrics m = evaluate(p, y);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 6u);
  EXPECT_EQ(m.recall, 2.0 / 3.0);
  EXPECT_EQ(m.f_measure, 4.0 / 6.0);
}

TEST(Metrics, PerfectAndEmptyPositives) {
  const Metrics perfect = evaluate({1, 0, 1}, {1, 0, 1});
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f_measure, 1.0);
  const Metrics none = evaluate({0, 0, 0}, {0, 0, 0});
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f_measure, 0.0);
  EXPECT_EQ(none.precision, 0.0);
  const Metrics empty = evaluate({}, {});
  EXPECT_EQ(empty.total(), 0u);
  EXPECT_EQ(empty.f_measure, 0.0);
  EXPECT_THROW(evaluate({1}, {1, 0}), LengthMismatch);
}

TEST(Metrics, EnumeratedConfusionMatrices) {
  for (std::size_t tp = 0; tp <= 4; ++tp)
    for (std::size_t fp = 0; fp <= 4; ++fp)
      for (std::size_t fn = 0; fn <= 4; ++fn)
        for (std::size_t tn = 0; tn <= 2; ++tn) {
          std::vector<int> y, p;
          auto push = [&](std::size_t count, int yy, int pp) {
            for (std::size_t k = 0; k < count; ++k) {
              y.push_back(yy);
              p.push_back(pp);
            }
          };
          push(tp, 1, 1);
          push(fp, 0, 1);
          push(fn, 1, 0);
          push(tn, 0, 0);
          const Metrics m = evaluate(p, y);
          ASSERT_EQ(m.tp, tp);
          ASSERT_EQ(m.fp, fp);
          ASSERT_EQ(m.fn, fn);
          ASSERT_EQ(m.tn, tn);
          ASSERT_EQ(m.total(), y.size());
          const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
          const double f = 2 * tp + fp + fn ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0;
          ASSERT_EQ(m.recall, r);
          ASSERT_EQ(m.f_measure, f);
        }
}

TEST(Metrics, RaisingThresholdNeverAddsPositives) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vector prob(30);
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
      prob(i) = rng.uniform();
      y.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    std::vector<std::size_t> all(30);
    std::iota(all.begin(), all.end(), 0);
    Metrics prev = evaluate_rows(prob, y, all, 0.0);
    for (double t = 0.05; t <= 1.0001; t += 0.05) {
      const Metrics m = evaluate_rows(prob, y, all, t);
      EXPECT_LE(m.tp, prev.tp);
      EXPECT_LE(m.fp, prev.fp);
      prev = m;
    }
  }
}

TEST(Forward, IdentityHypergraphIsPerFunctionMap) {
  Rng rng(4);
  const Hypergraph hg = incidence({}, ids(5));
  const Matrix x = random_matrix(rng, 5, 3);
  const HgnnParams p = random_params(3, 2, 5);
  const Vector prob = forward(x, hg, p);
  for (int i = 0; i < 5; ++i) {
    const Vector h1 = (x.row(i) * p.beta[0]).cwiseMax(0.0).transpose();
    const Vector h2 = (h1.transpose() * p.beta[1]).transpose();
    EXPECT_NEAR(prob(i), sigmoid(h2.dot(p.w) + p.b), 1e-14);
  }
}

TEST(Forward, ZeroFeaturesGiveBiasProbability) {
  Rng rng(6);
  const Hypergraph hg = random_hypergraph(rng, 8, 3);
  HgnnParams p = random_params(4, 2, 7);
  p.b = -0.7;
  const Vector prob = forward(Matrix::Zero(8, 4), hg, p);
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_EQ(prob(i), sigmoid(-0.7));
}

TEST(Forward, MatchesDenseOracle) {
  Rng rng(8);
  const Hypergraph fixture = incidence({{0, {"f0", "f1"}}, {1, {"f1", "f2"}}}, ids(3));
  for (int trial = 0; trial < 20; ++trial) {
    const Hypergraph hg = trial == 0 ? fixture : random_hypergraph(rng, 3 + static_cast<int>(rng.below(12)), 4);
    const Matrix x = random_matrix(rng, hg.vertex_count(), 4);
    const HgnnParams p = random_params(4, 1 + static_cast<int>(rng.below(3)), 100 + trial);
    const Vector got = forward(x, hg, p);
    const Vector want = dense_forward(Matrix(hg.incidence), hg.weights, x, p);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
  }
}

TEST(Forward, JointPermutationIsExact) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(20));
    const Hypergraph hg = random_hypergraph(rng, n, 5);
    const Matrix x = random_matrix(rng, n, 6);
    const HgnnParams p = random_params(6, 2, 200 + trial);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const Matrix h(hg.incidence);
    std::vector<std::string> names(n);
    Matrix px(n, 6);
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
    const Vector base = forward(x, hg, p);
    const Vector moved = forward(px, incidence(edges, names), p);
    for (int i = 0; i < n; ++i) EXPECT_EQ(moved(i), base(perm[i])) << "trial " << trial;
  }
}

TEST(Forward, ShapeMismatch) {
  Rng rng(10);
  const Hypergraph hg = random_hypergraph(rng, 5, 2);
  const HgnnParams p = random_params(3, 2, 1);
  EXPECT_THROW(forward(Matrix::Zero(4, 3), hg, p), ShapeMismatch);
  EXPECT_THROW(forward(Matrix::Zero(5, 2), hg, p), ShapeMismatch);
}

TEST(Loss, ExactLabelsLeaveWeightDecay) {
  const HgnnParams p = random_params(3, 2, 11);
  Vector prob(4);
  prob << 1, 0, 1, 0;
  const std::vector<int> y{1, 0, 1, 0};
  const double wd = 5e-4;
  EXPECT_NEAR(loss(prob, y, {0, 1, 2, 3}, p, wd), wd * p.squared_norm(), 1e-11);
  EXPECT_NEAR(loss(Vector::Constant(4, 0.5), y, {0, 2, 3}, p, 0.0), std::log(2.0), 1e-15);
  EXPECT_THROW(loss(prob, y, {}, p, wd), EmptyMask);
}

TEST(Loss, LogitFormAgreesWithProbabilityForm) {
  Rng rng(12);
  const Hypergraph hg = random_hypergraph(rng, 10, 3);
  const Matrix x = random_matrix(rng, 10, 4);
  const HgnnParams p = random_params(4, 2, 13);
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) y.push_back(i % 3 == 0);
  const std::vector<std::size_t> mask{0, 1, 2, 5, 7};
  const ThetaOperator th(hg);
  EXPECT_NEAR(loss_and_gradient(x, th, y, mask, p, 1e-3), loss(forward(x, th, p), y, mask, p, 1e-3), 1e-12);
}

TEST(Gradient, FiniteDifferencesForEveryParameter) {
  Rng rng(14);
  for (int layers : {1, 2, 3}) {
    const Hypergraph hg = random_hypergraph(rng, 9, 4);
    const ThetaOperator th(hg);
    const Matrix x = random_matrix(rng, 9, 3, 2.0);
    HgnnParams p = random_params(3, layers, 15 + layers);
    std::vector<int> y;
    for (int i = 0; i < 9; ++i) y.push_back(rng.bernoulli(0.5));
    const std::vector<std::size_t> mask{0, 2, 3, 5, 8};
    const double wd = 0.01;
    HgnnParams g;
    loss_and_gradient(x, th, y, mask, p, wd, &g);
    auto ps = p.spans();
    auto gs = g.spans();
    const double h = 1e-5;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      double diff = 0, norm = 0;
      for (std::size_t i = 0; i < ps[k].size(); ++i) {
        const double keep = ps[k][i];
        ps[k][i] = keep + h;
        const double up = loss_and_gradient(x, th, y, mask, p, wd);
        ps[k][i] = keep - h;
        const double down = loss_and_gradient(x, th, y, mask, p, wd);
        ps[k][i] = keep;
        const double num = (up - down) / (2 * h);
        diff += (num - gs[k][i]) * (num - gs[k][i]);
        norm += num * num + gs[k][i] * gs[k][i];
      }
      EXPECT_LE(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12), 1e-4) << "layers " << layers << " tensor " << k;
    }
  }
}

TEST(Gradient, LogisticBaselineHead) {
  Rng rng(16);
  const Matrix x = random_matrix(rng, 12, 5);
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) y.push_back(i % 2);
  LogisticHead head{random_matrix(rng, 5, 1).col(0), -0.3};
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 9, 11};
  LogisticHead g;
  logistic_loss(x, y, idx, head, 0.02, &g);
  auto ps = head.spans();
  auto gs = g.spans();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    double diff = 0, norm = 0;
    for (std::size_t i = 0; i < ps[k].size(); ++i) {
      const double keep = ps[k][i];
      ps[k][i] = keep + 1e-5;
      const double up = logistic_loss(x, y, idx, head, 0.02);
      ps[k][i] = keep - 1e-5;
      const double down = logistic_loss(x, y, idx, head, 0.02);
      ps[k][i] = keep;
      const double num = (up - down) / 2e-5;
      diff += (num - gs[k][i]) * (num - gs[k][i]);
      norm += num * num + gs[k][i] * gs[k][i];
    }
    EXPECT_LE(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12), 1e-4);
  }
}

TEST(Train, PlantedBlocksAreSeparated) {
  const Planted pl = planted_blocks(200, 8, 6, 21);
  const SplitMask split = split_indices(200, {}, 22);
  TrainConfig cfg;
  cfg.seed = 23;
  const ThetaOperator th(pl.hg);
  const HgnnModel m = train_detector(pl.x, th, pl.labels, split, cfg);
  for (double l : m.train_loss) EXPECT_TRUE(std::isfinite(l));
  EXPECT_GE(m.best_val_f, m.initial_val_f);
  const Metrics test = evaluate_rows(forward(pl.x, th, m.params), pl.labels, indices_of(split, Split::Test));
  EXPECT_GE(test.f_measure, 0.95);
}

TEST(Train, ZeroEpochsAndDeterminism) {
  const Planted pl = planted_blocks(40, 4, 3, 31);
  const SplitMask split = split_indices(40, {}, 32);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 33;
  const HgnnModel zero = train_detector(pl.x, pl.hg, pl.labels, split, cfg);
  Rng rng(33);
  EXPECT_TRUE(zero.params == HgnnParams::init(4, 2, rng));
  cfg.epochs = 30;
  const HgnnModel a = train_detector(pl.x, pl.hg, pl.labels, split, cfg);
  const HgnnModel b = train_detector(pl.x, pl.hg, pl.labels, split, cfg);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.train_loss, b.train_loss);
}

TEST(Train, SingleClassIsRejected) {
  Planted pl = planted_blocks(20, 3, 2, 41);
  std::fill(pl.labels.begin(), pl.labels.end(), 0);
  EXPECT_THROW(train_detector(pl.x, pl.hg, pl.labels, split_indices(20, {}, 1), TrainConfig{}), DegenerateLabels);
}

TEST(Baseline, LogisticLearnsSeparableRows) {
  Rng rng(51);
  Matrix x = random_matrix(rng, 100, 3, 0.3);
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    y.push_back(i % 2);
    x(i, 0) += y.back() ? 1.0 : -1.0;
  }
  const SplitMask split = split_indices(100, {}, 52);
  const LogisticModel m = train_logistic(x, y, split, TrainConfig{});
  const Vector prob = logistic_probabilities(x, m.head);
  EXPECT_GE(evaluate_rows(prob, y, indices_of(split, Split::Test)).f_measure, 0.95);
}
