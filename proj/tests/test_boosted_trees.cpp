#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "tfburst/boosted_trees.hpp"

using namespace tfburst;

namespace {

struct Dataset {
  DenseMatrix x;
  std::vector<int> y;
};

// Small integer-valued features so duplicate values and tied gains occur.
Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d, int levels) {
  Dataset ds{DenseMatrix(n, d), std::vector<int>(n)};
  std::uniform_int_distribution<int> v(0, levels - 1);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) {
      ds.x(i, j) = v(rng);
      s += (j + 1) * ds.x(i, j);
    }
    ds.y[i] = s + 2.0 * nd(rng) > 0.5 * levels * d ? 1 : 0;
  }
  return ds;
}

Dataset overlapping_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Dataset ds{DenseMatrix(n, 3), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    ds.y[i] = i % 3 == 0 ? 1 : 0;
    for (std::size_t j = 0; j < 3; ++j) ds.x(i, j) = nd(rng) + (ds.y[i] ? 0.6 : 0.0) * double(j + 1) / 3.0;
  }
  return ds;
}

struct Candidate {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0;
};

// Exhaustive search over (feature, midpoint threshold) pairs with the gain
// formula written out directly. Ties: lowest feature, then lowest threshold.
Candidate brute_force(const DenseMatrix& x, const std::vector<std::size_t>& rows, const std::vector<double>& g,
                      const std::vector<double>& h, double lambda, double gamma) {
  Candidate best;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::set<double> uniq;
    for (std::size_t i : rows) uniq.insert(x(i, f));
    std::vector<double> vals(uniq.begin(), uniq.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = vals[k] + (vals[k + 1] - vals[k]) / 2;
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (std::size_t i : rows) {
        if (x(i, f) < t) {
          gl += g[i];
          hl += h[i];
        } else {
          gr += g[i];
          hr += h[i];
        }
      }
      const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                                 (gl + gr) * (gl + gr) / (hl + hr + lambda)) -
                          gamma;
      if (gain > best.gain) best = {gain, int(f), t};
    }
  }
  return best;
}

double gain_of(const DenseMatrix& x, const std::vector<std::size_t>& rows, const std::vector<double>& g,
               const std::vector<double>& h, int f, double t, double lambda, double gamma) {
  double gl = 0, hl = 0, gr = 0, hr = 0;
  for (std::size_t i : rows) {
    if (x(i, std::size_t(f)) < t) {
      gl += g[i];
      hl += h[i];
    } else {
      gr += g[i];
      hr += h[i];
    }
  }
  return split_gain(gl, hl, gr, hr, lambda, gamma);
}

void first_round_gradients(const Dataset& ds, const BoostConfig& c, std::vector<double>& g, std::vector<double>& h) {
  const auto w = effective_weights(ds.y, {}, c);
  std::vector<double> m(ds.y.size(), logit(c.base_score));
  logistic_gradients(m, ds.y, w, g, h);
}

int g_checked_splits = 0;

// Walks a trained tree and checks every node against the oracle.
void check_node(const Tree& tree, int k, const Dataset& ds, const std::vector<std::size_t>& rows,
                const std::vector<double>& g, const std::vector<double>& h, const BoostConfig& c, int depth) {
  const TreeNode& node = tree.nodes[std::size_t(k)];
  const Candidate best = brute_force(ds.x, rows, g, h, c.lambda, c.gamma);
  const double tol = 1e-9 * std::max(1.0, std::abs(best.gain));
  if (node.is_leaf()) {
    if (depth < c.max_depth && rows.size() >= 2) EXPECT_LE(best.gain, tol);
    double G = 0, H = 0;
    for (std::size_t i : rows) {
      G += g[i];
      H += h[i];
    }
    EXPECT_NEAR(node.weight, -c.learning_rate * G / (H + c.lambda), 1e-12);
    return;
  }
  ++g_checked_splits;
  const double got = gain_of(ds.x, rows, g, h, node.feature, node.threshold, c.lambda, c.gamma);
  EXPECT_GT(got, 0.0);
  EXPECT_NEAR(got, best.gain, tol);
  // Exact agreement unless the oracle saw a numerically tied alternative.
  if (std::abs(got - best.gain) == 0.0 || best.feature == node.feature) {
    EXPECT_EQ(node.feature, best.feature);
    EXPECT_DOUBLE_EQ(node.threshold, best.threshold);
  }
  std::vector<std::size_t> l, r;
  for (std::size_t i : rows) (ds.x(i, std::size_t(node.feature)) < node.threshold ? l : r).push_back(i);
  check_node(tree, node.left, ds, l, g, h, c, depth + 1);
  check_node(tree, node.right, ds, r, g, h, c, depth + 1);
}

}  // namespace

TEST(Train, FourPointExample) {
  DenseMatrix x(4, 1);
  for (int i = 0; i < 4; ++i) x(std::size_t(i), 0) = i + 1;
  const std::vector<int> y{0, 0, 1, 1};
  BoostConfig c;
  c.gamma = 0;  // with gamma = 10 four points cannot pay for a split
  const TreeEnsemble m = train(x, y, {}, c);
  ASSERT_FALSE(m.trees[0].nodes[0].is_leaf());
  EXPECT_GT(m.trees[0].nodes[0].threshold, 2.0);
  EXPECT_LT(m.trees[0].nodes[0].threshold, 3.0);
  const auto p = predict_proba(m, x);
  EXPECT_GT(p[3], 0.5);
  EXPECT_LT(p[0], 0.5);
  EXPECT_GT(p[3], p[0]);

  const TreeEnsemble d = train(x, y, {}, BoostConfig{});
  EXPECT_EQ(d.split_count(), 0u);
}

TEST(Train, HugeGammaMeansNoSplits) {
  std::mt19937_64 rng(1);
  Dataset ds = random_dataset(rng, 40, 3, 6);
  for (std::size_t i = 0; i < 40; ++i) ds.y[i] = int(i % 2);  // balanced
  BoostConfig c;
  c.gamma = 1e12;
  c.positive_class_weight = 1;
  const TreeEnsemble m = train(ds.x, ds.y, {}, c);
  EXPECT_EQ(m.split_count(), 0u);
  for (double p : predict_proba(m, ds.x)) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(Train, FirstTreeMatchesBruteForce) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 4 + rng() % 29;
    const std::size_t d = 1 + rng() % 4;
    const Dataset ds = random_dataset(rng, n, d, 2 + int(rng() % 6));
    BoostConfig c;
    c.n_trees = 1;
    c.gamma = rep % 4 == 0 ? 10.0 : (rep % 4 == 1 ? 0.0 : 0.3);
    c.max_depth = 1 + int(rng() % 4);
    c.positive_class_weight = rep % 2 ? 2.0 : 1.0;
    const TreeEnsemble m = train(ds.x, ds.y, {}, c);
    std::vector<double> g, h;
    first_round_gradients(ds, c, g, h);
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    SCOPED_TRACE("dataset " + std::to_string(rep));
    check_node(m.trees[0], 0, ds, all, g, h, c, 0);
  }
  EXPECT_GT(g_checked_splits, 150);
}

TEST(Train, TieBreakLowestFeatureThenThreshold) {
  // Feature 1 duplicates feature 0: identical gains, feature 0 wins.
  DenseMatrix x(6, 2);
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  for (std::size_t i = 0; i < 6; ++i) x(i, 0) = x(i, 1) = double(i);
  BoostConfig c;
  c.gamma = 0;
  c.positive_class_weight = 1;
  c.n_trees = 1;
  c.max_depth = 1;
  TreeEnsemble m = train(x, y, {}, c);
  EXPECT_EQ(m.trees[0].nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(m.trees[0].nodes[0].threshold, 2.5);

  // Symmetric labels: thresholds 0.5 and 2.5 give equal gain; 0.5 wins.
  DenseMatrix z(4, 1);
  for (std::size_t i = 0; i < 4; ++i) z(i, 0) = double(i);
  m = train(z, std::vector<int>{1, 0, 0, 1}, {}, c);
  ASSERT_FALSE(m.trees[0].nodes[0].is_leaf());
  EXPECT_DOUBLE_EQ(m.trees[0].nodes[0].threshold, 0.5);
}

TEST(Train, LossNonIncreasing) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 12; ++rep) {
    const Dataset ds = random_dataset(rng, 200, 4, 10);
    BoostConfig c;
    c.n_trees = 30;
    c.gamma = rep % 2 ? 0.0 : 1.0;
    TrainLog log;
    train(ds.x, ds.y, {}, c, &log);
    ASSERT_EQ(log.loss.size(), 31u);
    for (std::size_t i = 1; i < log.loss.size(); ++i) EXPECT_LE(log.loss[i], log.loss[i - 1] + 1e-12);
    EXPECT_LT(log.loss.back(), log.loss.front());
  }
}

TEST(Train, GainGateAndDepthBound) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset ds = random_dataset(rng, 150, 3, 8);
    BoostConfig c;
    c.n_trees = 15;
    c.gamma = 0.5;
    c.max_depth = 2 + rep % 4;
    const TreeEnsemble m = train(ds.x, ds.y, {}, c);
    const auto w = effective_weights(ds.y, {}, c);
    std::vector<double> margin(ds.y.size(), logit(c.base_score)), g, h;
    for (const Tree& t : m.trees) {
      EXPECT_LE(t.depth(), c.max_depth);
      logistic_gradients(margin, ds.y, w, g, h);
      for (std::size_t k = 0; k < t.nodes.size(); ++k) {
        const TreeNode& node = t.nodes[k];
        if (node.is_leaf()) continue;
        // Rows reaching node k.
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < ds.y.size(); ++i) {
          std::size_t j = 0;
          while (j != k && !t.nodes[j].is_leaf()) {
            const TreeNode& p = t.nodes[j];
            j = std::size_t(ds.x(i, std::size_t(p.feature)) < p.threshold ? p.left : p.right);
          }
          if (j == k) rows.push_back(i);
        }
        EXPECT_GT(gain_of(ds.x, rows, g, h, node.feature, node.threshold, c.lambda, c.gamma), 0.0);
      }
      for (std::size_t i = 0; i < margin.size(); ++i) margin[i] += t.predict(ds.x.row(i));
    }
  }
}

TEST(Train, ClassWeightEqualsDuplication) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset ds = random_dataset(rng, 8 + rng() % 13, 2, 5);
    Dataset dup{DenseMatrix(), {}};
    for (std::size_t i = 0; i < ds.y.size(); ++i) {
      for (int k = 0; k < (ds.y[i] ? 2 : 1); ++k) {
        dup.x.push_row(ds.x.row(i));
        dup.y.push_back(ds.y[i]);
      }
    }
    BoostConfig c;
    c.gamma = 0.2;
    c.n_trees = 10;
    BoostConfig c1 = c;
    c1.positive_class_weight = 1;
    const TreeEnsemble a = train(ds.x, ds.y, {}, c);
    const TreeEnsemble b = train(dup.x, dup.y, {}, c1);
    ASSERT_EQ(a.trees.size(), b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
      ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size()) << rep << " tree " << t;
      for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
        const TreeNode &p = a.trees[t].nodes[k], &q = b.trees[t].nodes[k];
        EXPECT_EQ(p.feature, q.feature);
        EXPECT_EQ(p.threshold, q.threshold);
        EXPECT_NEAR(p.weight, q.weight, 1e-12);
      }
    }
  }
}

TEST(Train, ClassWeightRaisesSensitivity) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset ds = overlapping_dataset(600, seed);
    double prev = -1;
    for (double pcw : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      BoostConfig c;
      c.positive_class_weight = pcw;
      c.n_trees = 20;
      const auto p = predict_proba(train(ds.x, ds.y, {}, c), ds.x);
      int tp = 0, pos = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        pos += ds.y[i];
        tp += ds.y[i] && p[i] >= 0.5;
      }
      const double sens = double(tp) / pos;
      EXPECT_GE(sens, prev) << "seed " << seed << " weight " << pcw;
      prev = sens;
    }
  }
}

TEST(Train, PresortedSubsetGivesSameModel) {
  std::mt19937_64 rng(9);
  const Dataset ds = random_dataset(rng, 300, 5, 12);
  std::vector<std::uint8_t> keep(300);
  Dataset sub{DenseMatrix(), {}};
  for (std::size_t i = 0; i < 300; ++i) {
    keep[i] = i % 3 != 1;
    if (keep[i]) {
      sub.x.push_row(ds.x.row(i));
      sub.y.push_back(ds.y[i]);
    }
  }
  const detail::PresortedColumns all(ds.x);
  const detail::PresortedColumns part = all.subset(keep);
  BoostConfig c;
  c.gamma = 0.5;
  c.n_trees = 20;
  EXPECT_EQ(serialize(train(sub.x, sub.y, {}, c, nullptr, &part)), serialize(train(sub.x, sub.y, {}, c)));
  EXPECT_THROW(train(ds.x, ds.y, {}, c, nullptr, &part), Error);
}

TEST(Train, Rejections) {
  DenseMatrix x(3, 2);
  std::vector<int> y{0, 1, 0};
  x(1, 1) = std::nan("");
  try {
    train(x, y, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("NaN"), std::string::npos);
  }
  x(1, 1) = 0;
  EXPECT_THROW(train(x, std::vector<int>{0, 2, 1}, {}, {}), Error);
  EXPECT_THROW(train(x, std::vector<int>{0, 1}, {}, {}), Error);
  EXPECT_THROW(train(x, y, std::vector<double>{1, 0, 1}, {}), Error);
  DenseMatrix one(1, 2);
  EXPECT_THROW(train(one, std::vector<int>{1}, {}, {}), Error);
  BoostConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(train(x, y, {}, bad), Error);
}

TEST(Train, SingleClassIsBiasOnly) {
  std::mt19937_64 rng(3);
  Dataset ds = random_dataset(rng, 30, 2, 5);
  std::fill(ds.y.begin(), ds.y.end(), 1);
  TrainLog log;
  const TreeEnsemble m = train(ds.x, ds.y, {}, BoostConfig{}, &log);
  EXPECT_TRUE(log.bias_only);
  EXPECT_FALSE(log.warnings.empty());
  EXPECT_EQ(m.split_count(), 0u);
  const auto p = predict_proba(m, ds.x);
  for (double v : p) EXPECT_EQ(v, p[0]);
  EXPECT_GT(p[0], 0.5);
}

TEST(Predict, ClosedForms) {
  TreeEnsemble e;
  e.feature_count = 2;
  e.config.n_trees = 0;
  DenseMatrix x(3, 2);
  x(1, 0) = 5;
  for (double p : predict_proba(e, x)) EXPECT_EQ(p, 0.5);

  Tree leaf;
  leaf.nodes.push_back(TreeNode{-1, 0, -1, -1, 0.7});
  e.trees.push_back(leaf);
  for (double p : predict_proba(e, x)) EXPECT_DOUBLE_EQ(p, 1 / (1 + std::exp(-0.7)));

  DenseMatrix wrong(2, 3);
  EXPECT_THROW(predict_proba(e, wrong), Error);
}

TEST(Serialize, RoundTripIsBitExact) {
  std::mt19937_64 rng(10);
  const Dataset ds = random_dataset(rng, 500, 4, 50);
  BoostConfig c;
  c.gamma = 0.1;
  const TreeEnsemble m = train(ds.x, ds.y, {}, c);
  ASSERT_EQ(m.trees.size(), 100u);
  const std::string doc = serialize(m);
  const TreeEnsemble r = deserialize(doc);
  EXPECT_EQ(serialize(r), doc);
  std::uniform_real_distribution<double> u(-5, 55);
  DenseMatrix x(1000, 4);
  for (double& v : x.data) v = u(rng);
  const auto a = predict_proba(m, x), b = predict_proba(r, x);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Serialize, EmptyEnsemble) {
  TreeEnsemble e;
  e.feature_count = 3;
  e.config.n_trees = 0;
  e.config.base_score = 0.25;
  const TreeEnsemble r = deserialize(serialize(e));
  EXPECT_EQ(r.trees.size(), 0u);
  EXPECT_EQ(r.config.base_score, 0.25);
  DenseMatrix x(1, 3);
  EXPECT_DOUBLE_EQ(predict_proba(r, x)[0], 0.25);
}

TEST(Serialize, Rejections) {
  TreeEnsemble e;
  e.feature_count = 1;
  std::string doc = serialize(e);
  const auto pos = doc.find("\"version\": 1");
  ASSERT_NE(pos, std::string::npos);
  std::string v2 = doc;
  v2.replace(pos, 12, "\"version\": 2");
  try {
    deserialize(v2);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.category(), ErrorCategory::parse);
    EXPECT_NE(std::string(err.what()).find("version"), std::string::npos);
  }
  try {
    deserialize(doc.substr(0, doc.size() / 2));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.category(), ErrorCategory::parse);
    EXPECT_NE(std::string(err.what()).find("byte"), std::string::npos);
  }
  EXPECT_THROW(deserialize(R"({"format":"other","version":1})"), Error);
  EXPECT_THROW(deserialize(R"({"format":"tfburst-gbt","version":1,"feature_count":1,"config":{"n_trees":1,
    "learning_rate":0.3,"max_depth":6,"gamma":10,"lambda":1,"subsample":1,"positive_class_weight":2,
    "base_score":0.5,"seed":0},"trees":[{"nodes":[{"feature":3,"threshold":1,"left":1,"right":2},
    {"leaf":0},{"leaf":0}]}]})"),
               Error);
}
