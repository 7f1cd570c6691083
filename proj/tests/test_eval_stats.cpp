#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "tfburst/cross_validation.hpp"

using namespace tfburst;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      den += 1;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / den;
}

// Exact one-sided p by enumerating which pooled ranks belong to a.
double enumerated_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  auto rank = [&](double v) { return double(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin() + 1); };
  double ra = 0;
  for (double v : a) ra += rank(v);
  const std::size_t n = pooled.size(), na = a.size();
  double hits = 0, total = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::size_t(__builtin_popcount(mask)) != na) continue;
    double r = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) r += double(i + 1);
    total += 1;
    hits += r >= ra - 1e-9;
  }
  return hits / total;
}

RecordSlices make_record(const std::string& id, std::size_t n, std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  RecordSlices r;
  r.record_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureSlice s;
    s.record_id = id;
    s.slice_time = 0.25 * double(i) + 0.125;
    const bool burst = i % 3 != 0;
    s.label = i % 11 == 5 ? SliceLabel::excluded : (burst ? SliceLabel::burst : SliceLabel::inter_burst);
    for (int k = 0; k < 4; ++k) s.features.push_back(nd(rng) + (burst ? shift * (k == 1 ? 1.5 : 0.5) : 0.0));
    r.slices.push_back(std::move(s));
  }
  return r;
}

BoostConfig small_config() {
  BoostConfig c;
  c.n_trees = 20;
  c.gamma = 0.5;
  return c;
}

}  // namespace

TEST(RocAuc, Examples) {
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>(6, 0.3), std::vector<int>{0, 1, 0, 1, 1, 0}), 0.5);
  try {
    roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::data);
  }
}

TEST(RocAuc, MatchesPairwiseOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 20);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = int(rng() % 2);
      s[i] = double(level(rng) + 2 * y[i]);  // integer scores keep ties exact
    }
    y[0] = 0;
    y[1] = 1;
    const double auc = roc_auc(s, y);
    EXPECT_NEAR(auc, pairwise_auc(s, y), 1e-12);

    std::vector<double> t(n), neg(n);
    std::vector<int> flip(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::exp(0.1 * s[i]) - 7;  // strictly increasing
      neg[i] = -s[i];
      flip[i] = 1 - y[i];
    }
    EXPECT_NEAR(roc_auc(t, y), auc, 1e-12);
    EXPECT_NEAR(roc_auc(neg, y), 1 - auc, 1e-12);
    EXPECT_NEAR(roc_auc(s, flip), 1 - auc, 1e-12);

    // Trapezoidal area under the curve vertices equals the statistic.
    const auto pts = roc_curve(s, y);
    double area = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2;
    EXPECT_NEAR(area, auc, 1e-12);
    EXPECT_DOUBLE_EQ(pts.back().fpr, 1.0);
    EXPECT_DOUBLE_EQ(pts.back().tpr, 1.0);
  }
}

TEST(SensSpec, Examples) {
  const std::vector<int> y{1, 1, 0, 0};
  SensSpec r = sens_spec_at(std::vector<double>{0.6, 0.4, 0.7, 0.3}, y, 0.5);
  EXPECT_DOUBLE_EQ(*r.sensitivity, 0.5);
  EXPECT_DOUBLE_EQ(*r.specificity, 0.5);
  r = sens_spec_at(std::vector<double>{0.9, 0.8, 0.1, 0.2}, y, 0.5);
  EXPECT_DOUBLE_EQ(*r.sensitivity, 1.0);
  EXPECT_DOUBLE_EQ(*r.specificity, 1.0);
  r = sens_spec_at(std::vector<double>{0.1, 0.2, 0.9, 0.8}, y, 0.5);
  EXPECT_DOUBLE_EQ(*r.sensitivity, 0.0);
  EXPECT_DOUBLE_EQ(*r.specificity, 0.0);
  // Exactly at the threshold predicts burst.
  r = sens_spec_at(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 1}, 0.5);
  EXPECT_DOUBLE_EQ(*r.sensitivity, 1.0);
  EXPECT_FALSE(r.specificity.has_value());
}

TEST(Jackknife, ConstantInput) {
  const auto ci = jackknife_ci(std::vector<double>(7, 0.8));
  EXPECT_EQ(ci.low, 0.8);
  EXPECT_EQ(ci.estimate, 0.8);
  EXPECT_EQ(ci.high, 0.8);
  EXPECT_THROW(jackknife_ci(std::vector<double>{1, 2}), Error);
}

TEST(Jackknife, HandComputedBinary) {
  // Twenty values, ten 0s and ten 1s. Median 0.5; dropping a 0 gives a
  // leave-one-out median of 1 (pseudo-value 10 - 19 = -9), dropping a 1
  // gives 0 (pseudo-value 10). SE = sqrt(20 * 9.5^2 / (19 * 20)) = 9.5 / sqrt(19).
  std::vector<double> v;
  for (int i = 0; i < 10; ++i) {
    v.push_back(0);
    v.push_back(1);
  }
  const auto ci = jackknife_ci(v);
  const double se = 9.5 / std::sqrt(19.0);
  EXPECT_NEAR(ci.standard_error, se, 1e-12);
  EXPECT_DOUBLE_EQ(ci.estimate, 0.5);
  EXPECT_NEAR(ci.estimate - ci.low, ci.high - ci.estimate, 1e-12);
  EXPECT_NEAR(ci.high - ci.estimate, 1.959963984540054 * se, 1e-9);
}

TEST(Jackknife, OutlierWidensInterval) {
  const std::vector<double> clean{0.90, 0.91, 0.93, 0.94, 0.95, 0.97};
  std::vector<double> dirty = clean;
  dirty.push_back(0.2);
  const auto a = jackknife_ci(clean), b = jackknife_ci(dirty);
  EXPECT_LT(a.high - a.low, b.high - b.low);
}

TEST(Jackknife, WidthScalesAsInverseRootN) {
  // Mean SE * sqrt(n) over repeated normal samples is flat in n to within 20%.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::vector<double> scaled;
  for (std::size_t n : {8u, 32u, 128u}) {
    double s = 0;
    for (int rep = 0; rep < 400; ++rep) {
      std::vector<double> v(n);
      for (double& x : v) x = nd(rng);
      s += jackknife_ci(v).standard_error;
    }
    scaled.push_back(s / 400 * std::sqrt(double(n)));
  }
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  EXPECT_LT(*hi / *lo, 1.2);
}

TEST(MannWhitney, Examples) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  auto r = mann_whitney_one_sided(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  r = mann_whitney_one_sided(b, a);
  EXPECT_DOUBLE_EQ(r.p_value, 0.05);
  EXPECT_DOUBLE_EQ(r.u, 9.0);
  EXPECT_GE(mann_whitney_one_sided(a, a).p_value, 0.5);
  EXPECT_THROW(mann_whitney_one_sided(std::vector<double>{}, a), Error);
}

TEST(MannWhitney, ExactMatchesEnumeration) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t na = 1 + rng() % 6, nb = 1 + rng() % 6;
    std::vector<double> a(na), b(nb);
    for (double& v : a) v = nd(rng) + 0.5;
    for (double& v : b) v = nd(rng);
    const auto r = mann_whitney_one_sided(a, b);
    ASSERT_TRUE(r.exact);
    EXPECT_NEAR(r.p_value, enumerated_p(a, b), 1e-12);
  }
}

TEST(MannWhitney, NormalApproximationCloseToExact) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(6), b(6);
    for (double& v : a) v = nd(rng) + 0.7;
    for (double& v : b) v = nd(rng);
    const double exact = mann_whitney_one_sided(a, b).p_value;
    // Same statistic through the large-sample formula.
    double u = 0;
    for (double x : a)
      for (double y : b) u += x > y;
    const double var = 36.0 * 13.0 / 12.0;
    const double approx = 0.5 * std::erfc((u - 18.0 - 0.5) / std::sqrt(var) / std::sqrt(2.0));
    EXPECT_NEAR(exact, approx, 0.02);
  }
  // Above the exact limit the approximation is used.
  std::vector<double> a(10), b(10);
  for (int i = 0; i < 10; ++i) {
    a[std::size_t(i)] = i + 10;
    b[std::size_t(i)] = i;
  }
  const auto r = mann_whitney_one_sided(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_LT(r.p_value, 1e-3);
}

TEST(MannWhitney, TiesUseCorrectedVariance) {
  const std::vector<double> a{1, 1, 2, 2, 3}, b{1, 2, 2, 3, 3};
  const auto r = mann_whitney_one_sided(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_GT(r.p_value, 0.5);
  EXPECT_LE(r.p_value, 1.0);
}

TEST(Loso, ThreeRecordsThreeFolds) {
  const std::vector<RecordSlices> recs{make_record("a", 120, 1, 1.5), make_record("b", 120, 2, 1.5),
                                       make_record("c", 120, 3, 1.5)};
  const auto folds = loso_cv(recs, small_config());
  ASSERT_EQ(folds.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(folds[k].record_id, recs[k].record_id);
    ASSERT_EQ(folds[k].train_records.size(), 2u);
    for (const auto& t : folds[k].train_records) EXPECT_NE(t, recs[k].record_id);
    const std::size_t labeled = recs[(k + 1) % 3].count(SliceLabel::burst) +
                                recs[(k + 1) % 3].count(SliceLabel::inter_burst) +
                                recs[(k + 2) % 3].count(SliceLabel::burst) +
                                recs[(k + 2) % 3].count(SliceLabel::inter_burst);
    EXPECT_EQ(folds[k].n_train, labeled);
    EXPECT_EQ(folds[k].scores.size(), recs[k].count(SliceLabel::burst) + recs[k].count(SliceLabel::inter_burst));
    ASSERT_TRUE(folds[k].auc.has_value());
    EXPECT_GT(*folds[k].auc, 0.75);
    EXPECT_NEAR(*folds[k].auc, roc_auc(folds[k].scores, folds[k].labels), 0);
  }
}

TEST(Loso, OrderIndependent) {
  std::vector<RecordSlices> recs{make_record("r1", 90, 4, 1.0), make_record("r2", 90, 5, 1.0),
                                 make_record("r3", 90, 6, 1.0), make_record("r4", 90, 7, 1.0)};
  const auto a = loso_cv(recs, small_config());
  std::reverse(recs.begin(), recs.end());
  std::swap(recs[1], recs[2]);
  const auto b = loso_cv(recs, small_config());
  for (const auto& fa : a) {
    const auto it = std::find_if(b.begin(), b.end(), [&](const FoldResult& f) { return f.record_id == fa.record_id; });
    ASSERT_NE(it, b.end());
    EXPECT_EQ(fa.scores, it->scores);
    EXPECT_EQ(fa.auc, it->auc);
  }
}

TEST(Loso, SingleClassTrainingIsBiasOnly) {
  RecordSlices a = make_record("a", 40, 1, 1.0), b = make_record("b", 40, 2, 1.0);
  for (auto& s : a.slices) s.label = SliceLabel::burst;
  for (auto& s : b.slices) s.label = SliceLabel::burst;
  b.slices[3].label = SliceLabel::inter_burst;
  const auto folds = loso_cv({a, b}, small_config());
  EXPECT_TRUE(folds[1].bias_only);  // trained on record a only: all burst
  EXPECT_FALSE(folds[0].bias_only);
  EXPECT_FALSE(folds[0].auc.has_value());
  EXPECT_THROW(loso_cv({a}, small_config()), Error);
  EXPECT_THROW(loso_cv({a, a}, small_config()), Error);
}

TEST(Baseline, TimeMarginalFeature) {
  EXPECT_EQ(time_marginal_feature(std::vector<double>(64, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(time_marginal_feature(std::vector<double>{1, 2, 3.5}), 6.5);
  const RecordSlices r = make_record("x", 10, 1, 0);
  std::vector<const FeatureSlice*> p;
  for (const auto& s : r.slices) p.push_back(&s);
  const DenseMatrix m = feature_matrix(p, FeatureMode::time_marginal);
  EXPECT_EQ(m.cols, 1u);
  EXPECT_EQ(m.rows, 10u);
  EXPECT_DOUBLE_EQ(m(3, 0), time_marginal_feature(r.slices[3].features));
}

TEST(Baseline, ComparisonAndSummary) {
  std::vector<RecordSlices> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(make_record("r" + std::to_string(i), 90, 10 + i, 1.2));
  const auto prop = summarize_method("proposed", FeatureMode::tfd_slice, loso_cv(recs, small_config()));
  const auto base =
      summarize_method("TM-TFD", FeatureMode::time_marginal, loso_cv(recs, small_config(), FeatureMode::time_marginal));
  ASSERT_TRUE(prop.auc.ci.has_value());
  EXPECT_LE(prop.auc.ci->low, *prop.auc.median);
  EXPECT_GE(prop.auc.ci->high, *prop.auc.median);
  const Comparison c = compare_methods(prop, base);
  EXPECT_EQ(c.auc_diff.n, 5u);
  EXPECT_DOUBLE_EQ(c.median_auc_gap, *prop.auc.median - *base.auc.median);
  EXPECT_EQ(c.p_value, mann_whitney_one_sided(prop.aucs(), base.aucs()).p_value);
}

TEST(Detector, RoundTripAndOrientation) {
  const RecordSlices r = make_record("a", 150, 3, 2.0);
  std::vector<const FeatureSlice*> p;
  for (const auto& s : r.slices) p.push_back(&s);
  const BurstDetector d = train_detector(p, small_config(), FeatureMode::tfd_slice);
  const auto probs = d.burst_probability(r.slices);
  std::vector<double> s;
  std::vector<int> y;
  for (std::size_t i = 0; i < r.slices.size(); ++i) {
    if (r.slices[i].label == SliceLabel::excluded) continue;
    s.push_back(probs[i]);
    y.push_back(r.slices[i].label == SliceLabel::burst);
  }
  EXPECT_GT(roc_auc(s, y), 0.9);  // burst scores high
  const BurstDetector back = detector_from_text(detector_to_json(d).dump());
  EXPECT_EQ(back.burst_probability(r.slices), probs);
  EXPECT_THROW(detector_from_text("{\"format\":\"x\"}"), Error);
}
