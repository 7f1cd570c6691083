#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "tfburst/error.hpp"

namespace tfburst {

namespace detail {

// 1-based mid-ranks (ties share the average rank) and the tie-group sizes.
inline std::vector<double> midranks(std::span<const double> x, std::vector<std::size_t>* tie_sizes = nullptr) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = r;
    if (tie_sizes && j - i > 1) tie_sizes->push_back(j - i);
    i = j;
  }
  return rank;
}

inline double median_of(std::vector<double> v) {
  require(!v.empty(), "median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline double median(std::span<const double> v) { return detail::median_of({v.begin(), v.end()}); }

// Area under the ROC curve for label-1 positives: the normalized
// Mann-Whitney statistic, ties credited one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "roc_auc: scores and labels differ in length");
  const std::vector<double> rank = detail::midranks(scores);
  double rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "roc_auc: labels must be 0 or 1");
    if (labels[i] == 1) {
      rank_sum += rank[i];
      ++n_pos;
    }
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorCategory::data, "roc_auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

// ROC curve vertices, thresholds descending; starts at (0, 0).
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "roc_curve: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorCategory::data, "roc_curve: both classes must be present");
  std::vector<RocPoint> pts{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (labels[order[i]] == 1 ? tp : fp) += 1;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]])
      pts.push_back({scores[order[i]], fp / n_neg, tp / n_pos});
  }
  return pts;
}

struct SensSpec {
  std::optional<double> sensitivity;  // absent without positives
  std::optional<double> specificity;  // absent without negatives
};

// score >= threshold predicts the positive (label 1) class.
inline SensSpec sens_spec_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  require(scores.size() == labels.size(), "sens_spec_at: scores and labels differ in length");
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      (pred ? tp : fn) += 1;
    } else {
      (pred ? fp : tn) += 1;
    }
  }
  SensSpec r;
  if (tp + fn > 0) r.sensitivity = tp / (tp + fn);
  if (tn + fp > 0) r.specificity = tn / (tn + fp);
  return r;
}

struct JackknifeInterval {
  double low = 0;
  double estimate = 0;  // median of the input values
  double high = 0;
  double standard_error = 0;
};

// Jackknife confidence interval for the median: leave-one-out medians give
// pseudo-values n*m - (n-1)*m_(i), whose standard error sets a normal
// interval around the full-sample median.
inline JackknifeInterval jackknife_ci(std::span<const double> values, double level = 0.95) {
  const std::size_t n = values.size();
  require(n >= 3, "jackknife_ci: need at least 3 values, got " + std::to_string(n));
  require(level > 0 && level < 1, "jackknife_ci: level must lie in (0, 1)");
  const double full = median(values);
  std::vector<double> pseudo(n);
  std::vector<double> rest(values.begin(), values.end());
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> loo;
    loo.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) loo.push_back(values[j]);
    pseudo[i] = nd * full - (nd - 1.0) * detail::median_of(std::move(loo));
  }
  const double mean = std::accumulate(pseudo.begin(), pseudo.end(), 0.0) / nd;
  double ss = 0;
  for (double p : pseudo) ss += (p - mean) * (p - mean);
  const double se = std::sqrt(ss / ((nd - 1.0) * nd));
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
  return {full - z * se, full, full + z * se, se};
}

struct MannWhitneyResult {
  double u = 0;        // statistic for sample a
  double p_value = 1;  // one-sided, H1: a stochastically greater than b
  bool exact = false;
};

namespace detail {

// counts[u] = number of rank assignments of `na` items among na + nb with
// Mann-Whitney statistic u (no ties).
inline std::vector<double> mann_whitney_counts(std::size_t na, std::size_t nb) {
  // table[m][n] is the distribution for sizes m, n; built incrementally.
  std::vector<std::vector<std::vector<double>>> table(na + 1, std::vector<std::vector<double>>(nb + 1));
  for (std::size_t m = 0; m <= na; ++m) {
    for (std::size_t n = 0; n <= nb; ++n) {
      auto& cur = table[m][n];
      cur.assign(m * n + 1, 0.0);
      if (m == 0 || n == 0) {
        cur[0] = 1.0;
        continue;
      }
      // Largest observation belongs to a (adds n to U) or to b.
      const auto& from_a = table[m - 1][n];
      const auto& from_b = table[m][n - 1];
      for (std::size_t u = 0; u < from_a.size(); ++u) cur[u + n] += from_a[u];
      for (std::size_t u = 0; u < from_b.size(); ++u) cur[u] += from_b[u];
    }
  }
  return table[na][nb];
}

}  // namespace detail

inline constexpr std::size_t kMannWhitneyExactLimit = 12;

// One-sided Mann-Whitney U test. Exact enumeration for small tie-free
// samples; otherwise the normal approximation with tie and continuity
// corrections.
inline MannWhitneyResult mann_whitney_one_sided(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "mann_whitney_one_sided: both samples must be nonempty");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::size_t> ties;
  const std::vector<double> rank = detail::midranks(pooled, &ties);
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  double ra = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ra += rank[i];
  MannWhitneyResult r;
  r.u = ra - na * (na + 1.0) / 2.0;

  if (ties.empty() && pooled.size() <= kMannWhitneyExactLimit) {
    const std::vector<double> counts = detail::mann_whitney_counts(a.size(), b.size());
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto u_obs = static_cast<std::size_t>(std::llround(r.u));
    double tail = 0;
    for (std::size_t u = u_obs; u < counts.size(); ++u) tail += counts[u];
    r.p_value = tail / total;
    r.exact = true;
    return r;
  }

  const double n = na + nb;
  double tie_term = 0;
  for (std::size_t t : ties) {
    const auto td = static_cast<double>(t);
    tie_term += td * td * td - td;
  }
  const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0) {
    r.p_value = 1.0;
    return r;
  }
  const double z = (r.u - na * nb / 2.0 - 0.5) / std::sqrt(var);
  r.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  return r;
}

}  // namespace tfburst
