#pragma once

// Gradient-boosted regression trees for binary classification.
//
// Newton boosting on the weighted logistic loss. Trees are grown level-wise
// with exact greedy split search over presorted feature columns; a split is
// kept only if
//
//   gain = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma > 0
//
// and leaves take the value -learning_rate * G/(H+lambda). Samples with
// value < threshold go left.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfburst/error.hpp"

namespace tfburst {

struct BoostConfig {
  int n_trees = 100;
  double learning_rate = 0.3;
  int max_depth = 6;
  double gamma = 10.0;
  double lambda = 1.0;
  double subsample = 1.0;
  double positive_class_weight = 2.0;
  double base_score = 0.5;
  std::uint64_t seed = 0;  // only used when subsample < 1

  void validate() const {
    require(n_trees >= 0, "BoostConfig: n_trees must be >= 0");
    require(learning_rate > 0 && learning_rate <= 1, "BoostConfig: learning_rate must lie in (0, 1]");
    require(max_depth >= 0, "BoostConfig: max_depth must be >= 0");
    require(gamma >= 0, "BoostConfig: gamma must be >= 0");
    require(lambda >= 0, "BoostConfig: lambda must be >= 0");
    require(subsample > 0 && subsample <= 1, "BoostConfig: subsample must lie in (0, 1]");
    require(positive_class_weight > 0, "BoostConfig: positive_class_weight must be positive");
    require(base_score > 0 && base_score < 1, "BoostConfig: base_score must lie in (0, 1)");
  }
};

// Row-major dense feature matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(data).subspan(i * cols, cols); }

  void push_row(std::span<const double> r) {
    if (rows == 0 && cols == 0) cols = r.size();
    require(r.size() == cols, "DenseMatrix: row width mismatch");
    data.insert(data.end(), r.begin(), r.end());
    ++rows;
  }
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  double weight = 0;  // leaf value (already scaled by the learning rate)

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const {
    std::size_t k = 0;
    while (!nodes[k].is_leaf()) {
      const TreeNode& n = nodes[k];
      k = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return nodes[k].weight;
  }

  // Index of the leaf reached by `row`.
  std::size_t leaf_index(std::span<const double> row) const {
    std::size_t k = 0;
    while (!nodes[k].is_leaf()) {
      const TreeNode& n = nodes[k];
      k = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return k;
  }

  int depth() const { return depth_from(0); }

  std::size_t split_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) {
      return !n.is_leaf();
    }));
  }

 private:
  int depth_from(std::size_t k) const {
    const TreeNode& n = nodes[k];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

struct TreeEnsemble {
  std::vector<Tree> trees;
  BoostConfig config;
  std::size_t feature_count = 0;

  double margin(std::span<const double> row) const {
    double m = logit(config.base_score);
    for (const Tree& t : trees) m += t.predict(row);
    return m;
  }

  std::size_t split_count() const {
    std::size_t s = 0;
    for (const Tree& t : trees) s += t.split_count();
    return s;
  }
};

// Diagnostics collected during training.
struct TrainLog {
  std::vector<double> loss;  // weighted mean log-loss; loss[0] before any tree
  bool bias_only = false;
  std::vector<std::string> warnings;
};

inline double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double g = gl + gr;
  const double h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

// Threshold strictly between two consecutive sorted values.
inline double midpoint(double lo, double hi) {
  const double t = lo + (hi - lo) / 2.0;
  return t > lo ? t : hi;
}

namespace detail {

// Per-feature ascending sample order, with the sorted values alongside so
// the split scan reads them sequentially. Equal values keep row order.
class PresortedColumns {
 public:
  explicit PresortedColumns(const DenseMatrix& x) : rows_(x.rows), order_(x.rows * x.cols), values_(x.rows * x.cols) {
    std::vector<std::pair<double, std::uint32_t>> col(x.rows);
    for (std::size_t f = 0; f < x.cols; ++f) {
      for (std::size_t i = 0; i < x.rows; ++i) col[i] = {x(i, f), static_cast<std::uint32_t>(i)};
      std::sort(col.begin(), col.end());
      for (std::size_t j = 0; j < x.rows; ++j) {
        values_[f * rows_ + j] = col[j].first;
        order_[f * rows_ + j] = col[j].second;
      }
    }
  }

  // The columns of the rows with keep[i] != 0, renumbered in row order.
  // Equivalent to presorting the row subset directly.
  PresortedColumns subset(std::span<const std::uint8_t> keep) const {
    require(keep.size() == rows_, "PresortedColumns::subset: mask length mismatch");
    std::vector<std::uint32_t> renum(rows_);
    std::size_t m = 0;
    for (std::size_t i = 0; i < rows_; ++i) {
      renum[i] = static_cast<std::uint32_t>(m);
      m += keep[i] ? 1 : 0;
    }
    PresortedColumns out;
    out.rows_ = m;
    const std::size_t cols = rows_ ? order_.size() / rows_ : 0;
    out.order_.resize(m * cols);
    out.values_.resize(m * cols);
    for (std::size_t f = 0; f < cols; ++f) {
      std::size_t w = f * m;
      for (std::size_t j = f * rows_; j < (f + 1) * rows_; ++j) {
        if (!keep[order_[j]]) continue;
        out.order_[w] = renum[order_[j]];
        out.values_[w] = values_[j];
        ++w;
      }
    }
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return rows_ ? order_.size() / rows_ : 0; }

  std::span<const std::uint32_t> order(std::size_t f) const {
    return std::span<const std::uint32_t>(order_).subspan(f * rows_, rows_);
  }
  std::span<const double> values(std::size_t f) const { return std::span<const double>(values_).subspan(f * rows_, rows_); }

 private:
  PresortedColumns() = default;

  std::size_t rows_ = 0;
  std::vector<std::uint32_t> order_;
  std::vector<double> values_;
};

struct BestSplit {
  double gain = 0;
  int feature = -1;
  double threshold = 0;
};

struct GradPair {
  double g = 0;
  double h = 0;
};

// Running state of an exact greedy scan over one node's sorted samples.
// A candidate beats the incumbent when its score
//   S = G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda)
// is larger; the incumbent starts at the gain-zero level
//   S0 = G^2/(H+lambda) + 2 gamma.
// Scores are compared as cross-multiplied fractions to avoid divisions.
struct SplitScan {
  double g = 0, h = 0;  // node totals
  double best_num = 0, best_den = 1;
  int feature = -1;
  double threshold = 0;
  // per-feature running sums
  double gl = 0, hl = 0, last = 0;

  void reset(double total_g, double total_h, double lambda, double gamma) {
    g = total_g;
    h = total_h;
    best_num = g * g / (h + lambda) + 2.0 * gamma;
    best_den = 1.0;
    feature = -1;
  }
  void start_feature() {
    gl = hl = 0;
    last = std::numeric_limits<double>::infinity();
  }
  void push(double v, const GradPair& p, double lambda, int f) {
    if (v > last) {
      const double gr = g - gl;
      const double dl = hl + lambda;
      const double dr = (h - hl) + lambda;
      const double num = gl * gl * dr + gr * gr * dl;
      const double den = dl * dr;
      if (num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        feature = f;
        threshold = midpoint(last, v);
      }
    }
    gl += p.g;
    hl += p.h;
    last = v;
  }
};

// Stable two-way partition of one segment of a sorted column, scanning both
// children for split candidates on the way. Branch-free in the side test:
// the left/right choice is data-dependent and unpredictable.
inline void partition_scan(std::size_t begin, std::size_t end, const std::uint32_t* src_ord, const double* src_val,
                           std::uint32_t* out_ord, double* out_val, const std::uint8_t* go_left, const GradPair* gh,
                           double lambda, int f, std::size_t right_begin, SplitScan& left, SplitScan& right) {
  // side 0 = right, 1 = left
  double g[2] = {right.g, left.g}, h[2] = {right.h, left.h};
  double gl[2] = {0, 0}, hl[2] = {0, 0};
  double last[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double bn[2] = {right.best_num, left.best_num}, bd[2] = {right.best_den, left.best_den};
  int feat[2] = {right.feature, left.feature};
  double thr[2] = {right.threshold, left.threshold};
  std::size_t w[2] = {right_begin, begin};
  for (std::size_t j = begin; j < end; ++j) {
    const std::uint32_t i = src_ord[j];
    const double v = src_val[j];
    const unsigned side = go_left[i];
    const std::size_t pos = w[side]++;
    out_ord[pos] = i;
    out_val[pos] = v;
    const double a = gl[side], b = hl[side], lv = last[side];
    const double gr = g[side] - a;
    const double dl = b + lambda;
    const double dr = (h[side] - b) + lambda;
    const double num = a * a * dr + gr * gr * dl;
    const double den = dl * dr;
    if (v > lv && num * bd[side] > bn[side] * den) {
      bn[side] = num;
      bd[side] = den;
      feat[side] = f;
      thr[side] = midpoint(lv, v);
    }
    gl[side] = a + gh[i].g;
    hl[side] = b + gh[i].h;
    last[side] = v;
  }
  right.best_num = bn[0];
  right.best_den = bd[0];
  right.feature = feat[0];
  right.threshold = thr[0];
  left.best_num = bn[1];
  left.best_den = bd[1];
  left.feature = feat[1];
  left.threshold = thr[1];
}

// Grows one tree on fixed gradients. Every feature's presorted sample list
// is kept partitioned so that each open node owns one contiguous segment.
// Splitting a node stably partitions its segment (which preserves the sort)
// and the children's split scans run during that same pass.
// `leaf_of` receives, for every sample, the node index of its leaf.
inline Tree grow_tree(const DenseMatrix& x, const PresortedColumns& sorted, std::span<const double> grad,
                      std::span<const double> hess, const BoostConfig& cfg, int max_depth,
                      std::vector<int>& leaf_of) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const double lambda = cfg.lambda;
  Tree tree;
  tree.nodes.emplace_back();
  leaf_of.assign(n, 0);

  std::vector<GradPair> gh(n);
  for (std::size_t i = 0; i < n; ++i) gh[i] = {grad[i], hess[i]};

  struct Segment {
    int node = 0;
    std::size_t begin = 0, end = 0;
    SplitScan scan;
    BestSplit best;
    std::size_t n_left = 0;
    double gl = 0, hl = 0;
  };

  // Samples live in the presorted master arrays until the root splits, then
  // alternate between two work buffers.
  std::vector<std::uint32_t> buf_idx[2];
  std::vector<double> buf_val[2];
  int cur = -1;
  auto idx_of = [&](std::size_t f) -> const std::uint32_t* {
    return cur < 0 ? sorted.order(f).data() : buf_idx[cur].data() + f * n;
  };
  auto val_of = [&](std::size_t f) -> const double* {
    return cur < 0 ? sorted.values(f).data() : buf_val[cur].data() + f * n;
  };

  std::vector<Segment> active(1);
  active[0].end = n;
  {
    double g = 0, h = 0;
    for (const GradPair& p : gh) {
      g += p.g;
      h += p.h;
    }
    active[0].scan.reset(g, h, lambda, cfg.gamma);
  }
  if (max_depth > 0 && n >= 2) {
    SplitScan& sc = active[0].scan;
    for (std::size_t f = 0; f < d; ++f) {
      const std::uint32_t* ord = idx_of(f);
      const double* val = val_of(f);
      sc.start_feature();
      for (std::size_t j = 0; j < n; ++j) sc.push(val[j], gh[ord[j]], lambda, static_cast<int>(f));
    }
  }

  std::vector<std::uint8_t> go_left(n, 0);
  for (int depth = 0;; ++depth) {
    bool any_split = false;
    for (Segment& s : active) {
      s.best = {};
      if (depth >= max_depth || s.scan.feature < 0) continue;
      // Recompute the winning gain with the closed form; keep the split
      // only if it is strictly positive there too.
      const auto f = static_cast<std::size_t>(s.scan.feature);
      const std::uint32_t* ord = idx_of(f);
      const double* val = val_of(f);
      double gl = 0, hl = 0;
      std::size_t j = s.begin;
      for (; j < s.end && val[j] < s.scan.threshold; ++j) {
        gl += gh[ord[j]].g;
        hl += gh[ord[j]].h;
      }
      const double gain = split_gain(gl, hl, s.scan.g - gl, s.scan.h - hl, lambda, cfg.gamma);
      if (!(gain > 0)) continue;
      s.best = {gain, s.scan.feature, s.scan.threshold};
      s.n_left = j - s.begin;
      s.gl = gl;
      s.hl = hl;
      for (std::size_t k = s.begin; k < s.end; ++k) go_left[ord[k]] = k < j ? 1 : 0;
      any_split = true;
    }

    // Settle leaves.
    for (const Segment& s : active) {
      if (s.best.feature >= 0) continue;
      tree.nodes[static_cast<std::size_t>(s.node)].weight = -cfg.learning_rate * s.scan.g / (s.scan.h + lambda);
      const std::uint32_t* ord = idx_of(0);
      for (std::size_t j = s.begin; j < s.end; ++j) leaf_of[ord[j]] = s.node;
    }
    if (!any_split) break;

    std::vector<Segment> next;
    for (const Segment& s : active) {
      if (s.best.feature < 0) continue;
      TreeNode& node = tree.nodes[static_cast<std::size_t>(s.node)];
      const int left = static_cast<int>(tree.nodes.size());
      node.feature = s.best.feature;
      node.threshold = s.best.threshold;
      node.left = left;
      node.right = left + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      Segment l, r;
      l.node = left;
      l.begin = s.begin;
      l.end = s.begin + s.n_left;
      l.scan.reset(s.gl, s.hl, lambda, cfg.gamma);
      r.node = left + 1;
      r.begin = l.end;
      r.end = s.end;
      r.scan.reset(s.scan.g - s.gl, s.scan.h - s.hl, lambda, cfg.gamma);
      next.push_back(l);
      next.push_back(r);
    }

    if (depth + 1 >= max_depth) {
      // Children are leaves: no partition needed, only leaf membership.
      for (std::size_t k = 0, c = 0; k < active.size(); ++k) {
        const Segment& s = active[k];
        if (s.best.feature < 0) continue;
        const Segment& l = next[c++];
        const Segment& r = next[c++];
        const std::uint32_t* ord = idx_of(0);
        for (std::size_t j = s.begin; j < s.end; ++j) leaf_of[ord[j]] = go_left[ord[j]] ? l.node : r.node;
        tree.nodes[static_cast<std::size_t>(l.node)].weight = -cfg.learning_rate * l.scan.g / (l.scan.h + lambda);
        tree.nodes[static_cast<std::size_t>(r.node)].weight = -cfg.learning_rate * r.scan.g / (r.scan.h + lambda);
      }
      break;
    }

    const int dst = cur < 0 ? 0 : 1 - cur;
    if (buf_idx[dst].empty()) {
      buf_idx[dst].resize(n * d);
      buf_val[dst].resize(n * d);
    }
    for (std::size_t f = 0; f < d; ++f) {
      const std::uint32_t* src_ord = idx_of(f);
      const double* src_val = val_of(f);
      std::uint32_t* out_ord = buf_idx[dst].data() + f * n;
      double* out_val = buf_val[dst].data() + f * n;
      const int fi = static_cast<int>(f);
      for (std::size_t k = 0, c = 0; k < active.size(); ++k) {
        const Segment& s = active[k];
        if (s.best.feature < 0) continue;
        Segment& l = next[c++];
        Segment& r = next[c++];
        partition_scan(s.begin, s.end, src_ord, src_val, out_ord, out_val, go_left.data(), gh.data(), lambda, fi,
                       r.begin, l.scan, r.scan);
      }
    }
    cur = dst;
    active = std::move(next);
  }
  return tree;
}

inline double weighted_log_loss(std::span<const double> margin, std::span<const double> y, std::span<const double> w) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < margin.size(); ++i) {
    // log(1 + e^{-m}) for y = 1, log(1 + e^{m}) for y = 0, computed stably.
    const double s = y[i] > 0.5 ? -margin[i] : margin[i];
    const double l = s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
    num += w[i] * l;
    den += w[i];
  }
  return num / den;
}

}  // namespace detail

// Per-sample training weight: the supplied weight, times
// positive_class_weight for label-1 samples.
inline std::vector<double> effective_weights(std::span<const int> labels, std::span<const double> weights,
                                             const BoostConfig& cfg) {
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    w[i] = (weights.empty() ? 1.0 : weights[i]) * (labels[i] == 1 ? cfg.positive_class_weight : 1.0);
  return w;
}

// Gradient and hessian of the weighted logistic loss at the given margins.
inline void logistic_gradients(std::span<const double> margin, std::span<const int> labels,
                               std::span<const double> w, std::vector<double>& grad, std::vector<double>& hess) {
  grad.resize(margin.size());
  hess.resize(margin.size());
  for (std::size_t i = 0; i < margin.size(); ++i) {
    const double p = sigmoid(margin[i]);
    grad[i] = w[i] * (p - static_cast<double>(labels[i]));
    hess[i] = w[i] * std::max(p * (1.0 - p), 1e-16);
  }
}

// `weights` may be empty (all ones). `presorted`, when given, must be the
// presorted columns of `features` (it saves the sort when one matrix is
// trained on repeatedly, e.g. across cross-validation folds).
inline TreeEnsemble train(const DenseMatrix& features, std::span<const int> labels, std::span<const double> weights,
                          const BoostConfig& config, TrainLog* log = nullptr,
                          const detail::PresortedColumns* presorted = nullptr) {
  config.validate();
  const std::size_t n = features.rows;
  require(n >= 2, "train: need at least 2 samples");
  require(labels.size() == n, "train: label count does not match feature rows");
  require(weights.empty() || weights.size() == n, "train: weight count does not match feature rows");
  require(n < std::numeric_limits<std::uint32_t>::max(), "train: too many samples");
  for (std::size_t i = 0; i < features.data.size(); ++i) {
    if (std::isnan(features.data[i])) {
      fail(ErrorCategory::invalid_argument, "train: NaN feature at row " + std::to_string(i / features.cols) +
                                                ", column " + std::to_string(i % features.cols));
    }
  }
  int n_pos = 0;
  for (int y : labels) {
    require(y == 0 || y == 1, "train: labels must be 0 or 1");
    n_pos += y;
  }
  for (double w : weights) require(w > 0, "train: weights must be positive");

  TrainLog local;
  TrainLog& out_log = log ? *log : local;
  out_log = TrainLog{};

  int max_depth = config.max_depth;
  if (n_pos == 0 || n_pos == static_cast<int>(n)) {
    out_log.bias_only = true;
    out_log.warnings.push_back("train: all labels are " + std::to_string(n_pos == 0 ? 0 : 1) +
                               "; fitting a bias-only model");
    max_depth = 0;
  }

  TreeEnsemble model;
  model.config = config;
  model.feature_count = features.cols;

  const std::vector<double> w = effective_weights(labels, weights, config);
  std::vector<double> y(labels.begin(), labels.end());
  std::vector<double> margin(n, logit(config.base_score));
  std::vector<double> grad, hess;
  std::vector<int> leaf_of;
  out_log.loss.push_back(detail::weighted_log_loss(margin, y, w));

  std::optional<detail::PresortedColumns> own;
  if (presorted) {
    require(presorted->rows() == n && (n == 0 || presorted->cols() == features.cols),
            "train: presorted columns do not match the feature matrix");
  } else {
    own.emplace(features);
  }
  const detail::PresortedColumns& sorted = presorted ? *presorted : *own;
  std::mt19937_64 rng(config.seed);
  std::vector<double> g_tree, h_tree;
  for (int round = 0; round < config.n_trees; ++round) {
    logistic_gradients(margin, labels, w, grad, hess);
    std::span<const double> g_use = grad, h_use = hess;
    if (config.subsample < 1.0) {
      g_tree = grad;
      h_tree = hess;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u >= config.subsample) g_tree[i] = h_tree[i] = 0.0;
      }
      g_use = g_tree;
      h_use = h_tree;
    }
    Tree tree = detail::grow_tree(features, sorted, g_use, h_use, config, max_depth, leaf_of);
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.nodes[static_cast<std::size_t>(leaf_of[i])].weight;
    model.trees.push_back(std::move(tree));
    out_log.loss.push_back(detail::weighted_log_loss(margin, y, w));
  }
  return model;
}

inline std::vector<double> predict_proba(const TreeEnsemble& model, const DenseMatrix& features) {
  if (features.rows > 0 && features.cols != model.feature_count) {
    fail(ErrorCategory::invalid_argument, "predict_proba: model expects " + std::to_string(model.feature_count) +
                                              " features, got " + std::to_string(features.cols));
  }
  std::vector<double> p(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) p[i] = sigmoid(model.margin(features.row(i)));
  return p;
}

// ---------------------------------------------------------------------------
// Model document
//
// {
//   "format": "tfburst-gbt", "version": 1, "feature_count": F,
//   "config": { BoostConfig fields },
//   "trees": [ { "nodes": [ {"feature": f, "threshold": t, "left": i, "right": j}
//                         | {"leaf": w}, ... ] }, ... ]
// }
//
// Doubles are written in shortest round-trip form, so a reloaded model
// predicts bit-identically.

inline constexpr const char* kModelFormat = "tfburst-gbt";
inline constexpr int kModelVersion = 1;

inline nlohmann::json config_to_json(const BoostConfig& c) {
  return {{"n_trees", c.n_trees},     {"learning_rate", c.learning_rate},
          {"max_depth", c.max_depth}, {"gamma", c.gamma},
          {"lambda", c.lambda},       {"subsample", c.subsample},
          {"positive_class_weight", c.positive_class_weight},
          {"base_score", c.base_score}, {"seed", c.seed}};
}

inline std::string serialize(const TreeEnsemble& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"leaf", n.weight}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  nlohmann::json doc = {{"format", kModelFormat},
                        {"version", kModelVersion},
                        {"feature_count", model.feature_count},
                        {"config", config_to_json(model.config)},
                        {"trees", std::move(trees)}};
  return doc.dump(1);
}

namespace detail {

inline const nlohmann::json& member(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    fail(ErrorCategory::parse, "model document: missing \"" + std::string(key) + "\" at " + where);
  return obj.at(key);
}

template <typename T>
T number(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = member(obj, key, where);
  if (!v.is_number()) fail(ErrorCategory::parse, "model document: \"" + std::string(key) + "\" at " + where + " is not a number");
  return v.get<T>();
}

}  // namespace detail

inline TreeEnsemble deserialize(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCategory::parse, "model document: malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  const auto& fmt = detail::member(doc, "format", "/");
  if (!fmt.is_string() || fmt.get<std::string>() != kModelFormat)
    fail(ErrorCategory::parse, "model document: /format is not \"" + std::string(kModelFormat) + "\"");
  const int version = detail::number<int>(doc, "version", "/");
  if (version != kModelVersion)
    fail(ErrorCategory::parse, "model document: unsupported /version " + std::to_string(version));

  TreeEnsemble model;
  model.feature_count = detail::number<std::size_t>(doc, "feature_count", "/");
  const auto& c = detail::member(doc, "config", "/");
  model.config.n_trees = detail::number<int>(c, "n_trees", "/config");
  model.config.learning_rate = detail::number<double>(c, "learning_rate", "/config");
  model.config.max_depth = detail::number<int>(c, "max_depth", "/config");
  model.config.gamma = detail::number<double>(c, "gamma", "/config");
  model.config.lambda = detail::number<double>(c, "lambda", "/config");
  model.config.subsample = detail::number<double>(c, "subsample", "/config");
  model.config.positive_class_weight = detail::number<double>(c, "positive_class_weight", "/config");
  model.config.base_score = detail::number<double>(c, "base_score", "/config");
  model.config.seed = detail::number<std::uint64_t>(c, "seed", "/config");
  try {
    model.config.validate();
  } catch (const Error& e) {
    fail(ErrorCategory::parse, std::string("model document: /config: ") + e.what());
  }

  const auto& trees = detail::member(doc, "trees", "/");
  if (!trees.is_array()) fail(ErrorCategory::parse, "model document: /trees is not an array");
  for (std::size_t ti = 0; ti < trees.size(); ++ti) {
    const std::string tpath = "/trees/" + std::to_string(ti);
    const auto& nodes = detail::member(trees[ti], "nodes", tpath);
    if (!nodes.is_array() || nodes.empty()) fail(ErrorCategory::parse, "model document: " + tpath + "/nodes must be a non-empty array");
    Tree tree;
    for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
      const std::string npath = tpath + "/nodes/" + std::to_string(ni);
      const auto& nj = nodes[ni];
      TreeNode node;
      if (nj.is_object() && nj.contains("leaf")) {
        node.weight = detail::number<double>(nj, "leaf", npath);
      } else {
        node.feature = detail::number<int>(nj, "feature", npath);
        node.threshold = detail::number<double>(nj, "threshold", npath);
        node.left = detail::number<int>(nj, "left", npath);
        node.right = detail::number<int>(nj, "right", npath);
        const auto count = static_cast<int>(nodes.size());
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= model.feature_count)
          fail(ErrorCategory::parse, "model document: " + npath + "/feature out of range");
        if (node.left <= static_cast<int>(ni) || node.left >= count || node.right <= static_cast<int>(ni) ||
            node.right >= count)
          fail(ErrorCategory::parse, "model document: " + npath + " has invalid child indices");
      }
      tree.nodes.push_back(node);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace tfburst
