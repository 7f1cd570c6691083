#pragma once

// Slice-level burst detector and leave-one-record-out evaluation.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tfburst/boosted_trees.hpp"
#include "tfburst/epoch_slicer.hpp"
#include "tfburst/eval_stats.hpp"

namespace tfburst {

enum class FeatureMode {
  tfd_slice,      // the full frequency profile of each slice
  time_marginal,  // one feature: the sum of the slice's TFD values
};

inline std::string_view feature_mode_name(FeatureMode m) {
  return m == FeatureMode::tfd_slice ? "tfd_slice" : "time_marginal";
}

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "tfd_slice") return FeatureMode::tfd_slice;
  if (s == "time_marginal") return FeatureMode::time_marginal;
  fail(ErrorCategory::parse, "unknown feature mode \"" + std::string(s) + "\"");
}

inline double time_marginal_feature(std::span<const double> slice_values) {
  double s = 0;
  for (double v : slice_values) s += v;
  return s;
}

inline DenseMatrix feature_matrix(std::span<const FeatureSlice* const> slices, FeatureMode mode) {
  DenseMatrix x;
  if (slices.empty()) return x;
  x.cols = mode == FeatureMode::tfd_slice ? slices.front()->features.size() : 1;
  x.data.reserve(slices.size() * x.cols);
  for (const FeatureSlice* s : slices) {
    if (mode == FeatureMode::tfd_slice) {
      x.push_row(s->features);
    } else {
      const double v = time_marginal_feature(s->features);
      x.push_row(std::span<const double>(&v, 1));
    }
  }
  return x;
}

// The classifier is trained with inter-burst as its label-1 class so that
// positive_class_weight up-weights the minority class; scores are reported
// as P(burst) = 1 - P(inter-burst).
struct BurstDetector {
  TreeEnsemble ensemble;
  FeatureMode mode = FeatureMode::tfd_slice;

  std::vector<double> burst_probability(std::span<const FeatureSlice* const> slices) const {
    std::vector<double> p = predict_proba(ensemble, feature_matrix(slices, mode));
    for (double& v : p) v = 1.0 - v;
    return p;
  }

  std::vector<double> burst_probability(const std::vector<FeatureSlice>& slices) const {
    std::vector<const FeatureSlice*> ptrs;
    for (const auto& s : slices) ptrs.push_back(&s);
    return burst_probability(ptrs);
  }
};

// Labeled slices only; excluded slices are skipped.
inline BurstDetector train_detector(std::span<const FeatureSlice* const> slices, const BoostConfig& config,
                                    FeatureMode mode, TrainLog* log = nullptr) {
  std::vector<const FeatureSlice*> used;
  std::vector<int> target;
  for (const FeatureSlice* s : slices) {
    if (s->label == SliceLabel::excluded) continue;
    used.push_back(s);
    target.push_back(s->label == SliceLabel::inter_burst ? 1 : 0);
  }
  if (used.size() < 2) fail(ErrorCategory::data, "train_detector: fewer than 2 labeled slices");
  BurstDetector d;
  d.mode = mode;
  d.ensemble = train(feature_matrix(used, mode), target, {}, config, log);
  return d;
}

inline nlohmann::json detector_to_json(const BurstDetector& d) {
  return {{"format", "tfburst-detector"},
          {"version", 1},
          {"feature_mode", std::string(feature_mode_name(d.mode))},
          {"trained_positive_class", "inter_burst"},
          {"model", nlohmann::json::parse(serialize(d.ensemble))}};
}

inline BurstDetector detector_from_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCategory::parse, "detector document: malformed JSON at byte " + std::to_string(e.byte));
  }
  if (!doc.is_object() || doc.value("format", "") != "tfburst-detector")
    fail(ErrorCategory::parse, "detector document: /format is not \"tfburst-detector\"");
  if (doc.value("version", 0) != 1) fail(ErrorCategory::parse, "detector document: unsupported /version");
  if (!doc.contains("model") || !doc.contains("feature_mode"))
    fail(ErrorCategory::parse, "detector document: missing /model or /feature_mode");
  BurstDetector d;
  d.mode = parse_feature_mode(doc.at("feature_mode").get<std::string>());
  d.ensemble = deserialize(doc.at("model").dump());
  return d;
}

struct RecordSlices {
  std::string record_id;
  std::vector<FeatureSlice> slices;

  std::size_t count(SliceLabel l) const {
    return static_cast<std::size_t>(
        std::count_if(slices.begin(), slices.end(), [l](const FeatureSlice& s) { return s.label == l; }));
  }
};

struct FoldResult {
  std::string record_id;
  std::vector<double> scores;  // P(burst) per labeled slice of the held-out record
  std::vector<int> labels;     // 1 = burst
  std::optional<double> auc;   // absent when the record lacks one class
  std::optional<double> sensitivity_at_half;
  std::optional<double> specificity_at_half;
  bool bias_only = false;
  std::vector<std::string> train_records;
  std::size_t n_train = 0;
};

// Leave-one-record-out: each record is scored by a model trained on all
// other records. The training pool is assembled in record_id order, so
// results do not depend on the order of `records`.
inline std::vector<FoldResult> loso_cv(const std::vector<RecordSlices>& records, const BoostConfig& config,
                                       FeatureMode mode = FeatureMode::tfd_slice) {
  if (records.size() < 2) fail(ErrorCategory::data, "loso_cv: need at least 2 records");
  std::vector<const RecordSlices*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const RecordSlices* a, const RecordSlices* b) { return a->record_id < b->record_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->record_id == sorted[i - 1]->record_id)
      fail(ErrorCategory::data, "loso_cv: duplicate record_id \"" + sorted[i]->record_id + "\"");

  // The pooled training matrix over all records is built and presorted
  // once; each fold drops the held-out record's rows.
  std::vector<const FeatureSlice*> pool;
  std::vector<std::size_t> pool_record;
  for (std::size_t k = 0; k < sorted.size(); ++k)
    for (const auto& s : sorted[k]->slices)
      if (s.label != SliceLabel::excluded && s.record_id == sorted[k]->record_id) {
        pool.push_back(&s);
        pool_record.push_back(k);
      }
  const DenseMatrix x_all = feature_matrix(pool, mode);
  std::optional<detail::PresortedColumns> presorted_all;
  if (!pool.empty()) presorted_all.emplace(x_all);

  std::vector<FoldResult> out;
  out.reserve(records.size());
  for (const RecordSlices& test : records) {
    FoldResult fold;
    fold.record_id = test.record_id;
    std::size_t test_k = sorted.size();
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (sorted[k]->record_id == test.record_id) {
        test_k = k;
      } else {
        fold.train_records.push_back(sorted[k]->record_id);
      }
    }
    std::vector<std::uint8_t> keep(pool.size());
    DenseMatrix x;
    x.cols = x_all.cols;
    std::vector<int> target;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      keep[i] = pool_record[i] != test_k ? 1 : 0;
      if (!keep[i]) continue;
      x.push_row(x_all.row(i));
      target.push_back(pool[i]->label == SliceLabel::inter_burst ? 1 : 0);
    }
    fold.n_train = target.size();
    if (fold.n_train < 2) fail(ErrorCategory::data, "loso_cv: fewer than 2 labeled training slices for fold " + test.record_id);
    const detail::PresortedColumns fold_sorted = presorted_all->subset(keep);
    TrainLog log;
    BurstDetector det;
    det.mode = mode;
    det.ensemble = train(x, target, {}, config, &log, &fold_sorted);
    fold.bias_only = log.bias_only;

    std::vector<const FeatureSlice*> test_slices;
    for (const auto& s : test.slices) {
      if (s.label == SliceLabel::excluded) continue;
      test_slices.push_back(&s);
      fold.labels.push_back(s.label == SliceLabel::burst ? 1 : 0);
    }
    if (!test_slices.empty()) fold.scores = det.burst_probability(test_slices);
    const auto n_burst = std::count(fold.labels.begin(), fold.labels.end(), 1);
    if (n_burst > 0 && n_burst < static_cast<std::ptrdiff_t>(fold.labels.size()))
      fold.auc = roc_auc(fold.scores, fold.labels);
    const SensSpec ss = sens_spec_at(fold.scores, fold.labels, 0.5);
    fold.sensitivity_at_half = ss.sensitivity;
    fold.specificity_at_half = ss.specificity;
    out.push_back(std::move(fold));
  }
  return out;
}

struct SummaryStat {
  std::optional<double> median;
  std::optional<JackknifeInterval> ci;  // needs >= 3 values
  std::size_t n = 0;
};

inline SummaryStat summarize_values(const std::vector<double>& v) {
  SummaryStat s;
  s.n = v.size();
  if (!v.empty()) s.median = median(v);
  if (v.size() >= 3) s.ci = jackknife_ci(v);
  return s;
}

struct MethodSummary {
  std::string name;
  FeatureMode mode = FeatureMode::tfd_slice;
  std::vector<FoldResult> folds;
  SummaryStat auc;
  SummaryStat sensitivity;
  SummaryStat specificity;

  std::vector<double> aucs() const {
    std::vector<double> v;
    for (const auto& f : folds)
      if (f.auc) v.push_back(*f.auc);
    return v;
  }
};

inline MethodSummary summarize_method(std::string name, FeatureMode mode, std::vector<FoldResult> folds) {
  MethodSummary m;
  m.name = std::move(name);
  m.mode = mode;
  m.folds = std::move(folds);
  std::vector<double> sens, spec;
  for (const auto& f : m.folds) {
    if (f.sensitivity_at_half) sens.push_back(*f.sensitivity_at_half);
    if (f.specificity_at_half) spec.push_back(*f.specificity_at_half);
  }
  m.auc = summarize_values(m.aucs());
  m.sensitivity = summarize_values(sens);
  m.specificity = summarize_values(spec);
  return m;
}

// Reference method versus another, on records where both have an AUC.
struct Comparison {
  std::string name;       // the other method
  std::string reference;  // the method being compared against it
  SummaryStat auc_diff;   // per-record reference - other
  SummaryStat pct_diff;   // per-record 100 * (reference - other) / other
  double median_auc_gap = 0;  // median(reference AUCs) - median(other AUCs)
  double p_value = 1;         // one-sided Mann-Whitney, H1: reference > other
};

inline Comparison compare_methods(const MethodSummary& reference, const MethodSummary& other) {
  Comparison c;
  c.name = other.name;
  c.reference = reference.name;
  std::map<std::string, double> other_auc;
  for (const auto& f : other.folds)
    if (f.auc) other_auc[f.record_id] = *f.auc;
  std::vector<double> diff, pct;
  for (const auto& f : reference.folds) {
    const auto it = other_auc.find(f.record_id);
    if (!f.auc || it == other_auc.end()) continue;
    diff.push_back(*f.auc - it->second);
    if (it->second > 0) pct.push_back(100.0 * (*f.auc - it->second) / it->second);
  }
  c.auc_diff = summarize_values(diff);
  c.pct_diff = summarize_values(pct);
  const auto ra = reference.aucs();
  const auto oa = other.aucs();
  if (!ra.empty() && !oa.empty()) {
    c.median_auc_gap = median(ra) - median(oa);
    c.p_value = mann_whitney_one_sided(ra, oa).p_value;
  }
  return c;
}

}  // namespace tfburst
