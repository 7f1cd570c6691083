#pragma once

// End-to-end orchestration: load -> preprocess -> TFD slices -> train /
// detect / leave-one-record-out evaluation.

#include <string>
#include <vector>

#include "tfburst/cross_validation.hpp"
#include "tfburst/epoch_slicer.hpp"
#include "tfburst/pipeline/config.hpp"
#include "tfburst/pipeline/io.hpp"

namespace tfburst {

struct SliceAccounting {
  std::string record_id;
  double covered_seconds = 0;  // whole slices of record covered by epoch cores
  std::size_t total = 0;
  std::size_t burst = 0;
  std::size_t inter_burst = 0;
  std::size_t excluded = 0;

  std::size_t scored() const { return burst + inter_burst; }
  bool reconciles(double slice_rate) const {
    return total == static_cast<std::size_t>(std::llround(slice_rate * covered_seconds)) &&
           total == burst + inter_burst + excluded;
  }
};

inline SliceAccounting account(const RecordSlices& r, const EpochPlan& plan, std::size_t working_samples) {
  SliceAccounting a;
  a.record_id = r.record_id;
  const std::size_t sps = plan.samples_per_slice();
  a.covered_seconds = static_cast<double>((working_samples / sps) * sps) / plan.sample_rate;
  a.total = r.slices.size();
  a.burst = r.count(SliceLabel::burst);
  a.inter_burst = r.count(SliceLabel::inter_burst);
  a.excluded = r.count(SliceLabel::excluded);
  return a;
}

struct PreparedRecord {
  RecordSlices slices;
  SliceAccounting accounting;
};

inline PreparedRecord prepare_record(const SignalRecord& raw, const PipelineConfig& cfg) {
  const SignalRecord rec = preprocess(raw, cfg.preprocess);
  if (std::abs(rec.sample_rate - cfg.epoch.sample_rate) > 1e-9 * cfg.epoch.sample_rate)
    fail(ErrorCategory::data, raw.record_id + ": preprocessed rate " + format_double(rec.sample_rate) +
                                  " Hz does not match the epoch rate " + format_double(cfg.epoch.sample_rate) + " Hz");
  PreparedRecord p;
  p.slices.record_id = raw.record_id;
  p.slices.slices = slice_record(rec, cfg.epoch, cfg.kernel);
  p.accounting = account(p.slices, cfg.epoch, rec.size());
  return p;
}

inline std::vector<PreparedRecord> prepare_corpus(const CorpusManifest& manifest, const PipelineConfig& cfg,
                                                  std::vector<std::string>* warnings = nullptr) {
  std::vector<PreparedRecord> out;
  for (const ManifestEntry& e : manifest.records) out.push_back(prepare_record(load_record(e, warnings), cfg));
  return out;
}

inline std::vector<const FeatureSlice*> labeled_slices(const std::vector<PreparedRecord>& records) {
  std::vector<const FeatureSlice*> v;
  for (const auto& r : records)
    for (const auto& s : r.slices.slices)
      if (s.label != SliceLabel::excluded) v.push_back(&s);
  return v;
}

inline BurstDetector run_train(const std::vector<PreparedRecord>& records, const PipelineConfig& cfg,
                               FeatureMode mode = FeatureMode::tfd_slice, TrainLog* log = nullptr) {
  const auto slices = labeled_slices(records);
  if (slices.size() < 2) fail(ErrorCategory::data, "train: corpus has fewer than 2 labeled slices");
  return train_detector(slices, cfg.boost, mode, log);
}

struct DetectionTrace {
  std::string record_id;
  std::vector<double> slice_time;
  std::vector<double> p_burst;
};

inline DetectionTrace detect_record(const PreparedRecord& rec, const BurstDetector& det) {
  const std::size_t expected = det.mode == FeatureMode::tfd_slice ? rec.slices.slices.empty()
                                                                        ? 0
                                                                        : rec.slices.slices.front().features.size()
                                                                  : 1;
  if (!rec.slices.slices.empty() && expected != det.ensemble.feature_count)
    fail(ErrorCategory::invalid_argument, rec.slices.record_id + ": model expects " +
                                              std::to_string(det.ensemble.feature_count) + " features, slices have " +
                                              std::to_string(expected));
  DetectionTrace t;
  t.record_id = rec.slices.record_id;
  t.p_burst = det.burst_probability(rec.slices.slices);
  for (const auto& s : rec.slices.slices) t.slice_time.push_back(s.slice_time);
  return t;
}

inline std::string format_trace_csv(const DetectionTrace& t, double threshold = 0.5) {
  std::string s = "slice_time,p_burst,burst\n";
  for (std::size_t i = 0; i < t.p_burst.size(); ++i)
    s += format_double(t.slice_time[i]) + "," + format_double(t.p_burst[i]) + "," +
         (t.p_burst[i] >= threshold ? "1" : "0") + "\n";
  return s;
}

struct EvalResult {
  std::vector<SliceAccounting> accounting;
  MethodSummary proposed;
  MethodSummary baseline;
  Comparison comparison;
  std::vector<std::string> warnings;
};

inline constexpr const char* kProposedName = "proposed";
inline constexpr const char* kBaselineName = "TM-TFD";

// Leave-one-record-out evaluation of the TFD-slice detector and the
// time-marginal baseline.
inline EvalResult run_eval(const std::vector<PreparedRecord>& records, const PipelineConfig& cfg) {
  EvalResult r;
  std::vector<RecordSlices> rs;
  std::size_t labeled = 0;
  std::string counts;
  for (const auto& p : records) {
    r.accounting.push_back(p.accounting);
    rs.push_back(p.slices);
    if (p.accounting.scored() > 0) ++labeled;
    counts += "\n  " + p.accounting.record_id + ": burst=" + std::to_string(p.accounting.burst) +
              " inter_burst=" + std::to_string(p.accounting.inter_burst) +
              " excluded=" + std::to_string(p.accounting.excluded);
  }
  if (labeled < 2)
    fail(ErrorCategory::data, "eval: need at least 2 records with labeled slices; per-record counts:" + counts);
  if (records.size() < 3)
    r.warnings.push_back("eval: " + std::to_string(records.size()) +
                         " folds; confidence intervals need at least 3 and are omitted");

  r.proposed = summarize_method(kProposedName, FeatureMode::tfd_slice, loso_cv(rs, cfg.boost, FeatureMode::tfd_slice));
  r.baseline =
      summarize_method(kBaselineName, FeatureMode::time_marginal, loso_cv(rs, cfg.boost, FeatureMode::time_marginal));
  r.comparison = compare_methods(r.proposed, r.baseline);
  for (const auto& f : r.proposed.folds) {
    if (f.bias_only) r.warnings.push_back("eval: fold " + f.record_id + " trained a bias-only model");
    if (!f.auc) r.warnings.push_back("eval: record " + f.record_id + " lacks one class; no AUC");
  }
  for (const auto& a : r.accounting)
    if (!a.reconciles(cfg.epoch.slice_rate))
      r.warnings.push_back("eval: slice accounting does not reconcile for " + a.record_id);
  return r;
}

}  // namespace tfburst
