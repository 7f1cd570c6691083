#pragma once

// Evaluation and benchmark reports. Everything written here is a pure
// function of its inputs (no timestamps), so seeded reruns are
// byte-identical; bench timings are the exception and live in their own
// document.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfburst/pipeline/config.hpp"
#include "tfburst/pipeline/io.hpp"
#include "tfburst/pipeline/pipeline.hpp"
#include "tfburst/tf_engine.hpp"

namespace tfburst {

using ojson = nlohmann::ordered_json;

namespace detail {

inline ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

inline ojson summary_json(const SummaryStat& s) {
  ojson j;
  j["n"] = s.n;
  j["median"] = optional_number(s.median);
  if (s.ci) {
    j["ci_low"] = s.ci->low;
    j["ci_high"] = s.ci->high;
    j["jackknife_se"] = s.ci->standard_error;
  } else {
    j["ci_low"] = nullptr;
    j["ci_high"] = nullptr;
    j["jackknife_se"] = nullptr;
  }
  return j;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string summary_text(const SummaryStat& s, int digits) {
  if (!s.median) return "n/a";
  std::string t = fixed(*s.median, digits);
  if (s.ci) t += " (" + fixed(s.ci->low, digits) + " to " + fixed(s.ci->high, digits) + ")";
  return t;
}

inline std::string p_text(double p) { return p < 0.001 ? "<0.001" : fixed(p, 3); }

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline ojson method_json(const MethodSummary& m) {
  ojson j;
  j["name"] = m.name;
  j["feature_mode"] = std::string(feature_mode_name(m.mode));
  j["auc"] = summary_json(m.auc);
  j["sensitivity_at_0.5"] = summary_json(m.sensitivity);
  j["specificity_at_0.5"] = summary_json(m.specificity);
  ojson folds = ojson::array();
  for (const auto& f : m.folds) {
    ojson fj;
    fj["record_id"] = f.record_id;
    fj["auc"] = optional_number(f.auc);
    fj["sensitivity_at_0.5"] = optional_number(f.sensitivity_at_half);
    fj["specificity_at_0.5"] = optional_number(f.specificity_at_half);
    fj["n_scored"] = f.scores.size();
    fj["n_burst"] = std::count(f.labels.begin(), f.labels.end(), 1);
    fj["n_train"] = f.n_train;
    fj["bias_only"] = f.bias_only;
    folds.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds);
  return j;
}

}  // namespace detail

inline ojson eval_report_json(const EvalResult& r, const PipelineConfig& cfg) {
  ojson doc;
  doc["format"] = "tfburst-eval-report";
  doc["version"] = 1;
  ojson c;
  for (const auto& [k, v] : config_map(cfg)) c[k] = v;
  doc["config"] = std::move(c);

  ojson acct = ojson::array();
  bool all_ok = true;
  for (const auto& a : r.accounting) {
    ojson aj;
    aj["record_id"] = a.record_id;
    aj["covered_seconds"] = a.covered_seconds;
    aj["slices"] = a.total;
    aj["burst"] = a.burst;
    aj["inter_burst"] = a.inter_burst;
    aj["excluded"] = a.excluded;
    aj["scored"] = a.scored();
    aj["reconciles"] = a.reconciles(cfg.epoch.slice_rate);
    all_ok = all_ok && a.reconciles(cfg.epoch.slice_rate);
    acct.push_back(std::move(aj));
  }
  doc["slice_accounting"] = std::move(acct);
  doc["slice_accounting_reconciles"] = all_ok;

  doc["methods"] = ojson::array({detail::method_json(r.proposed), detail::method_json(r.baseline)});
  ojson cmp;
  cmp["reference"] = r.comparison.reference;
  cmp["other"] = r.comparison.name;
  cmp["median_auc_gap"] = r.comparison.median_auc_gap;
  cmp["auc_difference"] = detail::summary_json(r.comparison.auc_diff);
  cmp["percent_difference"] = detail::summary_json(r.comparison.pct_diff);
  cmp["p_value_one_sided_mann_whitney"] = r.comparison.p_value;
  doc["comparison"] = std::move(cmp);
  doc["warnings"] = r.warnings;
  return doc;
}

// One row per method: median AUC with its jackknife CI, sensitivity and
// specificity at 0.5, and (for the baseline) the per-record % AUC
// difference of the proposed method over it with the Mann-Whitney p-value.
inline std::string eval_table_text(const EvalResult& r) {
  using detail::pad;
  const std::size_t w0 = 10, w = 26;
  std::string s = pad("Method", w0) + pad("AUC median (95% CI)", w) + pad("Sensitivity (95% CI)", w) +
                  pad("Specificity (95% CI)", w) + pad("% difference (95% CI)", w) + "p-value\n";
  auto row = [&](const MethodSummary& m, bool is_ref) {
    s += pad(m.name, w0) + pad(detail::summary_text(m.auc, 3), w) + pad(detail::summary_text(m.sensitivity, 3), w) +
         pad(detail::summary_text(m.specificity, 3), w);
    if (is_ref) {
      s += pad("-", w) + "-\n";
    } else {
      s += pad(detail::summary_text(r.comparison.pct_diff, 1), w) + detail::p_text(r.comparison.p_value) + "\n";
    }
  };
  row(r.proposed, true);
  row(r.baseline, false);
  return s;
}

inline std::string roc_csv(const EvalResult& r) {
  std::string s = "method,record_id,threshold,fpr,tpr\n";
  for (const MethodSummary* m : {&r.proposed, &r.baseline}) {
    for (const auto& f : m->folds) {
      if (!f.auc) continue;
      for (const RocPoint& p : roc_curve(f.scores, f.labels))
        s += m->name + "," + f.record_id + "," + format_double(p.threshold) + "," + format_double(p.fpr) + "," +
             format_double(p.tpr) + "\n";
    }
  }
  return s;
}

inline std::string auc_by_record_csv(const EvalResult& r) {
  std::string s = "record_id," + r.proposed.name + "," + r.baseline.name + "\n";
  std::map<std::string, std::optional<double>> base;
  for (const auto& f : r.baseline.folds) base[f.record_id] = f.auc;
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& f : r.proposed.folds) s += f.record_id + "," + cell(f.auc) + "," + cell(base[f.record_id]) + "\n";
  return s;
}

inline void write_eval_outputs(const EvalResult& r, const PipelineConfig& cfg, const fs::path& dir) {
  write_text_file(dir / "report.json", eval_report_json(r, cfg).dump(2) + "\n");
  write_text_file(dir / "table.txt", eval_table_text(r));
  write_text_file(dir / "roc_points.csv", roc_csv(r));
  write_text_file(dir / "auc_by_record.csv", auc_by_record_csv(r));
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchResult {
  GridSpec grid;
  CostReport costs;
  bool timed = false;
  std::string untimed_reason;
  double median_ms = 0;
  double min_ms = 0;
  int runs = 0;
  WorkspaceStats workspace;
};

// Kernel for timing a grid: the detection kernel with its lag window
// resized to span the grid's lag half-length.
inline KernelSpec bench_kernel(const GridSpec& g) {
  KernelSpec k = default_kernel();
  k.lag_window.length = 2 * g.lag_half_length - 1;
  return k;
}

inline BenchResult run_benchmark(const GridSpec& grid, int runs = 20, std::uint64_t seed = 1) {
  grid.validate();
  require(runs >= 1, "bench: runs must be >= 1");
  BenchResult b;
  b.grid = grid;
  b.costs = cost_report(grid);
  b.runs = runs;
  const KernelSpec kernel = bench_kernel(grid);
  b.untimed_reason = efficient_grid_violation(grid.n_signal, kernel, grid);
  if (!b.untimed_reason.empty()) return b;

  Rng rng(seed);
  AnalyticSignal z;
  z.sample_rate = 128;
  z.values.resize(grid.n_signal);
  for (auto& v : z.values) v = cplx(rng.normal(), rng.normal());
  std::vector<double> ms;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const TFDMatrix tfd = separable_tfd_efficient(z, kernel, grid, &b.workspace);
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    if (tfd.values.empty()) fail(ErrorCategory::data, "bench: empty TFD");
  }
  b.median_ms = median(ms);
  b.min_ms = *std::min_element(ms.begin(), ms.end());
  b.timed = true;
  return b;
}

inline bool is_published_grid(const GridSpec& g) {
  return g.n_signal == 4608 && g.n_time == 144 && g.n_freq == 128 && g.lag_half_length == 31;
}

inline std::string bench_text(const BenchResult& b) {
  using detail::pad;
  const auto& c = b.costs;
  const bool pub = is_published_grid(b.grid);
  std::string s = "grid: N=" + std::to_string(b.grid.n_signal) + " Ph=" + std::to_string(b.grid.lag_half_length) +
                  " Ntime=" + std::to_string(b.grid.n_time) + " Nfreq=" + std::to_string(b.grid.n_freq) + "\n\n";
  s += pad("quantity", 26) + pad("computed", 18) + (pub ? "published" : "") + "\n";
  auto line = [&](const std::string& name, const std::string& v, const std::string& published) {
    s += pad(name, 26) + pad(v, 18) + (pub ? published : "") + "\n";
  };
  line("ops full", std::to_string(c.ops_full), std::to_string(PublishedCosts::ops_full));
  line("ops efficient", std::to_string(c.ops_efficient), std::to_string(PublishedCosts::ops_efficient));
  line("memory full (reals)", std::to_string(c.mem_full), std::to_string(PublishedCosts::mem_full));
  line("memory efficient (reals)", std::to_string(c.mem_efficient), std::to_string(PublishedCosts::mem_efficient));
  line("ops reduction (%)", detail::fixed(c.reduction_ops, 3), detail::fixed(PublishedCosts::reduction_ops, 1));
  line("memory reduction (%)", detail::fixed(c.reduction_mem, 3), detail::fixed(PublishedCosts::reduction_mem, 1));
  s += "\n";
  if (b.timed) {
    s += "efficient TFD wall-clock: median " + detail::fixed(b.median_ms, 3) + " ms, min " +
         detail::fixed(b.min_ms, 3) + " ms over " + std::to_string(b.runs) + " runs\n";
    s += "TFD working buffers: " + std::to_string(b.workspace.buffer_reals) + " reals + FFT plans " +
         std::to_string(b.workspace.fft_plan_reals) + " reals = " + std::to_string(b.workspace.total_reals()) +
         " reals (" + detail::fixed(static_cast<double>(b.workspace.total_bytes()) / (1024.0 * 1024.0), 3) +
         " MiB)\n";
  } else {
    s += "efficient TFD not timed: " + b.untimed_reason + "\n";
  }
  return s;
}

// "N=4608,Ph=31,Ntime=144,Nfreq=128"
inline GridSpec parse_grid(std::string_view text) {
  GridSpec g;
  bool seen[4] = {false, false, false, false};
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string_view item = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) fail(ErrorCategory::parse, "grid: expected key=value, got \"" + std::string(item) + "\"");
    const std::string_view key = detail::trim(item.substr(0, eq));
    const auto v = detail::parse_double(item.substr(eq + 1));
    if (!v || *v < 1 || *v != std::floor(*v))
      fail(ErrorCategory::parse, "grid: " + std::string(key) + " must be a positive integer");
    const auto n = static_cast<std::size_t>(*v);
    if (key == "N") {
      g.n_signal = n;
      seen[0] = true;
    } else if (key == "Ph") {
      g.lag_half_length = static_cast<int>(n);
      seen[1] = true;
    } else if (key == "Ntime") {
      g.n_time = n;
      seen[2] = true;
    } else if (key == "Nfreq") {
      g.n_freq = n;
      seen[3] = true;
    } else {
      fail(ErrorCategory::parse, "grid: unknown key \"" + std::string(key) + "\" (expected N, Ph, Ntime, Nfreq)");
    }
  }
  for (int i = 0; i < 4; ++i)
    if (!seen[i]) fail(ErrorCategory::parse, "grid: need all of N, Ph, Ntime, Nfreq");
  return g;
}

}  // namespace tfburst
