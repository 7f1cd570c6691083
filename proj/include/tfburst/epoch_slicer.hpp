#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tfburst/error.hpp"
#include "tfburst/fft.hpp"
#include "tfburst/signal_pre.hpp"
#include "tfburst/tf_engine.hpp"

namespace tfburst {

// Epoch geometry. Defaults: 32-s cores padded 2 s each side at 64 Hz,
// interpolated x2, sampled at 4 slices/s, 64 frequency bins kept.
struct EpochPlan {
  double core_seconds = 32;
  double pad_seconds = 2;
  double sample_rate = 64;
  int interpolation_factor = 2;
  double slice_rate = 4;
  int kept_freq_bins = 64;

  static std::size_t as_count(double v, const char* what) {
    const double r = std::round(v);
    require(r >= 1 && std::abs(v - r) < 1e-9 * std::max(1.0, std::abs(v)),
            std::string("EpochPlan: ") + what + " must be a positive integer, got " + std::to_string(v));
    return static_cast<std::size_t>(r);
  }

  std::size_t core_samples() const { return as_count(core_seconds * sample_rate, "core_seconds * sample_rate"); }
  std::size_t pad_samples() const { return as_count(pad_seconds * sample_rate, "pad_seconds * sample_rate"); }
  std::size_t padded_samples() const { return core_samples() + 2 * pad_samples(); }
  std::size_t samples_per_slice() const { return as_count(sample_rate / slice_rate, "sample_rate / slice_rate"); }
  std::size_t slices_per_core() const { return as_count(core_seconds * slice_rate, "core_seconds * slice_rate"); }
  std::size_t trim_slices() const { return as_count(pad_seconds * slice_rate, "pad_seconds * slice_rate"); }

  // Analytic-signal length fed to the TFD (N).
  std::size_t n_signal() const { return padded_samples() * static_cast<std::size_t>(interpolation_factor); }
  std::size_t n_time() const { return slices_per_core() + 2 * trim_slices(); }
  // The interpolated signal occupies the lower half of the TFD frequency
  // axis, so twice the kept bins are computed.
  std::size_t n_freq() const { return 2 * static_cast<std::size_t>(kept_freq_bins); }

  GridSpec grid(const KernelSpec& kernel) const {
    return {n_signal(), n_time(), n_freq(), lag_half_length(kernel.lag_window.length)};
  }

  void validate() const {
    require(pad_seconds > 0, "EpochPlan: pad_seconds must be positive");
    require(interpolation_factor >= 1, "EpochPlan: interpolation_factor must be >= 1");
    require(kept_freq_bins >= 1, "EpochPlan: kept_freq_bins must be >= 1");
    (void)padded_samples();
    (void)slices_per_core();
    (void)trim_slices();
    require(samples_per_slice() * slices_per_core() == core_samples(),
            "EpochPlan: slices must tile the core exactly");
    require(n_signal() % n_time() == 0, "EpochPlan: n_time must divide the interpolated epoch length");
    require(n_signal() % n_freq() == 0, "EpochPlan: n_freq must divide the interpolated epoch length");
  }
};

// Sample ranges of one epoch at the working rate. Padded bounds may fall
// outside [0, record length); those samples are reflected.
struct EpochDescriptor {
  std::ptrdiff_t core_start = 0;
  std::ptrdiff_t core_end = 0;
  std::ptrdiff_t padded_start = 0;
  std::ptrdiff_t padded_end = 0;
  std::size_t first_slice = 0;  // slices before this index duplicate the previous epoch
};

// Cores tile the record with hop = core length. A trailing remainder (rounded
// down to whole slices) is covered by one right-aligned epoch whose leading
// slices, already emitted by the previous epoch, are skipped.
inline std::vector<EpochDescriptor> plan_epochs(std::size_t record_length, const EpochPlan& plan) {
  plan.validate();
  const std::size_t core = plan.core_samples();
  const std::size_t pad = plan.pad_samples();
  const std::size_t sps = plan.samples_per_slice();
  const std::size_t usable = (record_length / sps) * sps;
  if (usable < core) {
    fail(ErrorCategory::invalid_argument, "plan_epochs: record of " + std::to_string(record_length) +
                                              " samples is shorter than one core epoch (" +
                                              std::to_string(core) + " samples)");
  }
  auto make = [&](std::size_t start, std::size_t first_slice) {
    EpochDescriptor d;
    d.core_start = static_cast<std::ptrdiff_t>(start);
    d.core_end = static_cast<std::ptrdiff_t>(start + core);
    d.padded_start = d.core_start - static_cast<std::ptrdiff_t>(pad);
    d.padded_end = d.core_end + static_cast<std::ptrdiff_t>(pad);
    d.first_slice = first_slice;
    return d;
  };
  std::vector<EpochDescriptor> epochs;
  std::size_t start = 0;
  for (; start + core <= usable; start += core) epochs.push_back(make(start, 0));
  if (start < usable) {
    const std::size_t tail = usable - core;
    epochs.push_back(make(tail, (start - tail) / sps));
  }
  return epochs;
}

// Copies the padded epoch, reflecting about the record edges (edge sample
// not repeated).
inline std::vector<double> padded_segment(std::span<const double> x, const EpochDescriptor& d) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  require(n >= 2, "padded_segment: record too short");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(d.padded_end - d.padded_start));
  for (std::ptrdiff_t i = d.padded_start; i < d.padded_end; ++i) {
    std::ptrdiff_t j = i;
    if (j < 0) j = -j;
    if (j >= n) j = 2 * (n - 1) - j;
    require(j >= 0 && j < n, "padded_segment: padding exceeds record length");
    out.push_back(x[static_cast<std::size_t>(j)]);
  }
  return out;
}

// Band-limited interpolation by zero-padding the spectrum. The output holds
// `factor` x N samples with out[factor * n] == in[n]; the Nyquist bin of an
// even-length input is split evenly between the two new half-band edges.
// Energy: sum |out|^2 = factor * sum |in|^2 when the Nyquist bin is empty.
inline AnalyticSignal interpolate(const AnalyticSignal& z, int factor) {
  require(z.size() >= 1, "interpolate: empty signal");
  require(factor >= 1, "interpolate: factor must be >= 1");
  if (factor == 1) return z;
  const std::size_t n = z.size();
  const std::size_t m = n * static_cast<std::size_t>(factor);
  Fft fft;
  const std::vector<cplx> spec = fft.forward(z.values);
  std::vector<cplx> wide(m, cplx{});
  const double gain = static_cast<double>(factor);
  const std::size_t pos = (n + 1) / 2;  // bins 0 .. pos-1 are non-negative
  for (std::size_t k = 0; k < pos; ++k) wide[k] = gain * spec[k];
  for (std::size_t k = n / 2 + 1; k < n; ++k) wide[k + m - n] = gain * spec[k];
  if (n % 2 == 0) {
    wide[n / 2] = 0.5 * gain * spec[n / 2];
    wide[m - n / 2] = 0.5 * gain * spec[n / 2];
  }
  return {fft.inverse(wide), z.sample_rate * gain};
}

inline AnalyticSignal interpolate_x2(const AnalyticSignal& z) { return interpolate(z, 2); }

// Drops the padded slices at both ends and the upper half of the frequency
// axis (fs/4 .. fs/2 of the interpolated signal).
inline TFDMatrix trim_tfd(const TFDMatrix& tfd, const EpochPlan& plan) {
  plan.validate();
  if (tfd.n_time != plan.n_time() || tfd.n_freq != plan.n_freq()) {
    fail(ErrorCategory::invalid_argument, "trim_tfd: expected " + std::to_string(plan.n_time()) + "x" +
                                              std::to_string(plan.n_freq()) + " TFD, got " +
                                              std::to_string(tfd.n_time) + "x" + std::to_string(tfd.n_freq));
  }
  const std::size_t skip = plan.trim_slices();
  const std::size_t rows = plan.slices_per_core();
  const auto cols = static_cast<std::size_t>(plan.kept_freq_bins);
  TFDMatrix out(rows, cols);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t k = 0; k < cols; ++k) out.at(t, k) = tfd.at(t + skip, k);
  out.slice_rate = tfd.slice_rate;
  out.freq_resolution = tfd.freq_resolution;
  out.sample_rate = tfd.sample_rate;
  out.imag_residue = tfd.imag_residue;
  out.origin_time = tfd.origin_time + static_cast<double>(skip) / tfd.slice_rate;
  return out;
}

enum class SliceLabel : std::uint8_t { inter_burst = 0, burst = 1, excluded = 2 };

inline std::string_view slice_label_name(SliceLabel l) {
  switch (l) {
    case SliceLabel::inter_burst: return "inter_burst";
    case SliceLabel::burst: return "burst";
    case SliceLabel::excluded: return "excluded";
  }
  return "excluded";
}

// One TFD time slice: the frequency profile over a quarter second of EEG.
struct FeatureSlice {
  std::vector<double> features;
  SliceLabel label = SliceLabel::excluded;
  std::string record_id;
  double slice_time = 0;  // seconds, center of the covered span
};

// Purity rule: every sample must carry the same consensus class.
inline SliceLabel label_span(std::span<const Label> labels) {
  if (labels.empty()) return SliceLabel::excluded;
  const Label first = labels.front();
  if (first != Label::burst && first != Label::inter_burst) return SliceLabel::excluded;
  for (Label l : labels)
    if (l != first) return SliceLabel::excluded;
  return first == Label::burst ? SliceLabel::burst : SliceLabel::inter_burst;
}

// `labels` covers the epoch core at the working rate; an empty span means
// unlabeled (every slice excluded). Slice i covers core samples
// [i * sps, (i + 1) * sps).
inline std::vector<FeatureSlice> extract_slices(const TFDMatrix& tfd, std::span<const Label> labels,
                                                const EpochPlan& plan, const std::string& record_id = {}) {
  plan.validate();
  const std::size_t rows = plan.slices_per_core();
  const auto cols = static_cast<std::size_t>(plan.kept_freq_bins);
  if (tfd.n_time != rows || tfd.n_freq != cols) {
    fail(ErrorCategory::invalid_argument, "extract_slices: expected a trimmed " + std::to_string(rows) + "x" +
                                              std::to_string(cols) + " TFD");
  }
  const std::size_t sps = plan.samples_per_slice();
  if (!labels.empty() && labels.size() != plan.core_samples()) {
    fail(ErrorCategory::invalid_argument, "extract_slices: " + std::to_string(labels.size()) +
                                              " labels for a core of " + std::to_string(plan.core_samples()) +
                                              " samples");
  }
  std::vector<FeatureSlice> out;
  out.reserve(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    FeatureSlice s;
    const auto row = tfd.slice(t);
    s.features.assign(row.begin(), row.end());
    s.label = labels.empty() ? SliceLabel::excluded : label_span(labels.subspan(t * sps, sps));
    s.record_id = record_id;
    s.slice_time = tfd.origin_time + (static_cast<double>(t) + 0.5) / plan.slice_rate;
    out.push_back(std::move(s));
  }
  return out;
}

// Full epoch transform: padded segment -> analytic signal -> interpolation ->
// decimated TFD -> trim. `x` is the preprocessed record at plan.sample_rate.
inline TFDMatrix epoch_tfd(std::span<const double> x, const EpochDescriptor& d, const EpochPlan& plan,
                           const KernelSpec& kernel, WorkspaceStats* stats = nullptr) {
  const std::vector<double> segment = padded_segment(x, d);
  const AnalyticSignal z = interpolate(analytic_signal(segment, plan.sample_rate), plan.interpolation_factor);
  TFDMatrix tfd = separable_tfd_efficient(z, kernel, plan.grid(kernel), stats);
  tfd.origin_time = static_cast<double>(d.padded_start) / plan.sample_rate;
  return trim_tfd(tfd, plan);
}

// All slices of a preprocessed record, in time order, each core quarter
// second exactly once.
inline std::vector<FeatureSlice> slice_record(const SignalRecord& record, const EpochPlan& plan,
                                              const KernelSpec& kernel) {
  record.validate();
  require(std::abs(record.sample_rate - plan.sample_rate) < 1e-9 * plan.sample_rate,
          "slice_record: record rate " + std::to_string(record.sample_rate) + " Hz does not match plan rate " +
              std::to_string(plan.sample_rate) + " Hz");
  std::vector<FeatureSlice> out;
  for (const EpochDescriptor& d : plan_epochs(record.size(), plan)) {
    const TFDMatrix tfd = epoch_tfd(record.samples, d, plan, kernel);
    std::span<const Label> core_labels;
    if (!record.labels.empty())
      core_labels = std::span<const Label>(record.labels).subspan(static_cast<std::size_t>(d.core_start),
                                                                  plan.core_samples());
    auto slices = extract_slices(tfd, core_labels, plan, record.record_id);
    for (std::size_t i = d.first_slice; i < slices.size(); ++i) out.push_back(std::move(slices[i]));
  }
  return out;
}

}  // namespace tfburst
