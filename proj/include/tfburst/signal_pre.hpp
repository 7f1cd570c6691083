#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tfburst/butterworth.hpp"
#include "tfburst/error.hpp"
#include "tfburst/fft.hpp"

namespace tfburst {

enum class Label : std::uint8_t {
  inter_burst = 0,
  burst = 1,
  disagreement = 2,
  unlabeled = 3,
};

// One channel of EEG with optional per-sample annotation.
struct SignalRecord {
  std::vector<double> samples;  // microvolts
  double sample_rate = 0;       // Hz
  std::vector<Label> labels;    // empty, or one per sample
  std::string record_id;

  std::size_t size() const { return samples.size(); }

  Label label_at(std::size_t i) const { return labels.empty() ? Label::unlabeled : labels[i]; }

  void validate() const {
    require(sample_rate > 0, "SignalRecord: sample_rate must be positive");
    require(labels.empty() || labels.size() == samples.size(),
            "SignalRecord: labels must be empty or match the sample count");
  }
};

struct AnalyticSignal {
  std::vector<cplx> values;
  double sample_rate = 0;

  std::size_t size() const { return values.size(); }
};

enum class FilterDesign { butterworth };

struct FilterSpec {
  int order = 5;
  double low_cut = 0.5;   // Hz
  double high_cut = 30.0; // Hz
  FilterDesign design = FilterDesign::butterworth;

  void validate(double sample_rate) const {
    require(order >= 1, "FilterSpec: order must be >= 1");
    require(low_cut > 0 && low_cut < high_cut && high_cut < sample_rate / 2,
            "FilterSpec: need 0 < low_cut < high_cut < sample_rate/2");
  }
};

namespace detail {

// Forward-backward filtering with point-reflected padding of `pad` samples
// on each side and steady-state initial conditions at both passes.
inline std::vector<double> filtfilt(const SosFilter& f, std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  require(n > pad, "filtfilt: signal must be longer than the edge padding");
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  f.filter_inplace(ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  f.filter_inplace(ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace detail

// Anti-aliasing filter used by resample: zero-phase 8th-order Butterworth
// low-pass at 0.45 x target rate.
inline constexpr int kAntiAliasOrder = 8;
inline constexpr double kAntiAliasFraction = 0.45;

inline SignalRecord resample(const SignalRecord& record, double target_rate) {
  record.validate();
  require(target_rate > 0, "resample: target_rate must be positive");
  const double ratio = record.sample_rate / target_rate;
  const auto factor = static_cast<std::size_t>(std::llround(ratio));
  if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9 * ratio) {
    fail(ErrorCategory::invalid_argument,
         "resample: " + std::to_string(record.sample_rate) + " Hz -> " + std::to_string(target_rate) +
             " Hz is not an integer decimation (rational resampling is unsupported)");
  }
  if (factor == 1) return record;

  const SosFilter lp = butterworth_lowpass(kAntiAliasOrder, kAntiAliasFraction * target_rate, record.sample_rate);
  const std::size_t pad = 3 * static_cast<std::size_t>(kAntiAliasOrder);
  require(record.size() > pad, "resample: record too short for the anti-aliasing filter");
  const std::vector<double> smooth = detail::filtfilt(lp, record.samples, pad);

  SignalRecord out;
  out.record_id = record.record_id;
  out.sample_rate = record.sample_rate / static_cast<double>(factor);
  const std::size_t n_out = record.size() / factor;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out.samples[i] = smooth[i * factor];
  if (!record.labels.empty()) {
    out.labels.resize(n_out);
    for (std::size_t i = 0; i < n_out; ++i) out.labels[i] = record.labels[i * factor];
  }
  return out;
}

inline SignalRecord zero_phase_bandpass(const SignalRecord& record, const FilterSpec& spec) {
  record.validate();
  spec.validate(record.sample_rate);
  const std::size_t pad = 3 * static_cast<std::size_t>(spec.order);
  if (record.size() <= pad) {
    fail(ErrorCategory::invalid_argument,
         "zero_phase_bandpass: signal of " + std::to_string(record.size()) +
             " samples is shorter than 3 x filter order");
  }
  const SosFilter bp = butterworth_bandpass(spec.order, spec.low_cut, spec.high_cut, record.sample_rate);
  SignalRecord out = record;
  out.samples = detail::filtfilt(bp, record.samples, pad);
  return out;
}

// y[n] = x[n+1] - x[n]; the last sample is set to 0 so labels stay aligned.
inline SignalRecord forward_difference(const SignalRecord& record) {
  require(record.size() >= 2, "forward_difference: need at least 2 samples");
  SignalRecord out = record;
  const auto& x = record.samples;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) out.samples[i] = x[i + 1] - x[i];
  out.samples.back() = 0.0;
  return out;
}

// Discrete analytic signal: DC and Nyquist bins kept, positive bins doubled,
// negative bins zeroed.
inline AnalyticSignal analytic_signal(std::span<const double> x, double sample_rate) {
  require(x.size() >= 2, "analytic_signal: need at least 2 samples");
  const std::size_t n = x.size();
  Fft fft;
  std::vector<cplx> spec = fft.forward_real(x);
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (n % 2 == 0 && k == half) continue;
    if (k <= (n - 1) / 2) {
      spec[k] *= 2.0;
    } else {
      spec[k] = 0.0;
    }
  }
  return {fft.inverse(spec), sample_rate};
}

inline AnalyticSignal analytic_signal(const SignalRecord& record) {
  return analytic_signal(record.samples, record.sample_rate);
}

// Record conditioning ahead of the TFD: decimate to the working rate,
// band-pass, then whiten with a forward difference.
struct PreprocessSpec {
  double working_rate = 64;
  FilterSpec filter;
  bool whitening = true;

  void validate() const {
    require(working_rate > 0, "PreprocessSpec: working_rate must be positive");
    filter.validate(working_rate);
  }
};

inline SignalRecord preprocess(const SignalRecord& record, const PreprocessSpec& spec) {
  spec.validate();
  SignalRecord r = zero_phase_bandpass(resample(record, spec.working_rate), spec.filter);
  return spec.whitening ? forward_difference(r) : r;
}

// Expected power gain of preprocess() for a stationary input with the given
// power spectral density shape, sampled at the `n` bin frequencies
// k * fs / n, 0 < k < n/2. Aliasing is ignored.
template <typename Psd>
double preprocess_power_gain(const Psd& psd, std::size_t n, double fs, const PreprocessSpec& spec) {
  const SosFilter aa = butterworth_lowpass(kAntiAliasOrder, kAntiAliasFraction * spec.working_rate, fs);
  const SosFilter bp =
      butterworth_bandpass(spec.filter.order, spec.filter.low_cut, spec.filter.high_cut, spec.working_rate);
  const bool decimates = fs > spec.working_rate * (1 + 1e-9);
  constexpr double two_pi = 6.283185307179586;
  double in = 0, out = 0;
  for (std::size_t k = 1; 2 * k < n; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    const double p = psd(f);
    in += p;
    if (f >= spec.working_rate / 2) continue;
    // Zero-phase filtering applies each magnitude response twice.
    double w = std::pow(std::abs(bp.response(two_pi * f / spec.working_rate)), 4);
    if (decimates) w *= std::pow(std::abs(aa.response(two_pi * f / fs)), 4);
    if (spec.whitening) {
      const double sn = std::sin(two_pi / 2 * f / spec.working_rate);
      w *= 4 * sn * sn;
    }
    out += p * w;
  }
  return in > 0 ? out / in : 0.0;
}

}  // namespace tfburst
