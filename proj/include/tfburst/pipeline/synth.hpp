#pragma once

// Synthetic burst-suppression EEG with exact ground truth.
//
// Each record alternates burst and inter-burst segments. The background is
// pink noise; bursts fade in band-limited noise at a higher level (or, in
// equal-energy mode, at the level that matches the background's power after
// preprocessing, so only spectral shape separates the classes).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tfburst/error.hpp"
#include "tfburst/fft.hpp"
#include "tfburst/pipeline/io.hpp"
#include "tfburst/signal_pre.hpp"

namespace tfburst {

// mt19937_64 with explicit conversions: the standard distributions are
// implementation-defined, which would break byte-identical corpora across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }  // [0, 1)

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0;
  bool has_spare_ = false;
};

// splitmix64 finalizer: independent per-record streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class BurstSpectrum {
  band_limited,  // flat within burst_low..burst_high
  background,    // same pink spectrum as the background
};

struct SynthConfig {
  int n_records = 36;
  double duration_seconds = 600;
  double burst_low = 1;    // Hz
  double burst_high = 10;  // Hz
  double burst_amplitude_ratio = 4;  // burst RMS / inter-burst RMS
  double mean_burst_seconds = 6;
  double mean_interburst_seconds = 4;
  double pink_exponent = 1;  // background PSD ~ 1/f^exponent
  bool equal_energy_mode = false;
  BurstSpectrum burst_spectrum = BurstSpectrum::band_limited;
  std::uint64_t seed = 1;
  double native_rate = 256;     // Hz
  double background_rms = 10;   // microvolts
  double ramp_seconds = 0.25;   // burst onset/offset fade

  void validate() const {
    require(n_records >= 1, "SynthConfig: n_records must be >= 1");
    require(duration_seconds > 0, "SynthConfig: duration_seconds must be positive");
    require(burst_low > 0 && burst_low < burst_high && burst_high < 32,
            "SynthConfig: need 0 < burst_low < burst_high < 32 Hz");
    require(burst_high < native_rate / 2, "SynthConfig: burst band must lie below native Nyquist");
    require(burst_amplitude_ratio > 0, "SynthConfig: burst_amplitude_ratio must be positive");
    require(mean_burst_seconds > 0 && mean_interburst_seconds > 0, "SynthConfig: mean durations must be positive");
    require(pink_exponent >= 0, "SynthConfig: pink_exponent must be >= 0");
    require(native_rate > 0 && background_rms > 0, "SynthConfig: native_rate and background_rms must be positive");
    require(ramp_seconds >= 0, "SynthConfig: ramp_seconds must be >= 0");
  }

  std::size_t n_samples() const { return static_cast<std::size_t>(std::llround(duration_seconds * native_rate)); }
};

inline constexpr double kPinkFloorHz = 0.1;

struct SyntheticRecord {
  SignalRecord record;  // native rate, labels rasterized
  std::vector<Interval> intervals;
};

namespace detail {

inline double pink_psd(double f, double exponent) {
  if (f <= 0) return 0;
  return std::pow(std::max(f, kPinkFloorHz), -exponent);
}

inline double band_psd(double f, double lo, double hi) { return f >= lo && f <= hi ? 1.0 : 0.0; }

// Gaussian noise of length n with the given PSD shape, scaled to unit RMS.
template <typename Psd>
std::vector<double> spectral_noise(std::size_t n, double fs, const Psd& psd, Rng& rng) {
  std::vector<cplx> spec(n, cplx(0, 0));
  for (std::size_t k = 1; 2 * k < n; ++k) {
    const double a = std::sqrt(psd(static_cast<double>(k) * fs / static_cast<double>(n)));
    const double re = rng.normal();
    const double im = rng.normal();
    spec[k] = a * cplx(re, im);
    spec[n - k] = std::conj(spec[k]);
  }
  Fft fft;
  const std::vector<cplx> t = fft.inverse(spec);
  std::vector<double> x(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = t[i].real();
    ss += x[i] * x[i];
  }
  const double rms = std::sqrt(ss / static_cast<double>(n));
  if (rms > 0)
    for (double& v : x) v /= rms;
  return x;
}

}  // namespace detail

// Alternating segment schedule in samples. Durations are 1 s plus an
// exponential excess, so the mean equals the configured mean (floor 1 s).
inline std::vector<Interval> synth_schedule(const SynthConfig& cfg, Rng& rng) {
  const double p_burst = cfg.mean_burst_seconds / (cfg.mean_burst_seconds + cfg.mean_interburst_seconds);
  bool burst = rng.uniform() < p_burst;
  const std::size_t n = cfg.n_samples();
  std::vector<Interval> out;
  std::size_t start = 0;
  while (start < n) {
    const double mean = burst ? cfg.mean_burst_seconds : cfg.mean_interburst_seconds;
    const double dur = mean > 1 ? 1.0 + rng.exponential(mean - 1.0) : 1.0;
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(dur * cfg.native_rate)));
    const std::size_t end = std::min(n, start + len);
    out.push_back({static_cast<double>(start) / cfg.native_rate, static_cast<double>(end) / cfg.native_rate,
                   burst ? Label::burst : Label::inter_burst});
    start = end;
    burst = !burst;
  }
  return out;
}

// Burst RMS relative to background RMS for the configured mode.
inline double burst_level(const SynthConfig& cfg, const PreprocessSpec& pre) {
  if (!cfg.equal_energy_mode) return cfg.burst_amplitude_ratio;
  const std::size_t n = cfg.n_samples();
  const auto pink = [&](double f) { return detail::pink_psd(f, cfg.pink_exponent); };
  const auto band = [&](double f) { return detail::band_psd(f, cfg.burst_low, cfg.burst_high); };
  const double g_bg = preprocess_power_gain(pink, n, cfg.native_rate, pre);
  const double g_burst = cfg.burst_spectrum == BurstSpectrum::background
                             ? g_bg
                             : preprocess_power_gain(band, n, cfg.native_rate, pre);
  require(g_burst > 0, "SynthConfig: burst band is removed entirely by preprocessing");
  return std::sqrt(g_bg / g_burst);
}

inline std::string synth_record_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "syn%03d", index);
  return buf;
}

inline SyntheticRecord generate_record(const SynthConfig& cfg, int index, const PreprocessSpec& pre = {}) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  const std::size_t n = cfg.n_samples();
  const double fs = cfg.native_rate;

  SyntheticRecord out;
  out.intervals = synth_schedule(cfg, rng);
  const std::vector<double> bg =
      detail::spectral_noise(n, fs, [&](double f) { return detail::pink_psd(f, cfg.pink_exponent); }, rng);
  std::vector<double> bu;
  if (cfg.burst_spectrum == BurstSpectrum::background) {
    bu = detail::spectral_noise(n, fs, [&](double f) { return detail::pink_psd(f, cfg.pink_exponent); }, rng);
  } else {
    bu = detail::spectral_noise(
        n, fs, [&](double f) { return detail::band_psd(f, cfg.burst_low, cfg.burst_high); }, rng);
  }
  const double level = burst_level(cfg, pre);

  // Envelope theta in [0, pi/2]: cos/sin mixing keeps the power of the two
  // independent sources constant through a fade.
  std::vector<double> theta(n, 0.0);
  const double ramp = cfg.ramp_seconds * fs;
  for (const Interval& iv : out.intervals) {
    if (iv.label != Label::burst) continue;
    const auto a = static_cast<std::size_t>(std::llround(iv.start_s * fs));
    const auto b = static_cast<std::size_t>(std::llround(iv.end_s * fs));
    const double r = std::min(ramp, static_cast<double>(b - a) / 4.0);
    for (std::size_t i = a; i < b; ++i) {
      const double edge = std::min(static_cast<double>(i - a) + 0.5, static_cast<double>(b - i) - 0.5);
      const double e = r > 0 && edge < r ? 0.5 - 0.5 * std::cos(std::numbers::pi * edge / r) : 1.0;
      theta[i] = e * std::numbers::pi / 2;
    }
  }

  SignalRecord& rec = out.record;
  rec.record_id = synth_record_id(index);
  rec.sample_rate = fs;
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    rec.samples[i] = cfg.background_rms * (std::cos(theta[i]) * bg[i] + level * std::sin(theta[i]) * bu[i]);
  rec.labels = rasterize(out.intervals, n, fs);
  return out;
}

// Writes <id>.csv and <id>.json per record plus manifest.json under `dir`.
inline CorpusManifest write_synthetic_corpus(const SynthConfig& cfg, const fs::path& dir,
                                             const PreprocessSpec& pre = {}) {
  cfg.validate();
  CorpusManifest m;
  m.generation_seed = cfg.seed;
  for (int i = 0; i < cfg.n_records; ++i) {
    const SyntheticRecord r = generate_record(cfg, i, pre);
    ManifestEntry e;
    e.record_id = r.record.record_id;
    e.signal_path = dir / (e.record_id + ".csv");
    e.annotation_path = dir / (e.record_id + ".json");
    e.native_sample_rate = cfg.native_rate;
    write_text_file(e.signal_path, format_signal_csv(r.record.samples, r.record.sample_rate));
    write_text_file(e.annotation_path, format_annotations(r.intervals));
    m.records.push_back(std::move(e));
  }
  write_text_file(dir / "manifest.json", format_manifest(m, dir));
  return m;
}

}  // namespace tfburst
