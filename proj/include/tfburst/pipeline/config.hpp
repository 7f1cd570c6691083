#pragma once

// Flat key = value configuration. Blank lines and text after '#' are
// ignored; keys are "<section>.<field>"; unknown keys are rejected.
//
//   boost.n_trees = 100
//   epoch.core_seconds = 32
//   synth.equal_energy_mode = true

#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "tfburst/boosted_trees.hpp"
#include "tfburst/epoch_slicer.hpp"
#include "tfburst/error.hpp"
#include "tfburst/pipeline/io.hpp"
#include "tfburst/pipeline/synth.hpp"
#include "tfburst/signal_pre.hpp"
#include "tfburst/tf_engine.hpp"

namespace tfburst {

struct PipelineConfig {
  PreprocessSpec preprocess;
  EpochPlan epoch;
  KernelSpec kernel = default_kernel();
  BoostConfig boost;
  SynthConfig synth;

  void validate() const {
    preprocess.validate();
    epoch.validate();
    kernel.lag_window.validate();
    kernel.doppler_window.validate();
    boost.validate();
    synth.validate();
    require(std::abs(epoch.sample_rate - preprocess.working_rate) < 1e-9 * preprocess.working_rate,
            "config: epoch.sample_rate must equal preprocess.working_rate");
  }
};

namespace detail {

struct ConfigField {
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

inline double to_number(std::string_view v) {
  const auto d = parse_double(v);
  if (!d) throw std::invalid_argument("expected a number");
  return *d;
}

inline long long to_integer(std::string_view v) {
  const double d = to_number(v);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) throw std::invalid_argument("expected an integer");
  return static_cast<long long>(d);
}

inline bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false");
}

inline WindowFamily to_family(std::string_view v) {
  if (v == "hanning") return WindowFamily::hanning;
  if (v == "tukey") return WindowFamily::tukey;
  if (v == "rectangular") return WindowFamily::rectangular;
  throw std::invalid_argument("expected hanning, tukey or rectangular");
}

inline std::string family_name(WindowFamily f) {
  switch (f) {
    case WindowFamily::hanning: return "hanning";
    case WindowFamily::tukey: return "tukey";
    case WindowFamily::rectangular: return "rectangular";
  }
  return "hanning";
}

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

template <typename T>
ConfigField number_field(T PipelineConfig::*section, double T::*field) {
  return {[=](PipelineConfig& c, std::string_view v) { (c.*section).*field = to_number(v); },
          [=](const PipelineConfig& c) { return format_double((c.*section).*field); }};
}

template <typename T, typename I>
ConfigField integer_field(T PipelineConfig::*section, I T::*field) {
  return {[=](PipelineConfig& c, std::string_view v) {
            const long long x = to_integer(v);
            if (std::is_unsigned_v<I> && x < 0) throw std::invalid_argument("expected a non-negative integer");
            (c.*section).*field = static_cast<I>(x);
          },
          [=](const PipelineConfig& c) { return std::to_string((c.*section).*field); }};
}

template <typename T>
ConfigField bool_field(T PipelineConfig::*section, bool T::*field) {
  return {[=](PipelineConfig& c, std::string_view v) { (c.*section).*field = to_bool(v); },
          [=](const PipelineConfig& c) { return bool_text((c.*section).*field); }};
}

inline void add_window_fields(std::map<std::string, ConfigField>& m, const std::string& prefix,
                              WindowSpec KernelSpec::*w) {
  m[prefix + "_family"] = {[=](PipelineConfig& c, std::string_view v) { (c.kernel.*w).family = to_family(v); },
                           [=](const PipelineConfig& c) { return family_name((c.kernel.*w).family); }};
  m[prefix + "_length"] = {[=](PipelineConfig& c, std::string_view v) {
                             (c.kernel.*w).length = static_cast<int>(to_integer(v));
                           },
                           [=](const PipelineConfig& c) { return std::to_string((c.kernel.*w).length); }};
  m[prefix + "_shape"] = {[=](PipelineConfig& c, std::string_view v) { (c.kernel.*w).shape_param = to_number(v); },
                          [=](const PipelineConfig& c) { return format_double((c.kernel.*w).shape_param); }};
  m[prefix + "_normalized"] = {[=](PipelineConfig& c, std::string_view v) { (c.kernel.*w).normalized = to_bool(v); },
                               [=](const PipelineConfig& c) { return bool_text((c.kernel.*w).normalized); }};
}

inline const std::map<std::string, ConfigField>& config_fields() {
  static const std::map<std::string, ConfigField> fields = [] {
    using P = PipelineConfig;
    std::map<std::string, ConfigField> m;
    m["preprocess.working_rate"] = number_field(&P::preprocess, &PreprocessSpec::working_rate);
    m["preprocess.whitening"] = bool_field(&P::preprocess, &PreprocessSpec::whitening);
    m["filter.order"] = {[](P& c, std::string_view v) { c.preprocess.filter.order = static_cast<int>(to_integer(v)); },
                         [](const P& c) { return std::to_string(c.preprocess.filter.order); }};
    m["filter.low_cut"] = {[](P& c, std::string_view v) { c.preprocess.filter.low_cut = to_number(v); },
                           [](const P& c) { return format_double(c.preprocess.filter.low_cut); }};
    m["filter.high_cut"] = {[](P& c, std::string_view v) { c.preprocess.filter.high_cut = to_number(v); },
                            [](const P& c) { return format_double(c.preprocess.filter.high_cut); }};
    m["filter.design"] = {[](P& c, std::string_view v) {
                            if (v != "butterworth") throw std::invalid_argument("only butterworth is supported");
                            c.preprocess.filter.design = FilterDesign::butterworth;
                          },
                          [](const P&) { return std::string("butterworth"); }};

    m["epoch.core_seconds"] = number_field(&P::epoch, &EpochPlan::core_seconds);
    m["epoch.pad_seconds"] = number_field(&P::epoch, &EpochPlan::pad_seconds);
    m["epoch.sample_rate"] = number_field(&P::epoch, &EpochPlan::sample_rate);
    m["epoch.interpolation_factor"] = integer_field(&P::epoch, &EpochPlan::interpolation_factor);
    m["epoch.slice_rate"] = number_field(&P::epoch, &EpochPlan::slice_rate);
    m["epoch.kept_freq_bins"] = integer_field(&P::epoch, &EpochPlan::kept_freq_bins);

    add_window_fields(m, "kernel.lag", &KernelSpec::lag_window);
    add_window_fields(m, "kernel.doppler", &KernelSpec::doppler_window);

    m["boost.n_trees"] = integer_field(&P::boost, &BoostConfig::n_trees);
    m["boost.learning_rate"] = number_field(&P::boost, &BoostConfig::learning_rate);
    m["boost.max_depth"] = integer_field(&P::boost, &BoostConfig::max_depth);
    m["boost.gamma"] = number_field(&P::boost, &BoostConfig::gamma);
    m["boost.lambda"] = number_field(&P::boost, &BoostConfig::lambda);
    m["boost.subsample"] = number_field(&P::boost, &BoostConfig::subsample);
    m["boost.positive_class_weight"] = number_field(&P::boost, &BoostConfig::positive_class_weight);
    m["boost.base_score"] = number_field(&P::boost, &BoostConfig::base_score);
    m["boost.seed"] = integer_field(&P::boost, &BoostConfig::seed);

    m["synth.n_records"] = integer_field(&P::synth, &SynthConfig::n_records);
    m["synth.duration_seconds"] = number_field(&P::synth, &SynthConfig::duration_seconds);
    m["synth.burst_low"] = number_field(&P::synth, &SynthConfig::burst_low);
    m["synth.burst_high"] = number_field(&P::synth, &SynthConfig::burst_high);
    m["synth.burst_amplitude_ratio"] = number_field(&P::synth, &SynthConfig::burst_amplitude_ratio);
    m["synth.mean_burst_seconds"] = number_field(&P::synth, &SynthConfig::mean_burst_seconds);
    m["synth.mean_interburst_seconds"] = number_field(&P::synth, &SynthConfig::mean_interburst_seconds);
    m["synth.pink_exponent"] = number_field(&P::synth, &SynthConfig::pink_exponent);
    m["synth.equal_energy_mode"] = bool_field(&P::synth, &SynthConfig::equal_energy_mode);
    m["synth.burst_spectrum"] = {[](P& c, std::string_view v) {
                                   if (v == "band_limited") {
                                     c.synth.burst_spectrum = BurstSpectrum::band_limited;
                                   } else if (v == "background") {
                                     c.synth.burst_spectrum = BurstSpectrum::background;
                                   } else {
                                     throw std::invalid_argument("expected band_limited or background");
                                   }
                                 },
                                 [](const P& c) {
                                   return std::string(c.synth.burst_spectrum == BurstSpectrum::background
                                                          ? "background"
                                                          : "band_limited");
                                 }};
    m["synth.seed"] = integer_field(&P::synth, &SynthConfig::seed);
    m["synth.native_rate"] = number_field(&P::synth, &SynthConfig::native_rate);
    m["synth.background_rms"] = number_field(&P::synth, &SynthConfig::background_rms);
    m["synth.ramp_seconds"] = number_field(&P::synth, &SynthConfig::ramp_seconds);
    return m;
  }();
  return fields;
}

}  // namespace detail

// Applies one assignment; `where` prefixes error messages.
inline void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value,
                             const std::string& where = "config") {
  const auto& fields = detail::config_fields();
  const auto it = fields.find(std::string(key));
  if (it == fields.end()) fail(ErrorCategory::parse, where + ": unknown key \"" + std::string(key) + "\"");
  try {
    it->second.set(cfg, detail::trim(value));
  } catch (const std::invalid_argument& e) {
    fail(ErrorCategory::parse,
         where + ": " + std::string(key) + " = \"" + std::string(value) + "\": " + e.what());
  }
}

inline PipelineConfig parse_config(std::string_view text, const std::string& name = "config",
                                   PipelineConfig base = {}) {
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCategory::parse, where + ": expected key = value");
    set_config_value(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), where);
  }
  try {
    base.validate();
  } catch (const Error& e) {
    fail(ErrorCategory::invalid_argument, name + ": " + e.what());
  }
  return base;
}

inline PipelineConfig load_config(const fs::path& path) { return parse_config(read_text_file(path), path.string()); }

// Every key with its current value, sorted; parse_config() reads it back.
inline std::string format_config(const PipelineConfig& cfg) {
  std::string s;
  for (const auto& [key, field] : detail::config_fields()) s += key + " = " + field.get(cfg) + "\n";
  return s;
}

inline std::map<std::string, std::string> config_map(const PipelineConfig& cfg) {
  std::map<std::string, std::string> m;
  for (const auto& [key, field] : detail::config_fields()) m[key] = field.get(cfg);
  return m;
}

}  // namespace tfburst
