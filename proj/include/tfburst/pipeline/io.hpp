#pragma once

// File formats.
//
// Signal CSV: first line `sample_rate_hz,<value>`, then one sample per line.
// Annotations: JSON list of {"start_s", "end_s", "label"} with label one of
//   burst, inter_burst, disagreement. Samples covered by no interval are
//   unlabeled.
// Manifest: {"generation_seed": optional int, "records": [{"record_id",
//   "signal_path", "annotation_path", "native_sample_rate"}]}; paths are
//   relative to the manifest's directory.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "tfburst/error.hpp"
#include "tfburst/signal_pre.hpp"

namespace tfburst {

namespace fs = std::filesystem;

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCategory::io, "read failed: " + path.string());
  return ss.str();
}

inline void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCategory::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCategory::io, "write failed: " + path.string());
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// 1-based line and column of a byte offset.
inline std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline nlohmann::json parse_json(std::string_view text, const std::string& name) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is one past the offending character
    fail(ErrorCategory::parse,
         name + ": malformed JSON at " + line_col(text, e.byte > 0 ? e.byte - 1 : 0));
  }
}

}  // namespace detail

struct SignalCsv {
  double sample_rate = 0;
  std::vector<double> samples;
};

inline SignalCsv parse_signal_csv(std::string_view text, const std::string& name = "signal CSV") {
  SignalCsv out;
  std::size_t line_no = 0;
  bool header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header) {
      const std::size_t comma = line.find(',');
      if (comma == std::string_view::npos || detail::trim(line.substr(0, comma)) != "sample_rate_hz")
        fail(ErrorCategory::parse, name + ": line " + std::to_string(line_no) +
                                       ": expected header \"sample_rate_hz,<value>\"");
      const auto fs_val = detail::parse_double(line.substr(comma + 1));
      if (!fs_val || !(*fs_val > 0) || !std::isfinite(*fs_val))
        fail(ErrorCategory::parse, name + ": line " + std::to_string(line_no) + ": sample rate \"" +
                                       std::string(detail::trim(line.substr(comma + 1))) + "\" is not a positive number");
      out.sample_rate = *fs_val;
      header = true;
      continue;
    }
    const auto v = detail::parse_double(line);
    if (!v || !std::isfinite(*v))
      fail(ErrorCategory::parse, name + ": line " + std::to_string(line_no) + ": \"" + std::string(line) +
                                     "\" is not a finite number");
    out.samples.push_back(*v);
  }
  if (!header) fail(ErrorCategory::parse, name + ": empty file (missing sample_rate_hz header)");
  return out;
}

inline std::string format_signal_csv(std::span<const double> samples, double sample_rate) {
  std::string s = "sample_rate_hz," + format_double(sample_rate) + "\n";
  s.reserve(s.size() + samples.size() * 20);
  for (double v : samples) {
    s += format_double(v);
    s += '\n';
  }
  return s;
}

struct Interval {
  double start_s = 0;
  double end_s = 0;
  Label label = Label::unlabeled;
};

inline std::string_view label_name(Label l) {
  switch (l) {
    case Label::inter_burst: return "inter_burst";
    case Label::burst: return "burst";
    case Label::disagreement: return "disagreement";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline std::vector<Interval> parse_annotations(std::string_view text, const std::string& name = "annotations") {
  const nlohmann::json doc = detail::parse_json(text, name);
  if (!doc.is_array()) fail(ErrorCategory::parse, name + ": top level must be a list of intervals");
  std::vector<Interval> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const std::string where = name + ": interval " + std::to_string(i);
    if (!e.is_object()) fail(ErrorCategory::parse, where + " is not an object");
    Interval iv;
    for (const char* key : {"start_s", "end_s"}) {
      if (!e.contains(key) || !e.at(key).is_number())
        fail(ErrorCategory::parse, where + ": \"" + key + "\" missing or not a number");
    }
    iv.start_s = e.at("start_s").get<double>();
    iv.end_s = e.at("end_s").get<double>();
    if (!e.contains("label") || !e.at("label").is_string())
      fail(ErrorCategory::parse, where + ": \"label\" missing or not a string");
    const std::string lab = e.at("label").get<std::string>();
    if (lab == "burst") {
      iv.label = Label::burst;
    } else if (lab == "inter_burst") {
      iv.label = Label::inter_burst;
    } else if (lab == "disagreement") {
      iv.label = Label::disagreement;
    } else {
      fail(ErrorCategory::parse, where + ": unknown label \"" + lab + "\"");
    }
    if (!(iv.start_s >= 0) || !(iv.end_s > iv.start_s))
      fail(ErrorCategory::parse, where + ": need 0 <= start_s < end_s");
    out.push_back(iv);
  }
  return out;
}

inline std::string format_annotations(const std::vector<Interval>& intervals) {
  std::string s = "[\n";
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    s += "  {\"start_s\": " + format_double(iv.start_s) + ", \"end_s\": " + format_double(iv.end_s) +
         ", \"label\": \"" + std::string(label_name(iv.label)) + "\"}";
    s += i + 1 < intervals.size() ? ",\n" : "\n";
  }
  return s + "]\n";
}

// Sample i (time i / fs) belongs to an interval when start_s <= t < end_s.
inline std::vector<Label> rasterize(const std::vector<Interval>& intervals, std::size_t n_samples, double sample_rate,
                                    std::vector<std::string>* warnings = nullptr) {
  std::vector<Label> labels(n_samples, Label::unlabeled);
  const double duration = static_cast<double>(n_samples) / sample_rate;
  auto index_at = [&](double t) {
    const double x = t * sample_rate;
    const double r = std::round(x);
    // Tolerate representation error at exact sample instants.
    const double c = std::abs(x - r) < 1e-9 * std::max(1.0, std::abs(x)) ? r : std::ceil(x);
    return static_cast<std::size_t>(std::min(c, static_cast<double>(n_samples)));
  };
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const Interval& iv = intervals[k];
    if (iv.end_s > duration + 1e-9 && warnings) {
      warnings->push_back("interval " + std::to_string(k) + " [" + format_double(iv.start_s) + ", " +
                          format_double(iv.end_s) + ") s extends past the record end at " +
                          format_double(duration) + " s; clipped");
    }
    const std::size_t a = index_at(iv.start_s);
    const std::size_t b = index_at(iv.end_s);
    for (std::size_t i = a; i < b; ++i) {
      if (labels[i] != Label::unlabeled && labels[i] != iv.label) {
        fail(ErrorCategory::parse, "annotations: interval " + std::to_string(k) + " (" +
                                       std::string(label_name(iv.label)) + ") overlaps a " +
                                       std::string(label_name(labels[i])) + " interval at " +
                                       format_double(static_cast<double>(i) / sample_rate) + " s");
      }
      labels[i] = iv.label;
    }
  }
  return labels;
}

struct ManifestEntry {
  std::string record_id;
  fs::path signal_path;      // resolved
  fs::path annotation_path;  // resolved; empty when unlabeled
  double native_sample_rate = 0;
};

struct CorpusManifest {
  std::vector<ManifestEntry> records;
  std::optional<std::uint64_t> generation_seed;
};

inline CorpusManifest parse_manifest(std::string_view text, const fs::path& base_dir,
                                     const std::string& name = "manifest") {
  const nlohmann::json doc = detail::parse_json(text, name);
  if (!doc.is_object() || !doc.contains("records") || !doc.at("records").is_array())
    fail(ErrorCategory::parse, name + ": expected an object with a \"records\" list");
  CorpusManifest m;
  if (doc.contains("generation_seed")) {
    if (!doc.at("generation_seed").is_number_unsigned())
      fail(ErrorCategory::parse, name + ": generation_seed must be a non-negative integer");
    m.generation_seed = doc.at("generation_seed").get<std::uint64_t>();
  }
  std::set<std::string> ids;
  const auto& recs = doc.at("records");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const std::string where = name + ": records/" + std::to_string(i);
    if (!r.is_object()) fail(ErrorCategory::parse, where + " is not an object");
    ManifestEntry e;
    if (!r.contains("record_id") || !r.at("record_id").is_string() || r.at("record_id").get<std::string>().empty())
      fail(ErrorCategory::parse, where + ": record_id missing or empty");
    e.record_id = r.at("record_id").get<std::string>();
    if (!ids.insert(e.record_id).second)
      fail(ErrorCategory::parse, where + ": duplicate record_id \"" + e.record_id + "\"");
    if (!r.contains("signal_path") || !r.at("signal_path").is_string())
      fail(ErrorCategory::parse, where + ": signal_path missing");
    e.signal_path = base_dir / r.at("signal_path").get<std::string>();
    if (r.contains("annotation_path") && !r.at("annotation_path").is_null()) {
      if (!r.at("annotation_path").is_string()) fail(ErrorCategory::parse, where + ": annotation_path must be a string");
      e.annotation_path = base_dir / r.at("annotation_path").get<std::string>();
    }
    if (r.contains("native_sample_rate")) {
      if (!r.at("native_sample_rate").is_number() || !(r.at("native_sample_rate").get<double>() > 0))
        fail(ErrorCategory::parse, where + ": native_sample_rate must be a positive number");
      e.native_sample_rate = r.at("native_sample_rate").get<double>();
    }
    m.records.push_back(std::move(e));
  }
  return m;
}

inline CorpusManifest load_manifest(const fs::path& path) {
  CorpusManifest m = parse_manifest(read_text_file(path), path.parent_path(), path.string());
  for (const auto& e : m.records) {
    if (!fs::exists(e.signal_path)) fail(ErrorCategory::io, "manifest " + path.string() + ": missing " + e.signal_path.string());
    if (!e.annotation_path.empty() && !fs::exists(e.annotation_path))
      fail(ErrorCategory::io, "manifest " + path.string() + ": missing " + e.annotation_path.string());
  }
  return m;
}

// Manifest text with paths written relative to `base_dir`.
inline std::string format_manifest(const CorpusManifest& m, const fs::path& base_dir) {
  nlohmann::ordered_json doc;
  if (m.generation_seed) doc["generation_seed"] = *m.generation_seed;
  doc["records"] = nlohmann::ordered_json::array();
  for (const auto& e : m.records) {
    nlohmann::ordered_json r;
    r["record_id"] = e.record_id;
    r["signal_path"] = e.signal_path.lexically_relative(base_dir).generic_string();
    if (!e.annotation_path.empty()) r["annotation_path"] = e.annotation_path.lexically_relative(base_dir).generic_string();
    if (e.native_sample_rate > 0) r["native_sample_rate"] = e.native_sample_rate;
    doc["records"].push_back(std::move(r));
  }
  return doc.dump(2) + "\n";
}

inline SignalRecord load_record(const fs::path& signal_path, const fs::path& annotation_path,
                                const std::string& record_id = {}, std::vector<std::string>* warnings = nullptr) {
  const SignalCsv csv = parse_signal_csv(read_text_file(signal_path), signal_path.string());
  SignalRecord r;
  r.record_id = record_id.empty() ? signal_path.stem().string() : record_id;
  r.sample_rate = csv.sample_rate;
  r.samples = csv.samples;
  if (!annotation_path.empty()) {
    const auto iv = parse_annotations(read_text_file(annotation_path), annotation_path.string());
    std::vector<std::string> w;
    r.labels = rasterize(iv, r.size(), r.sample_rate, &w);
    if (warnings)
      for (auto& s : w) warnings->push_back(r.record_id + ": " + s);
  }
  return r;
}

inline SignalRecord load_record(const ManifestEntry& e, std::vector<std::string>* warnings = nullptr) {
  SignalRecord r = load_record(e.signal_path, e.annotation_path, e.record_id, warnings);
  if (e.native_sample_rate > 0 && std::abs(e.native_sample_rate - r.sample_rate) > 1e-9 * r.sample_rate)
    fail(ErrorCategory::data, e.record_id + ": manifest rate " + format_double(e.native_sample_rate) +
                                  " Hz disagrees with CSV header " + format_double(r.sample_rate) + " Hz");
  return r;
}

}  // namespace tfburst
