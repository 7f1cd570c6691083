// tfburst: burst detection in single-channel EEG from quadratic
// time-frequency slices.
//
//   tfburst synth  --out DIR [--config FILE] [--set key=value]...
//   tfburst train  --manifest FILE --out MODEL.json [--config FILE]
//   tfburst detect --manifest FILE --model MODEL.json --out DIR [--config FILE]
//   tfburst eval   --manifest FILE --out DIR [--config FILE]
//   tfburst bench  [--grid N=4608,Ph=31,Ntime=144,Nfreq=128] [--runs 20]
//
// Exit status: 0 on success; otherwise the error category selects the code
// (2 invalid_argument, 3 parse, 4 io, 5 data) and stderr carries
// "tfburst: error[<category>]: <message>".

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tfburst/pipeline/config.hpp"
#include "tfburst/pipeline/io.hpp"
#include "tfburst/pipeline/pipeline.hpp"
#include "tfburst/pipeline/report.hpp"
#include "tfburst/pipeline/synth.hpp"

using namespace tfburst;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return 2;
    case ErrorCategory::parse: return 3;
    case ErrorCategory::io: return 4;
    case ErrorCategory::data: return 5;
  }
  return 1;
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;

  PipelineConfig load() const {
    PipelineConfig cfg = config_path.empty() ? parse_config("", "defaults") : load_config(config_path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorCategory::parse, "--set: expected key=value, got \"" + kv + "\"");
      set_config_value(cfg, detail::trim(std::string_view(kv).substr(0, eq)),
                       detail::trim(std::string_view(kv).substr(eq + 1)), "--set");
    }
    try {
      cfg.validate();
    } catch (const Error& e) {
      fail(ErrorCategory::invalid_argument, std::string("configuration: ") + e.what());
    }
    return cfg;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key = value configuration file");
  sub->add_option("--set", c.overrides, "override one configuration key (key=value); repeatable");
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "tfburst: warning: " << s << "\n";
}

std::vector<PreparedRecord> prepare(const std::string& manifest_path, const PipelineConfig& cfg) {
  const CorpusManifest m = load_manifest(manifest_path);
  std::vector<std::string> warnings;
  auto recs = prepare_corpus(m, cfg, &warnings);
  print_warnings(warnings);
  return recs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Burst detection in EEG from time-frequency slices"};
  app.require_subcommand(1);

  Common common;
  std::string out, manifest, model_path, grid_text = "N=4608,Ph=31,Ntime=144,Nfreq=128", mode_text = "tfd_slice";
  int runs = 20;

  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic corpus and its manifest");
  add_common(synth, common);
  synth->add_option("--out", out, "output directory")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "fit the detector on every labeled record");
  add_common(train_cmd, common);
  train_cmd->add_option("--manifest", manifest, "corpus manifest")->required();
  train_cmd->add_option("--out", out, "model document to write")->required();
  train_cmd->add_option("--feature-mode", mode_text, "tfd_slice or time_marginal");

  CLI::App* detect = app.add_subcommand("detect", "write per-record detection traces");
  add_common(detect, common);
  detect->add_option("--manifest", manifest, "corpus manifest")->required();
  detect->add_option("--model", model_path, "model document from train")->required();
  detect->add_option("--out", out, "output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "leave-one-record-out evaluation against the time-marginal baseline");
  add_common(eval, common);
  eval->add_option("--manifest", manifest, "corpus manifest")->required();
  eval->add_option("--out", out, "report directory")->required();

  CLI::App* bench = app.add_subcommand("bench", "operation/memory counts and timing of the decimated TFD");
  bench->add_option("--grid", grid_text, "N=..,Ph=..,Ntime=..,Nfreq=..");
  bench->add_option("--runs", runs, "timed repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorCategory::invalid_argument);
  }

  try {
    if (synth->parsed()) {
      const PipelineConfig cfg = common.load();
      const CorpusManifest m = write_synthetic_corpus(cfg.synth, out, cfg.preprocess);
      std::cout << "wrote " << m.records.size() << " records and " << (fs::path(out) / "manifest.json").string()
                << "\n";
    } else if (train_cmd->parsed()) {
      const PipelineConfig cfg = common.load();
      const FeatureMode mode = parse_feature_mode(mode_text);
      const auto recs = prepare(manifest, cfg);
      TrainLog log;
      const BurstDetector det = run_train(recs, cfg, mode, &log);
      print_warnings(log.warnings);
      const auto doc = detector_to_json(det);
      write_text_file(out, doc.dump(1) + "\n");
      std::cout << "trained on " << labeled_slices(recs).size() << " labeled slices, "
                << det.ensemble.split_count() << " splits; wrote " << out << "\n";
    } else if (detect->parsed()) {
      const PipelineConfig cfg = common.load();
      const BurstDetector det = detector_from_text(read_text_file(model_path));
      const auto recs = prepare(manifest, cfg);
      for (const auto& r : recs) {
        const DetectionTrace t = detect_record(r, det);
        write_text_file(fs::path(out) / (t.record_id + ".detections.csv"), format_trace_csv(t));
      }
      std::cout << "wrote detection traces for " << recs.size() << " records to " << out << "\n";
    } else if (eval->parsed()) {
      const PipelineConfig cfg = common.load();
      const auto recs = prepare(manifest, cfg);
      const EvalResult r = run_eval(recs, cfg);
      print_warnings(r.warnings);
      write_eval_outputs(r, cfg, out);
      std::cout << eval_table_text(r);
    } else if (bench->parsed()) {
      const BenchResult b = run_benchmark(parse_grid(grid_text), runs);
      std::cout << bench_text(b);
    }
  } catch (const Error& e) {
    std::cerr << "tfburst: error[" << category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "tfburst: error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
