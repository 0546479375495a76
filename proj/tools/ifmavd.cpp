// ifmavd: command-line front end for the detection pipeline.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ifmavd/bundle.hpp"
#include "ifmavd/config.hpp"
#include "ifmavd/manifest.hpp"
#include "ifmavd/pipeline.hpp"
#include "ifmavd/report.hpp"
#include "ifmavd/slicer.hpp"
#include "ifmavd/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ifmavd;

namespace {

struct Options {
  std::string config_path, manifest_path, bundle_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::vector<std::string> inputs;
  int count = 400;
};

PipelineConfig effective_config(const Options& o) {
  PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.threshold) c.threshold = *o.threshold;
  c.validate();
  return c;
}

// Writes to --out, or stdout when it is empty or "-".
void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text_file(out, text);
}

Cpg load_file(const std::string& path) {
  const std::string text = read_text_file(path);
  return path.ends_with(".json") ? load_cpg(text) : minic::parse_function(text, fs::path(path).stem().string());
}

// Functions named on the command line (source files, id = file stem; .json files are
// CPG documents) or in --manifest. With `errors`, files that fail are collected there
// instead of aborting.
std::vector<Cpg> load_inputs(const Options& o, std::vector<FunctionError>* errors = nullptr) {
  std::vector<Cpg> out;
  if (!o.manifest_path.empty()) out = ingest_manifest(load_manifest(o.manifest_path));
  for (const auto& path : o.inputs) {
    try {
      out.push_back(load_file(path));
    } catch (const Error& e) {
      if (!errors) throw StageError("ingest", path, e.what());
      errors->push_back({path, "ingest", e.what()});
    }
  }
  if (out.empty() && (!errors || errors->empty())) throw ConfigError("no input functions: give source files or --manifest");
  return out;
}

nlohmann::json behavior_to_json(const BehaviorSubgraph& b) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : b.edges) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", std::string(to_string(e.kind))}});
  return {{"function_id", b.function_id},
          {"interest_point",
           {{"node_id", b.interest_point.node_id}, {"category", std::string(to_string(b.interest_point.category))}}},
          {"nodes", b.node_ids},
          {"edges", edges}};
}

int cmd_parse(const Options& o) {
  const auto cpgs = load_inputs(o);
  if (!o.out.empty() && o.out != "-" && (fs::is_directory(o.out) || o.out.back() == '/')) {
    fs::create_directories(o.out);
    for (const auto& g : cpgs) write_text_file((fs::path(o.out) / (g.function_id + ".json")).string(), save_cpg(g) + "\n");
    std::cerr << "wrote " << cpgs.size() << " CPG documents to " << o.out << "\n";
    return 0;
  }
  std::string text;
  for (const auto& g : cpgs) text += save_cpg(g) + "\n";
  emit(o.out, text);
  return 0;
}

int cmd_slice(const Options& o) {
  const ApiList apis = resolve_api_list(effective_config(o));
  std::string text;
  for (const auto& g : load_inputs(o))
    for (const auto& b : behaviors_of(pdg_view(g), g, apis)) text += behavior_to_json(b).dump() + "\n";
  emit(o.out, text);
  return 0;
}

int cmd_train(const Options& o) {
  if (o.manifest_path.empty()) throw ConfigError("train needs --manifest");
  const PipelineConfig c = effective_config(o);
  const PipelineResult r = run_pipeline(load_manifest(o.manifest_path), c);
  if (!o.bundle_path.empty()) save_bundle(r.bundle, o.bundle_path);
  if (!o.out.empty() && o.out != "-") {
    emit_report(r.report, o.out);
    std::cerr << "report: " << o.out << " (timings: " << timings_path(o.out) << ")\n";
  }
  std::cout << format_report(report_to_json(r.report), std::optional<nlohmann::json>(timings_to_json(r.report.timings)));
  return 0;
}

int cmd_detect(const Options& o) {
  if (o.bundle_path.empty()) throw ConfigError("detect needs --bundle");
  const ModelBundle b = load_bundle(o.bundle_path);
  DetectResult res;
  if (!o.manifest_path.empty() && o.inputs.empty()) {
    res = detect(load_manifest(o.manifest_path), b, o.threshold);
  } else {
    std::vector<FunctionError> failed;
    const auto cpgs = load_inputs(o, &failed);
    res = detect(cpgs, b, o.threshold);
    res.errors.insert(res.errors.begin(), failed.begin(), failed.end());
  }
  emit(o.out, predictions_to_jsonl(res.predictions));
  for (const auto& e : res.errors) std::cerr << "error [" << e.stage << "] " << e.id << ": " << e.message << "\n";
  return res.errors.empty() ? 0 : 2;
}

int cmd_eval(const Options& o) {
  if (o.manifest_path.empty() || o.inputs.size() != 1) throw ConfigError("eval needs one predictions file and --manifest");
  const auto preds = parse_predictions(read_text_file(o.inputs[0]));
  const Metrics m = evaluate_predictions(preds, load_manifest(o.manifest_path));
  emit(o.out, metrics_to_json(m).dump(2) + "\n");
  return 0;
}

int cmd_report(const Options& o) {
  if (o.inputs.size() != 1) throw ConfigError("report needs one report file");
  const auto j = load_report_json(o.inputs[0]);
  std::optional<nlohmann::json> timings;
  if (const auto t = timings_path(o.inputs[0]); fs::exists(t)) timings = nlohmann::json::parse(read_text_file(t));
  emit(o.out, format_report(j, timings));
  return 0;
}

int cmd_synth(const Options& o) {
  SyntheticConfig s;
  s.count = o.count;
  if (o.seed) s.seed = *o.seed;
  emit(o.out, manifest_to_jsonl(generate_planted(s).manifest));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vulnerability detection over behavior hypergraphs"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output path (stdout when omitted)");
    return sub;
  };
  auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest_path, "Dataset manifest (JSONL)")->check(CLI::ExistingFile);
    sub->add_option("inputs", o.inputs, "Mini-C source files or CPG documents (.json)")->check(CLI::ExistingFile);
    return sub;
  };

  auto* parse = add_inputs(add_common(app.add_subcommand("parse", "Emit CPG documents; --out DIR/ writes one file per function")));
  auto* slice = add_inputs(add_common(app.add_subcommand("slice", "Emit behavior subgraphs as JSONL")));
  slice->add_option("--config", o.config_path, "Pipeline config (for the API list)")->check(CLI::ExistingFile);

  auto* train = add_common(app.add_subcommand("train", "Train on a manifest; --out is the report path"));
  train->add_option("--manifest", o.manifest_path, "Labeled dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--config", o.config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  train->add_option("--bundle", o.bundle_path, "Where to write the model bundle");
  train->add_option("--seed", o.seed, "Override the config seed");
  train->add_option("--threshold", o.threshold, "Override the decision threshold");

  auto* det = add_inputs(add_common(app.add_subcommand("detect", "Score functions with a trained bundle")));
  det->add_option("--bundle", o.bundle_path, "Model bundle")->required()->check(CLI::ExistingFile);
  det->add_option("--threshold", o.threshold, "Decision threshold (default: the bundle's)");

  auto* eval = add_common(app.add_subcommand("eval", "Metrics of a predictions file against manifest labels"));
  eval->add_option("predictions", o.inputs, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", o.manifest_path, "Labeled manifest")->required()->check(CLI::ExistingFile);

  auto* report = add_common(app.add_subcommand("report", "Pretty-print a run report"));
  report->add_option("report", o.inputs, "Report JSON")->required()->check(CLI::ExistingFile);

  auto* synth = add_common(app.add_subcommand("synth", "Write a planted synthetic manifest"));
  synth->add_option("--seed", o.seed, "Generator seed");
  synth->add_option("--count", o.count, "Number of functions")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse) return cmd_parse(o);
    if (*slice) return cmd_slice(o);
    if (*train) return cmd_train(o);
    if (*det) return cmd_detect(o);
    if (*eval) return cmd_eval(o);
    if (*report) return cmd_report(o);
    if (*synth) return cmd_synth(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
