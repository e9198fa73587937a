#include "phec/cli.hpp"

#include "phec/error.hpp"
#include "phec/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>

namespace phec {

namespace {

const std::string kModule = "cli";

struct Options {
  std::string input, schema, out, grouping, encoder, encoder_out;
  std::string preset = "separable";
  std::uint64_t seed = 0;
  std::size_t per_attack = 1000;
  std::size_t normal = 4000;
  Index dim = kSynthDim;
  double rho = 0.0;
  std::string config, model_out, report_out;
  std::string model, test, report;
  bool timing = false;
};

void cmd_prepare(const Options& o, std::ostream& out) {
  const ColumnSpec spec = ColumnSpec::load(o.schema);
  const RawDataset raw = load_csv(o.input, spec);
  std::optional<LabelEncoder> fitted;
  if (!o.encoder.empty()) {
    std::ifstream in(o.encoder, std::ios::binary);
    if (!in) throw DataError(kModule, "cannot open encoder " + o.encoder);
    std::stringstream ss;
    ss << in.rdbuf();
    fitted = LabelEncoder::from_json(ss.str());
  }
  EncodedDataset encoded = encode_and_normalize(raw, fitted ? &*fitted : nullptr);
  if (!o.grouping.empty()) {
    const GroupingTable table = o.grouping == "nsl-kdd" ? GroupingTable::nsl_kdd() : GroupingTable::load(o.grouping);
    encoded.dataset = group_attacks(std::move(encoded.dataset), table);
  }
  save_dataset(o.out, encoded.dataset);
  if (!o.encoder_out.empty()) {
    std::ofstream f(o.encoder_out, std::ios::binary);
    if (!f) throw DataError(kModule, "cannot write encoder " + o.encoder_out);
    f << encoded.encoder.to_json() << '\n';
  }
  out << "prepared " << encoded.dataset.size() << " samples with " << encoded.dataset.dim() << " features\n";
}

void cmd_synth(const Options& o, std::ostream& out) {
  const Dataset d = synth_generate(o.preset, standard_counts(o.per_attack, o.normal), o.seed, o.dim);
  save_dataset(o.out, d);
  out << "wrote " << d.size() << " samples (" << o.preset << ")\n";
}

void cmd_noise(const Options& o, std::ostream& out) {
  const NoisyDataset noisy = inject_sln_noise(load_dataset(o.input), {o.rho, o.seed});
  save_dataset(o.out, noisy.dataset);
  out << "flipped " << noisy.flipped.size() << " of " << noisy.dataset.size() << " labels\n";
}

void cmd_train(const Options& o, std::ostream& out) {
  Config config = Config::load(o.config);
  if (!o.model_out.empty()) config.model_out = o.model_out;
  if (!o.report_out.empty()) config.report_out = o.report_out;
  if (!config.model_out || !config.report_out)
    throw UsageError(kModule, "train needs model_out and report_out (config keys or flags)");
  if (!std::filesystem::exists(config.data)) throw DataError(kModule, "data file " + config.data.string() + " not found");
  if (config.federated.grouping && !std::filesystem::exists(*config.federated.grouping))
    throw DataError(kModule, "grouping file " + config.federated.grouping->string() + " not found");
  const TrainOutcome result = train_pipeline(config, load_dataset(config.data));
  save_trained_model(result.model, *config.model_out);
  emit_report(result.report, *config.report_out);
  out << to_string(config.pipeline) << ": gamma*=" << result.search.gamma_star << " tpr=" << result.search.tpr
      << " fpr=" << result.search.fpr << (result.search.feasible ? "" : " (infeasible)") << '\n';
}

void cmd_eval(const Options& o, std::ostream& out) {
  const TrainedModel model = load_trained_model(o.model);
  const Dataset test = load_dataset(o.test);
  const EvalOutcome result = evaluate_pipeline(model, test, o.timing);
  emit_report(result.report, o.report);
  out << "tpr=" << result.metrics.tpr << " fpr=" << result.metrics.fpr << " accuracy=" << result.metrics.accuracy
      << '\n';
}

void cmd_report(const Options& o, std::ostream& out) {
  const Json r = load_json(o.input);
  if (!r.is_object() || r.value("format", "") != "phec-report") throw DataError(kModule, "not a phec report");
  if (r.value("version", 0) != kReportFormatVersion) throw DataError(kModule, "unsupported report version");
  out << "command: " << r.value("command", "?") << '\n';
  if (r.contains("config")) out << "pipeline: " << r["config"].value("pipeline", "?") << '\n';
  for (const char* section : {"threshold", "metrics"}) {
    if (!r.contains(section) || !r[section].is_object()) continue;
    out << section << ':';
    for (const auto& [key, value] : r[section].items())
      if (value.is_primitive() && !value.is_null()) out << ' ' << key << '=' << value.dump();
    out << '\n';
  }
  if (r.contains("per_category"))
    for (const auto& [cat, rate] : r["per_category"].items())
      out << "  " << cat << ": tpr=" << rate["tpr"].dump() << " (" << rate["detected"].dump() << '/'
          << rate["total"].dump() << ")\n";
  if (r.contains("federated") && r["federated"].is_object())
    out << "federated: rounds=" << r["federated"]["rounds"].dump() << " best_round=" << r["federated"]["best_round"].dump()
        << " stop=" << r["federated"]["stop_reason"].get<std::string>() << '\n';
  if (r.contains("warnings"))
    for (const auto& w : r["warnings"]) out << "warning: " << w.get<std::string>() << '\n';
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PHEC intrusion-detection toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* prepare = app.add_subcommand("prepare", "encode and normalize a raw CSV");
  prepare->add_option("--input", o.input, "raw CSV")->required();
  prepare->add_option("--schema", o.schema, "column schema (JSON)")->required();
  prepare->add_option("--out", o.out, "dataset file to write")->required();
  prepare->add_option("--grouping", o.grouping, "grouping table (JSON) or nsl-kdd");
  prepare->add_option("--encoder", o.encoder, "previously fitted encoder to reuse");
  prepare->add_option("--encoder-out", o.encoder_out, "write the fitted encoder here");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--preset", o.preset, "separable, overlapping or xor")->required();
  synth->add_option("--out", o.out, "dataset file to write")->required();
  synth->add_option("--seed", o.seed);
  synth->add_option("--per-attack", o.per_attack, "samples per attack category");
  synth->add_option("--normal", o.normal, "normal samples");
  synth->add_option("--dim", o.dim, "feature count");

  auto* noise = app.add_subcommand("noise", "flip labels with symmetric label noise");
  noise->add_option("--rho", o.rho, "flip probability in percent")->required();
  noise->add_option("--seed", o.seed)->required();
  noise->add_option("--input", o.input, "dataset file")->required();
  noise->add_option("--out", o.out, "dataset file to write")->required();

  auto* train = app.add_subcommand("train", "train a pipeline from a config file");
  train->add_option("--config", o.config, "config (JSON)")->required();
  train->add_option("--model-out", o.model_out, "overrides model_out");
  train->add_option("--report-out", o.report_out, "overrides report_out");

  auto* eval = app.add_subcommand("eval", "evaluate a trained model on test data");
  eval->add_option("--model", o.model)->required();
  eval->add_option("--test", o.test)->required();
  eval->add_option("--report", o.report)->required();
  eval->add_flag("--timing", o.timing, "measure per-instance latency");

  auto* report = app.add_subcommand("report", "summarize a report file");
  report->add_option("--in", o.input)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "cli: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (*prepare) cmd_prepare(o, out);
    else if (*synth) cmd_synth(o, out);
    else if (*noise) cmd_noise(o, out);
    else if (*train) cmd_train(o, out);
    else if (*eval) cmd_eval(o, out);
    else if (*report) cmd_report(o, out);
    return 0;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "cli: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Data);
  }
}

}  // namespace phec
