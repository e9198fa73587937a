#include "phec/pipeline.hpp"

#include "phec/error.hpp"
#include "phec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace phec {

namespace {

const std::string kModule = "config";
const std::string kPipeline = "pipeline";

// Walks one JSON object, remembering which keys were consumed so leftovers can be rejected.
class ObjectReader {
public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError(kModule, where_ + " must be an object");
  }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const Json& require(const std::string& key) {
    const Json* v = get(key);
    if (!v) throw UsageError(kModule, "missing required key " + qualified(key));
    return *v;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const Json* v = get(key)) out = convert<T>(*v, key);
  }

  template <typename T>
  T convert(const Json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw UsageError(kModule, qualified(key) + " must be a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw UsageError(kModule, qualified(key) + " must be an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned())
            throw UsageError(kModule, qualified(key) + " must be non-negative");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw UsageError(kModule, qualified(key) + " must be true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw UsageError(kModule, qualified(key) + " must be a string");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError(kModule, qualified(key) + " has the wrong type");
    }
  }

  ObjectReader child(const std::string& key) {
    const Json* v = get(key);
    static const Json empty = Json::object();
    return ObjectReader(v ? *v : empty, qualified(key));
  }

  std::string qualified(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw UsageError(kModule, "unknown key " + qualified(key));
  }

private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Json path_json(const std::optional<std::filesystem::path>& p) { return p ? Json(p->generic_string()) : Json(nullptr); }

std::optional<std::filesystem::path> read_path(ObjectReader& r, const std::string& key) {
  const Json* v = r.get(key);
  if (!v || v->is_null()) return std::nullopt;
  return std::filesystem::path(r.convert<std::string>(*v, key));
}

Aggregation aggregation_from_string(const std::string& text) {
  if (text == "fedstack") return Aggregation::FedStack;
  if (text == "fedavg") return Aggregation::FedAvg;
  throw UsageError(kModule, "federated.aggregation must be fedstack or fedavg, got " + text);
}

std::vector<int> labels_at(const Eigen::VectorXd& scores, double gamma) {
  std::vector<int> out(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(label(scores(i), gamma));
  return out;
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Json search_json(const ThresholdSearchResult& s, bool curve) {
  Json j;
  j["gamma_star"] = s.gamma_star;
  j["tpr"] = s.tpr;
  j["fpr"] = s.fpr;
  j["feasible"] = s.feasible;
  j["degenerate"] = s.degenerate;
  j["u"] = s.u;
  j["grid_size"] = s.grid_size;
  if (curve) {
    Json points = Json::array();
    for (const auto& p : s.curve) points.push_back(Json::array({p.gamma, p.tpr, p.fpr}));
    j["curve"] = std::move(points);
  } else {
    j["curve"] = nullptr;
  }
  return j;
}

Json header(const std::string& command) {
  Json j;
  j["format"] = "phec-report";
  j["version"] = kReportFormatVersion;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = command;
  return j;
}

GroupingTable grouping_for(const Config& config) {
  return config.federated.grouping ? GroupingTable::load(*config.federated.grouping) : GroupingTable::nsl_kdd();
}

bool has_categories(const Dataset& d) {
  for (std::size_t i = 0; i < d.binary_label.size(); ++i)
    if (d.binary_label[i] == 1 && !d.noisy[i] && d.category[i].empty()) return false;
  return true;
}

PcaModel fit_pca(const PcaSettings& settings, const Eigen::MatrixXd& X) {
  return settings.components ? pca_fit(X, *settings.components) : pca_fit_variance(X, settings.variance_ratio);
}

}  // namespace

std::string_view to_string(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::PhecCentralized: return "phec-centralized";
    case PipelineKind::PhecFederated: return "phec-federated";
    case PipelineKind::NtPhecCentralized: return "nt-phec-centralized";
    case PipelineKind::NtPhecFederated: return "nt-phec-federated";
  }
  return "?";
}

PipelineKind pipeline_from_string(std::string_view text) {
  for (auto kind : {PipelineKind::PhecCentralized, PipelineKind::PhecFederated, PipelineKind::NtPhecCentralized,
                    PipelineKind::NtPhecFederated})
    if (to_string(kind) == text) return kind;
  throw UsageError(kModule, "unknown pipeline " + std::string(text));
}

bool is_federated(PipelineKind kind) {
  return kind == PipelineKind::PhecFederated || kind == PipelineKind::NtPhecFederated;
}

bool is_noise_tolerant(PipelineKind kind) {
  return kind == PipelineKind::NtPhecCentralized || kind == PipelineKind::NtPhecFederated;
}

// ---------------------------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------------------------

Config Config::parse(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(kModule, std::string("malformed config: ") + e.what());
  }
  Config c;
  ObjectReader r(j, "");
  c.pipeline = pipeline_from_string(r.convert<std::string>(r.require("pipeline"), "pipeline"));
  c.data = r.convert<std::string>(r.require("data"), "data");
  c.model_out = read_path(r, "model_out");
  c.report_out = read_path(r, "report_out");
  r.read("seed", c.seed);
  r.read("u", c.u);
  r.read("grid_size", c.grid_size);
  r.read("validation_fraction", c.validation_fraction);

  {
    auto p = r.child("pca");
    if (const Json* v = p.get("components"); v && !v->is_null()) c.pca.components = p.convert<Index>(*v, "components");
    p.read("variance_ratio", c.pca.variance_ratio);
    p.finish();
  }
  {
    auto k = r.child("knn");
    k.read("k", c.knn_k);
    k.finish();
  }
  {
    auto f = r.child("forest");
    f.read("trees", c.forest.trees);
    f.read("max_depth", c.forest.max_depth);
    f.read("features_per_split", c.forest.features_per_split);
    f.read("bootstrap", c.forest.bootstrap);
    f.finish();
  }
  {
    auto m = r.child("mlp");
    m.read("hidden", c.hidden);
    m.finish();
  }
  {
    auto t = r.child("train");
    t.read("eta", c.train.eta);
    t.read("epochs", c.train.epochs);
    t.read("batch_size", c.train.batch_size);
    t.finish();
  }
  if (const Json* v = r.get("alpha_grid")) c.alpha_grid = r.convert<std::vector<double>>(*v, "alpha_grid");
  {
    auto f = r.child("federated");
    f.read("nodes", c.federated.nodes);
    if (const Json* v = f.get("aggregation")) c.federated.aggregation = aggregation_from_string(f.convert<std::string>(*v, "aggregation"));
    f.read("max_rounds", c.federated.max_rounds);
    f.read("patience", c.federated.patience);
    f.read("min_delta", c.federated.min_delta);
    f.read("epochs_per_round", c.federated.epochs_per_round);
    c.federated.grouping = read_path(f, "grouping");
    f.finish();
  }
  c.noise.seed = c.seed;
  {
    auto n = r.child("noise");
    n.read("rho", c.noise.rho);
    n.read("seed", c.noise.seed);
    n.finish();
  }
  {
    auto rep = r.child("report");
    rep.read("curve", c.report.curve);
    rep.read("timing", c.report.timing);
    rep.finish();
  }
  r.finish();
  c.validate();
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(kModule, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::validate() const {
  if (data.empty()) throw UsageError(kModule, "data must name a dataset file");
  if (!(u >= 0.0 && u <= 1.0)) throw UsageError(kModule, "u must lie in [0, 1]");
  if (grid_size < 2) throw UsageError(kModule, "grid_size must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw UsageError(kModule, "validation_fraction must lie in (0, 1)");
  if (pca.components && *pca.components < 1) throw UsageError(kModule, "pca.components must be positive");
  if (!(pca.variance_ratio > 0.0 && pca.variance_ratio <= 1.0))
    throw UsageError(kModule, "pca.variance_ratio must lie in (0, 1]");
  if (knn_k < 1) throw UsageError(kModule, "knn.k must be positive");
  if (is_noise_tolerant(pipeline) && knn_k < 5) throw UsageError(kModule, "knn.k must be at least 5 for NT-PHEC");
  if (forest.trees < 1) throw UsageError(kModule, "forest.trees must be positive");
  for (Index h : hidden)
    if (h < 1) throw UsageError(kModule, "mlp.hidden sizes must be positive");
  if (!(train.eta > 0.0)) throw UsageError(kModule, "train.eta must be positive");
  if (train.epochs < 1) throw UsageError(kModule, "train.epochs must be positive");
  if (train.batch_size < 1) throw UsageError(kModule, "train.batch_size must be positive");
  if (alpha_grid.empty()) throw UsageError(kModule, "alpha_grid must not be empty");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw UsageError(kModule, "alpha_grid values must lie in [0, 1]");
  if (federated.nodes < 1) throw UsageError(kModule, "federated.nodes must be positive");
  if (federated.max_rounds < 1) throw UsageError(kModule, "federated.max_rounds must be positive");
  if (federated.patience < 1) throw UsageError(kModule, "federated.patience must be positive");
  if (!(federated.min_delta >= 0.0)) throw UsageError(kModule, "federated.min_delta must be non-negative");
  if (federated.epochs_per_round < 1) throw UsageError(kModule, "federated.epochs_per_round must be positive");
  if (!(noise.rho < 50.0)) throw UsageError(kModule, "rho must be < 50");
  if (!(noise.rho >= 0.0)) throw UsageError(kModule, "rho must be >= 0");
}

Json Config::to_json() const {
  Json j;
  j["pipeline"] = std::string(to_string(pipeline));
  j["data"] = data.generic_string();
  j["model_out"] = path_json(model_out);
  j["report_out"] = path_json(report_out);
  j["seed"] = seed;
  j["u"] = u;
  j["grid_size"] = grid_size;
  j["validation_fraction"] = validation_fraction;
  j["pca"] = {{"components", pca.components ? Json(*pca.components) : Json(nullptr)},
              {"variance_ratio", pca.variance_ratio}};
  j["knn"] = {{"k", knn_k}};
  j["forest"] = {{"trees", forest.trees},
                 {"max_depth", forest.max_depth},
                 {"features_per_split", forest.features_per_split},
                 {"bootstrap", forest.bootstrap}};
  j["mlp"] = {{"hidden", hidden}};
  j["train"] = {{"eta", train.eta}, {"epochs", train.epochs}, {"batch_size", train.batch_size}};
  j["alpha_grid"] = alpha_grid;
  j["federated"] = {{"nodes", federated.nodes},
                    {"aggregation", std::string(phec::to_string(federated.aggregation))},
                    {"max_rounds", federated.max_rounds},
                    {"patience", federated.patience},
                    {"min_delta", federated.min_delta},
                    {"epochs_per_round", federated.epochs_per_round},
                    {"grouping", path_json(federated.grouping)}};
  j["noise"] = {{"rho", noise.rho}, {"seed", noise.seed}};
  j["report"] = {{"curve", report.curve}, {"timing", report.timing}};
  return j;
}

// ---------------------------------------------------------------------------------------------
// Trained model
// ---------------------------------------------------------------------------------------------

Eigen::VectorXd TrainedModel::scores(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim)
    throw DataError(kPipeline, "data has " + std::to_string(X.cols()) + " features but the model expects " +
                                   std::to_string(input_dim));
  const Eigen::MatrixXd Z = pca ? pca_transform(*pca, X) : X;
  if (stacked) return stacked_aggregate(*stacked, Z);
  std::vector<ClassifierRef> models;
  if (knn) models.emplace_back(std::cref(*knn));
  if (forest) models.emplace_back(std::cref(*forest));
  if (linear) models.emplace_back(std::cref(*linear));
  if (models.empty()) throw DataError(kPipeline, "model holds no classifiers");
  return phec_scores(models, aggregator, Z);
}

std::vector<int> TrainedModel::predict(const Eigen::MatrixXd& X) const { return labels_at(scores(X), gamma_star); }

double TrainedModel::score(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dim) throw DataError(kPipeline, "sample dimension does not match the model");
  Eigen::VectorXd z = x;
  if (pca) z = pca->components * (x - pca->mean);
  if (stacked) return aggregate(stacked->aggregator, stacked_scores(*stacked, z));
  std::vector<double> p;
  if (knn) p.push_back(knn_predict_proba(*knn, z));
  if (forest) p.push_back(rf_predict_proba(*forest, z));
  if (linear) p.push_back(linear_predict_proba(*linear, z));
  return aggregate(aggregator, p);
}

Json to_json(const TrainedModel& model) {
  Json j;
  j["pipeline"] = std::string(to_string(model.pipeline));
  j["input_dim"] = model.input_dim;
  j["u"] = model.u;
  j["gamma_star"] = model.gamma_star;
  j["alpha_star"] = model.alpha_star ? Json(*model.alpha_star) : Json(nullptr);
  j["aggregator"] = std::string(to_string(model.aggregator));
  j["pca"] = model.pca ? to_json(*model.pca) : Json(nullptr);
  j["knn"] = model.knn ? to_json(*model.knn) : Json(nullptr);
  j["forest"] = model.forest ? to_json(*model.forest) : Json(nullptr);
  j["linear"] = model.linear ? to_json(*model.linear) : Json(nullptr);
  j["stacked"] = model.stacked ? to_json(*model.stacked) : Json(nullptr);
  j["config"] = model.config;
  return j;
}

TrainedModel trained_model_from_json(const Json& j) {
  try {
    TrainedModel m;
    m.pipeline = pipeline_from_string(j.at("pipeline").get<std::string>());
    m.input_dim = j.at("input_dim").get<Index>();
    m.u = j.at("u").get<double>();
    m.gamma_star = j.at("gamma_star").get<double>();
    if (!j.at("alpha_star").is_null()) m.alpha_star = j.at("alpha_star").get<double>();
    const auto agg = j.at("aggregator").get<std::string>();
    if (agg != "mean" && agg != "max") throw DataError("io", "unknown aggregator " + agg);
    m.aggregator = agg == "mean" ? Aggregator::Mean : Aggregator::Max;
    if (!j.at("pca").is_null()) m.pca = pca_from_json(j.at("pca"));
    if (!j.at("knn").is_null()) m.knn = knn_from_json(j.at("knn"));
    if (!j.at("forest").is_null()) m.forest = forest_from_json(j.at("forest"));
    if (!j.at("linear").is_null()) m.linear = linear_from_json(j.at("linear"));
    if (!j.at("stacked").is_null()) m.stacked = stacked_from_json(j.at("stacked"));
    m.config = j.at("config");
    if (m.pca && m.pca->input_dim() != m.input_dim) throw DataError("io", "PCA input dimension disagrees with model");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("io", std::string("corrupt pipeline model: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError("io", std::string("corrupt pipeline model: ") + e.what());
  }
}

void save_trained_model(const TrainedModel& model, const std::filesystem::path& path) {
  save_model(model, path, "pipeline");
}

TrainedModel load_trained_model(const std::filesystem::path& path) {
  return trained_model_from_json(open_model_envelope(load_json(path), "pipeline"));
}

// ---------------------------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------------------------

namespace {

void train_centralized(const Config& config, const Dataset& dataset, TrainOutcome& out, Json& data_report) {
  const NoisyDataset noisy = inject_sln_noise(dataset, config.noise);
  auto [train, validation] = split(noisy.dataset, 1.0 - config.validation_fraction, true, config.seed);

  PcaModel pca = fit_pca(config.pca, train.features);
  const Eigen::MatrixXd Xtr = pca_transform(pca, train.features);
  const Eigen::MatrixXd Xva = pca_transform(pca, validation.features);
  data_report["flipped"] = noisy.flipped.size();
  data_report["train"] = train.size();
  data_report["validation"] = validation.size();
  data_report["reduced_dim"] = pca.output_dim();

  TrainedModel& model = out.model;
  model.aggregator = Aggregator::Mean;
  model.knn = knn_fit(Xtr, train.binary_label, config.knn_k, is_noise_tolerant(config.pipeline));
  const Eigen::VectorXd knn_val = knn_predict_proba_batch(*model.knn, Xva);

  if (!is_noise_tolerant(config.pipeline)) {
    ForestConfig fc = config.forest;
    fc.seed = derive_seed(config.seed, "forest");
    model.forest = rf_fit(Xtr, train.binary_label, fc);
    const Eigen::VectorXd s = 0.5 * (knn_val + rf_predict_proba_batch(*model.forest, Xva));
    out.search = tune_gamma(as_span(s), validation.binary_label, config.u, config.grid_size);
  } else {
    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.seed, "logreg");
    std::map<double, LinearModel> fitted;
    const AlphaScorer scorer = [&](double alpha) {
      LinearModel lr = logreg_fit(Xtr, train.binary_label, alpha, tc);
      const Eigen::VectorXd s = 0.5 * (knn_val + linear_predict_proba_batch(lr, Xva));
      fitted[alpha] = std::move(lr);
      return std::vector<double>(s.data(), s.data() + s.size());
    };
    out.alpha = tune_alpha(config.alpha_grid, scorer, validation.binary_label, config.u, config.grid_size);
    model.alpha_star = out.alpha->alpha_star;
    model.linear = fitted.at(out.alpha->alpha_star);
    out.search = out.alpha->search();
  }
  model.pca = std::move(pca);
}

void train_federated(const Config& config, const Dataset& input, TrainOutcome& out, Json& data_report) {
  const GroupingTable table = grouping_for(config);
  const Dataset dataset = has_categories(input) ? input : group_attacks(input, table);
  auto [train, validation] = split(dataset, 1.0 - config.validation_fraction, true, config.seed);
  Partition partition = partition_federated(train, config.federated.nodes, table, config.seed);
  if (partition.normals_resampled)
    out.warnings.push_back("normal pool exhausted; some node normals were drawn with replacement");

  std::size_t flipped = 0;
  if (config.noise.rho > 0.0) {
    for (std::size_t i = 0; i < partition.size(); ++i) {
      auto noisy = inject_sln_noise(partition.nodes[i], {config.noise.rho, derive_seed(config.noise.seed, "node", {i})});
      flipped += noisy.flipped.size();
      partition.nodes[i] = std::move(noisy.dataset);
    }
    auto noisy = inject_sln_noise(validation, {config.noise.rho, derive_seed(config.noise.seed, "validation")});
    flipped += noisy.flipped.size();
    validation = std::move(noisy.dataset);
  }
  data_report["flipped"] = flipped;
  Json sizes = Json::array();
  for (const auto& node : partition.nodes) sizes.push_back(node.size());
  data_report["train"] = sizes;
  data_report["validation"] = validation.size();
  data_report["reduced_dim"] = nullptr;

  FederatedConfig fed;
  fed.aggregation = config.federated.aggregation;
  fed.hidden = is_noise_tolerant(config.pipeline) ? std::vector<Index>{} : config.hidden;
  fed.epochs_per_round = config.federated.epochs_per_round;
  fed.max_rounds = config.federated.max_rounds;
  fed.patience = config.federated.patience;
  fed.min_delta = config.federated.min_delta;
  fed.u = config.u;
  fed.grid_size = config.grid_size;
  TrainConfig tc = config.train;
  tc.seed = config.seed;

  TrainedModel& model = out.model;
  model.aggregator = Aggregator::Max;
  if (!is_noise_tolerant(config.pipeline)) {
    FederatedResult result = federated_train(partition, validation, fed, tc);
    model.stacked = std::move(result.model);
    out.search = std::move(result.search);
    out.federation = std::move(result.state);
  } else {
    std::map<double, FederatedResult> fitted;
    const AlphaScorer scorer = [&](double alpha) {
      FederatedConfig f = fed;
      f.alpha = alpha;
      FederatedResult result = federated_train(partition, validation, f, tc);
      const Eigen::VectorXd s = stacked_aggregate(result.model, validation.features);
      fitted[alpha] = std::move(result);
      return std::vector<double>(s.data(), s.data() + s.size());
    };
    out.alpha = tune_alpha(config.alpha_grid, scorer, validation.binary_label, config.u, config.grid_size);
    FederatedResult& best = fitted.at(out.alpha->alpha_star);
    model.alpha_star = out.alpha->alpha_star;
    model.stacked = std::move(best.model);
    out.search = out.alpha->search();
    out.federation = std::move(best.state);
  }
  model.stacked->gamma_star = out.search.gamma_star;
}

Json history_json(const FedTrainState& state) {
  Json j;
  j["rounds"] = state.round;
  j["max_rounds"] = state.max_rounds;
  j["best_round"] = state.best_round;
  j["stop_reason"] = state.stop_reason;
  Json rounds = Json::array();
  for (const auto& r : state.history)
    rounds.push_back({{"round", r.round},
                      {"gamma", r.gamma},
                      {"tpr", r.tpr},
                      {"fpr", r.fpr},
                      {"feasible", r.feasible},
                      {"upload_bytes", r.upload_bytes}});
  j["history"] = std::move(rounds);
  return j;
}

Json alpha_json(const AlphaSearchResult& a) {
  Json j;
  j["alpha_star"] = a.alpha_star;
  Json trials = Json::array();
  for (const auto& t : a.trials)
    trials.push_back({{"alpha", t.alpha},
                      {"gamma_star", t.search.gamma_star},
                      {"tpr", t.search.tpr},
                      {"fpr", t.search.fpr},
                      {"feasible", t.search.feasible}});
  j["trials"] = std::move(trials);
  return j;
}

}  // namespace

TrainOutcome train_pipeline(const Config& config, const Dataset& dataset) {
  config.validate();
  dataset.validate();
  TrainOutcome out;
  out.model.pipeline = config.pipeline;
  out.model.input_dim = dataset.dim();
  out.model.u = config.u;
  out.model.config = config.to_json();

  Json data_report;
  data_report["samples"] = dataset.size();
  data_report["threats"] = dataset.threat_count();
  data_report["dim"] = dataset.dim();
  if (is_federated(config.pipeline)) train_federated(config, dataset, out, data_report);
  else train_centralized(config, dataset, out, data_report);
  out.model.gamma_star = out.search.gamma_star;

  if (out.search.degenerate) out.warnings.push_back("validation labels contain a single class");
  if (!out.search.feasible)
    out.warnings.push_back("no threshold keeps validation FPR <= u; using the minimum-FPR threshold");

  Json& r = out.report;
  r = header("train");
  r["config"] = out.model.config;
  r["data"] = std::move(data_report);
  r["threshold"] = search_json(out.search, config.report.curve);
  r["alpha"] = out.alpha ? alpha_json(*out.alpha) : Json(nullptr);
  r["federated"] = out.federation ? history_json(*out.federation) : Json(nullptr);
  r["warnings"] = out.warnings;
  return out;
}

// ---------------------------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------------------------

EvalOutcome evaluate_pipeline(const TrainedModel& model, const Dataset& test, bool timing) {
  test.validate();
  EvalOutcome out;
  const Eigen::VectorXd s = model.scores(test.features);
  const std::vector<int> predicted = labels_at(s, model.gamma_star);
  out.confusion = confusion(predicted, test.binary_label);
  out.metrics = metrics(out.confusion);
  std::vector<std::string> categories = test.category;
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (test.noisy[i]) categories[i].clear();
  out.per_category = per_category_tpr(predicted, categories);
  if (timing)
    out.seconds_per_instance =
        time_per_instance([&](const Eigen::Ref<const Eigen::VectorXd>& x) { return model.score(x); }, test.features,
                          kTimingRepetitions);
  if (!out.metrics.is_degenerate("fpr") && out.metrics.fpr > model.u) out.warnings.push_back("test FPR exceeds u");
  for (const auto& name : out.metrics.degenerate) out.warnings.push_back(name + " is undefined; reported as 0");

  Json& r = out.report;
  r = header("eval");
  r["config"] = model.config;
  r["model"] = {{"pipeline", std::string(to_string(model.pipeline))},
                {"gamma_star", model.gamma_star},
                {"alpha_star", model.alpha_star ? Json(*model.alpha_star) : Json(nullptr)},
                {"u", model.u}};
  r["test"] = {{"samples", test.size()}, {"threats", test.threat_count()}};
  r["confusion"] = {{"tp", out.confusion.tp}, {"fp", out.confusion.fp}, {"tn", out.confusion.tn}, {"fn", out.confusion.fn}};
  r["metrics"] = {{"tpr", out.metrics.tpr},
                  {"fpr", out.metrics.fpr},
                  {"accuracy", out.metrics.accuracy},
                  {"precision", out.metrics.precision},
                  {"f1", out.metrics.f1}};
  r["degenerate"] = out.metrics.degenerate;
  Json cats = Json::object();
  for (const auto& [cat, rate] : out.per_category)
    cats[cat] = {{"total", rate.total}, {"detected", rate.detected}, {"missed", rate.missed}, {"tpr", rate.tpr}};
  r["per_category"] = std::move(cats);
  r["timing"] = out.seconds_per_instance
                    ? Json{{"seconds_per_instance", *out.seconds_per_instance}, {"repetitions", kTimingRepetitions}}
                    : Json(nullptr);
  r["warnings"] = out.warnings;
  return out;
}

}  // namespace phec
