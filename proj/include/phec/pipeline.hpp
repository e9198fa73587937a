#pragma once

#include "phec/classify.hpp"
#include "phec/data.hpp"
#include "phec/ensemble.hpp"
#include "phec/eval.hpp"
#include "phec/federated.hpp"
#include "phec/io.hpp"
#include "phec/reduce.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phec {

enum class PipelineKind { PhecCentralized, PhecFederated, NtPhecCentralized, NtPhecFederated };

std::string_view to_string(PipelineKind kind);
PipelineKind pipeline_from_string(std::string_view text);
bool is_federated(PipelineKind kind);
bool is_noise_tolerant(PipelineKind kind);

struct PcaSettings {
  std::optional<Index> components;  // takes precedence over variance_ratio
  double variance_ratio = 0.95;
};

struct FederatedSettings {
  std::size_t nodes = 4;
  Aggregation aggregation = Aggregation::FedStack;
  int max_rounds = 50;
  int patience = 5;
  double min_delta = 1e-3;
  int epochs_per_round = 5;
  std::optional<std::filesystem::path> grouping;  // NSL-KDD table when absent
};

struct ReportSettings {
  bool curve = true;
  bool timing = false;
};

/// Every knob of a training run. Parsed from JSON; unknown keys are rejected.
struct Config {
  PipelineKind pipeline = PipelineKind::PhecCentralized;
  std::filesystem::path data;
  std::optional<std::filesystem::path> model_out;
  std::optional<std::filesystem::path> report_out;
  std::uint64_t seed = 0;
  double u = 0.05;
  std::size_t grid_size = kDefaultGridSize;
  double validation_fraction = 0.2;
  PcaSettings pca;
  int knn_k = 5;
  ForestConfig forest;
  std::vector<Index> hidden = {32, 16};
  TrainConfig train;
  std::vector<double> alpha_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  FederatedSettings federated;
  NoiseSpec noise;
  ReportSettings report;

  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);
  /// Full echo with defaults filled in; parse(to_json().dump()) reproduces the config.
  Json to_json() const;
  void validate() const;
};

/// A fitted pipeline: optional PCA followed by either a centralized ensemble or a stacked federation.
struct TrainedModel {
  PipelineKind pipeline = PipelineKind::PhecCentralized;
  Index input_dim = 0;
  double u = 0.05;
  double gamma_star = 0.5;
  std::optional<double> alpha_star;
  Aggregator aggregator = Aggregator::Mean;
  std::optional<PcaModel> pca;
  std::optional<KnnModel> knn;
  std::optional<ForestModel> forest;
  std::optional<LinearModel> linear;
  std::optional<StackedModel> stacked;
  Json config;

  /// Aggregated threat score of every row.
  Eigen::VectorXd scores(const Eigen::MatrixXd& X) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
  double score(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

Json to_json(const TrainedModel& model);
TrainedModel trained_model_from_json(const Json& j);
void save_trained_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_trained_model(const std::filesystem::path& path);

struct TrainOutcome {
  TrainedModel model;
  ThresholdSearchResult search;
  std::optional<AlphaSearchResult> alpha;
  std::optional<FedTrainState> federation;
  std::vector<std::string> warnings;
  Json report;
};

TrainOutcome train_pipeline(const Config& config, const Dataset& dataset);

struct EvalOutcome {
  ConfusionMatrix confusion;
  Metrics metrics;
  std::map<std::string, CategoryRate> per_category;
  std::optional<double> seconds_per_instance;
  std::vector<std::string> warnings;
  Json report;
};

inline constexpr int kTimingRepetitions = 5;

EvalOutcome evaluate_pipeline(const TrainedModel& model, const Dataset& test, bool timing = false);

}  // namespace phec
