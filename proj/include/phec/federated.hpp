#pragma once

#include "phec/classify.hpp"
#include "phec/data.hpp"
#include "phec/ensemble.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phec {

/// One simulated client: its local samples never leave this struct; only `model` is shared.
struct NodeState {
  std::size_t node_id = 0;
  MlpModel model;
  Eigen::MatrixXd features;
  std::vector<int> labels;
  std::uint64_t seed = 0;  // node stream: initialization and per-epoch shuffles
  int epochs_done = 0;

  Index local_size() const { return features.rows(); }
};

std::uint64_t node_seed(std::uint64_t seed, std::size_t node_id);

/// Builds node `node_id` over `local` with a freshly initialized MLP.
NodeState make_node(std::size_t node_id, const Dataset& local, std::span<const Index> architecture,
                    std::optional<double> alpha, std::uint64_t seed);

/// Gradient descent on the node's own data for `epochs` epochs.
NodeState local_train_round(NodeState state, const TrainConfig& config, int epochs);

/// FedStacking matrix: column i holds node i's parameters; scored with the max aggregator.
struct StackedModel {
  std::vector<MlpModel> columns;
  double gamma_star = 0.5;
  Aggregator aggregator = Aggregator::Max;

  std::size_t size() const { return columns.size(); }
  Index input_dim() const { return columns.empty() ? 0 : columns.front().input_dim(); }
};

StackedModel fed_stack(std::span<const MlpModel> params);

/// Size-weighted elementwise average sum_i (a_i / a) w_i.
MlpModel fed_avg(std::span<const MlpModel> params, std::span<const double> sizes);

std::vector<double> stacked_scores(const StackedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
/// N x n matrix of per-column probabilities.
Eigen::MatrixXd stacked_scores_batch(const StackedModel& model, const Eigen::MatrixXd& X);
/// Aggregated score of each row of X.
Eigen::VectorXd stacked_aggregate(const StackedModel& model, const Eigen::MatrixXd& X);
Verdict stacked_predict(const StackedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

enum class Aggregation { FedStack, FedAvg };

std::string_view to_string(Aggregation aggregation);

struct FederatedConfig {
  Aggregation aggregation = Aggregation::FedStack;
  std::vector<Index> hidden = {32, 16};
  std::optional<double> alpha;
  int epochs_per_round = 5;
  int max_rounds = 50;
  int patience = 5;
  double min_delta = 1e-3;
  double u = 0.05;
  std::size_t grid_size = kDefaultGridSize;

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  double gamma = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  bool feasible = false;
  std::size_t upload_bytes = 0;  // parameters sent by all nodes this round
};

struct FedTrainState {
  int round = 0;
  int max_rounds = 0;
  int best_round = 0;
  int patience_counter = 0;
  std::string stop_reason;
  std::vector<RoundRecord> history;

  /// Best feasible TPR per round (0 for rounds where no gamma met the FPR cap).
  std::vector<double> tpr_history() const;
  std::vector<double> gamma_history() const;
};

/// Round-by-round stopping bookkeeping over validation scores.
struct StopRule {
  int patience = 5;
  double min_delta = 1e-3;
  int max_rounds = 50;

  int round = 0;
  int best_round = 0;
  int patience_counter = 0;
  int drops = 0;
  double best_score = -1.0;
  double previous = -1.0;

  /// Records the next round's score; true when it is the new best.
  bool observe(double score);
  /// "saturated", "dropping", "max_rounds", or empty while training should continue.
  std::string reason() const;
};

struct FederatedResult {
  StackedModel model;
  FedTrainState state;
  ThresholdSearchResult search;  // of the restored round
};

/// Trains all nodes round by round, evaluating the aggregated model on the central validation set,
/// and stops when the validation TPR saturates, drops three rounds in a row, or max_rounds is hit.
/// The parameters and gamma of the best round are returned.
FederatedResult federated_train(const Partition& partition, const Dataset& validation, const FederatedConfig& fed,
                                const TrainConfig& train);

}  // namespace phec
