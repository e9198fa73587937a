#include "phec/federated.hpp"

#include "phec/error.hpp"
#include "phec/rng.hpp"

#include <algorithm>

namespace phec {

namespace {

const std::string kModule = "federated";

std::vector<Index> full_architecture(Index input, const std::vector<Index>& hidden) {
  std::vector<Index> arch{input};
  arch.insert(arch.end(), hidden.begin(), hidden.end());
  arch.push_back(1);
  return arch;
}

}  // namespace

std::uint64_t node_seed(std::uint64_t seed, std::size_t node_id) { return derive_seed(seed, "node", {node_id}); }

NodeState make_node(std::size_t node_id, const Dataset& local, std::span<const Index> architecture,
                    std::optional<double> alpha, std::uint64_t seed) {
  if (local.size() == 0) throw DataError(kModule, "node " + std::to_string(node_id) + " has an empty dataset");
  NodeState node;
  node.node_id = node_id;
  node.seed = node_seed(seed, node_id);
  node.model = mlp_init(architecture, node.seed);
  node.model.alpha = alpha;
  node.features = local.features;
  node.labels = local.binary_label;
  return node;
}

NodeState local_train_round(NodeState state, const TrainConfig& config, int epochs) {
  TrainConfig local = config;
  local.seed = state.seed;
  try {
    mlp_train_epochs(state.model, state.features, state.labels, local, state.epochs_done, epochs);
  } catch (const NumericError& e) {
    throw NumericError(kModule, "node " + std::to_string(state.node_id) + ": " + e.what());
  }
  state.epochs_done += epochs;
  return state;
}

StackedModel fed_stack(std::span<const MlpModel> params) {
  if (params.empty()) throw UsageError(kModule, "cannot stack zero parameter sets");
  for (const auto& p : params)
    if (!same_architecture(p, params.front()))
      throw DataError(kModule, "stacked parameter sets have different architectures");
  StackedModel stacked;
  stacked.columns.assign(params.begin(), params.end());
  return stacked;
}

MlpModel fed_avg(std::span<const MlpModel> params, std::span<const double> sizes) {
  if (params.empty()) throw UsageError(kModule, "cannot average zero parameter sets");
  if (params.size() != sizes.size())
    throw UsageError(kModule, "got " + std::to_string(params.size()) + " parameter sets but " +
                                  std::to_string(sizes.size()) + " sizes");
  double total = 0.0;
  for (double a : sizes) {
    if (!(a > 0.0)) throw UsageError(kModule, "node sizes must be positive");
    total += a;
  }
  for (const auto& p : params)
    if (!same_architecture(p, params.front()))
      throw DataError(kModule, "averaged parameter sets have different architectures");

  MlpModel out = params.front();
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    out.layers[l].weights.setZero();
    out.layers[l].bias.setZero();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double w = sizes[i] / total;
      out.layers[l].weights += w * params[i].layers[l].weights;
      out.layers[l].bias += w * params[i].layers[l].bias;
    }
  }
  return out;
}

std::vector<double> stacked_scores(const StackedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::vector<double> p;
  p.reserve(model.size());
  for (const auto& column : model.columns) p.push_back(mlp_predict_proba(column, x));
  return p;
}

Eigen::MatrixXd stacked_scores_batch(const StackedModel& model, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd p(X.rows(), static_cast<Index>(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i) p.col(static_cast<Index>(i)) = mlp_predict_proba_batch(model.columns[i], X);
  return p;
}

Eigen::VectorXd stacked_aggregate(const StackedModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd p = stacked_scores_batch(model, X);
  if (model.aggregator == Aggregator::Max) return p.rowwise().maxCoeff();
  return p.rowwise().mean();
}

Verdict stacked_predict(const StackedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return label(aggregate(model.aggregator, stacked_scores(model, x)), model.gamma_star);
}

std::string_view to_string(Aggregation aggregation) {
  return aggregation == Aggregation::FedStack ? "fedstack" : "fedavg";
}

void FederatedConfig::validate() const {
  if (epochs_per_round < 1) throw UsageError(kModule, "epochs_per_round must be positive");
  if (max_rounds < 1) throw UsageError(kModule, "max_rounds must be positive");
  if (patience < 1) throw UsageError(kModule, "patience must be positive");
  if (!(min_delta >= 0.0)) throw UsageError(kModule, "min_delta must be non-negative");
  if (!(u >= 0.0 && u <= 1.0)) throw UsageError(kModule, "u must lie in [0, 1]");
}

std::vector<double> FedTrainState::tpr_history() const {
  std::vector<double> out;
  for (const auto& r : history) out.push_back(r.feasible ? r.tpr : 0.0);
  return out;
}

std::vector<double> FedTrainState::gamma_history() const {
  std::vector<double> out;
  for (const auto& r : history) out.push_back(r.gamma);
  return out;
}

bool StopRule::observe(double score) {
  ++round;
  if (round == 1 || score > best_score + min_delta) patience_counter = 0;
  else ++patience_counter;
  drops = (round > 1 && score < previous) ? drops + 1 : 0;
  previous = score;
  if (round == 1 || score > best_score) {
    best_score = score;
    best_round = round;
    return true;
  }
  return false;
}

std::string StopRule::reason() const {
  if (patience_counter >= patience) return "saturated";
  if (drops >= 3) return "dropping";
  if (round >= max_rounds) return "max_rounds";
  return {};
}

FederatedResult federated_train(const Partition& partition, const Dataset& validation, const FederatedConfig& fed,
                                const TrainConfig& train) {
  fed.validate();
  train.validate();
  if (partition.size() == 0) throw UsageError(kModule, "partition has no nodes");
  if (validation.size() == 0) throw DataError(kModule, "validation set is empty");
  const Index dim = partition.nodes.front().dim();
  if (validation.dim() != dim) throw DataError(kModule, "validation features do not match node features");
  const auto arch = full_architecture(dim, fed.hidden);

  std::vector<NodeState> nodes;
  std::vector<double> sizes;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    nodes.push_back(make_node(i, partition.nodes[i], arch, fed.alpha, train.seed));
    sizes.push_back(static_cast<double>(nodes.back().local_size()));
  }

  std::optional<MlpModel> global;
  if (fed.aggregation == Aggregation::FedAvg) {
    global = mlp_init(arch, derive_seed(train.seed, "global"));
    global->alpha = fed.alpha;
  }

  FederatedResult best;
  FedTrainState state;
  state.max_rounds = fed.max_rounds;
  StopRule rule{fed.patience, fed.min_delta, fed.max_rounds};
  std::vector<MlpModel> params(nodes.size());

  for (int t = 1; t <= fed.max_rounds; ++t) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (global) nodes[i].model = *global;
      nodes[i] = local_train_round(std::move(nodes[i]), train, fed.epochs_per_round);
      params[i] = nodes[i].model;
    }

    StackedModel current;
    if (global) {
      global = fed_avg(params, sizes);
      current = fed_stack(std::span<const MlpModel>(&*global, 1));
    } else {
      current = fed_stack(params);
    }

    const Eigen::VectorXd scores = stacked_aggregate(current, validation.features);
    auto search = tune_gamma(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                             validation.binary_label, fed.u, fed.grid_size);
    current.gamma_star = search.gamma_star;

    RoundRecord record{t, search.gamma_star, search.tpr, search.fpr, search.feasible,
                       params.size() * static_cast<std::size_t>(params.front().parameter_count()) * sizeof(double)};
    state.history.push_back(record);
    state.round = t;

    if (rule.observe(search.feasible ? search.tpr : 0.0)) {
      best.model = std::move(current);
      best.search = std::move(search);
    }
    state.best_round = rule.best_round;
    state.patience_counter = rule.patience_counter;
    state.stop_reason = rule.reason();
    if (!state.stop_reason.empty()) break;
  }

  best.state = std::move(state);
  return best;
}

}  // namespace phec
