#pragma once

#include "phec/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phec {

using Index = Eigen::Index;

// ---------------------------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------------------------

/// log(1 + e^x) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Logistic loss l(z) = log(1 + e^{-z}).
template <typename Scalar>
Scalar logistic_loss(Scalar z) {
  return softplus(-z);
}

/// Class weights on the logistic loss: threats weigh `positive`, normals weigh `negative`.
struct LossWeights {
  double positive = 1.0;
  double negative = 1.0;

  /// The alpha-weighted loss: (1 - alpha) on threats, alpha on normals.
  static LossWeights from_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("classify", "alpha must lie in [0, 1]");
    return {1.0 - alpha, alpha};
  }
  static LossWeights unweighted() { return {1.0, 1.0}; }
  static LossWeights from(std::optional<double> alpha) { return alpha ? from_alpha(*alpha) : unweighted(); }

  double of(int y01) const { return y01 ? positive : negative; }
};

/// Unweighted loss l(z, y) = 1{y=1} l(z) + 1{y=-1} l(-z) on the raw score z, y in {-1, +1}.
template <typename Scalar>
Scalar ce_loss(Scalar z, int y) {
  return y > 0 ? logistic_loss(z) : logistic_loss(-z);
}

/// l_alpha(z, y) = (1 - alpha) 1{y=1} l(z) + alpha 1{y=-1} l(-z) on the raw score z, y in {-1, +1}.
template <typename Scalar>
Scalar weighted_ce_loss(Scalar z, int y, double alpha) {
  const auto w = LossWeights::from_alpha(alpha);
  return y > 0 ? Scalar(w.positive) * logistic_loss(z) : Scalar(w.negative) * logistic_loss(-z);
}

/// Derivative of the weighted loss with respect to the raw score; y01 in {0, 1}.
template <typename Scalar>
Scalar weighted_ce_derivative(Scalar z, int y01, const LossWeights& w) {
  return y01 ? Scalar(w.positive) * (sigmoid(z) - Scalar(1)) : Scalar(w.negative) * sigmoid(z);
}

template <typename Scalar>
Scalar weighted_ce_value(Scalar z, int y01, const LossWeights& w) {
  return y01 ? Scalar(w.positive) * logistic_loss(z) : Scalar(w.negative) * logistic_loss(-z);
}

/// Cross-entropy on a probability, clamped to [1e-12, 1 - 1e-12]; y in {-1, +1}.
double weighted_ce_loss_prob(double p, int y, double alpha);

/// Maps {0, 1} labels to the {-1, +1} margin convention.
inline int signed_label(int y01) { return y01 ? 1 : -1; }

// ---------------------------------------------------------------------------------------------
// Gradient-descent training
// ---------------------------------------------------------------------------------------------

struct TrainConfig {
  double eta = 0.05;
  int epochs = 200;
  Index batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean training loss before the first epoch and after each epoch.
struct TrainTrace {
  std::vector<double> loss;
};

// ---------------------------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------------------------

struct KnnModel {
  Eigen::MatrixXd points;
  std::vector<int> labels;
  int k = 5;

  Index dim() const { return points.cols(); }
};

/// Noise-tolerant mode rejects K < 5.
KnnModel knn_fit(const Eigen::MatrixXd& X, std::span<const int> y, int k, bool noise_tolerant = false);
double knn_predict_proba(const KnnModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd knn_predict_proba_batch(const KnnModel& model, const Eigen::MatrixXd& X);

// ---------------------------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------------------------

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t max_depth = 12;           // 0: unlimited
  std::size_t features_per_split = 0;   // 0: ceil(sqrt(M))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

class DecisionTree {
public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // threat proportion of the training samples reaching the node
  };

  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  /// Grows a Gini tree on the listed rows.
  static DecisionTree grow(const Eigen::MatrixXd& X, std::span<const int> y, std::vector<Index> rows,
                           std::size_t max_depth, std::size_t features_per_split, std::uint64_t seed);

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
  std::vector<Node> nodes_;
};

inline bool operator==(const DecisionTree::Node& a, const DecisionTree::Node& b) {
  return a.feature == b.feature && a.threshold == b.threshold && a.left == b.left && a.right == b.right &&
         a.value == b.value;
}

struct ForestModel {
  std::vector<DecisionTree> trees;
  Index input_dim = 0;
};

ForestModel rf_fit(const Eigen::MatrixXd& X, std::span<const int> y, const ForestConfig& config);
double rf_predict_proba(const ForestModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd rf_predict_proba_batch(const ForestModel& model, const Eigen::MatrixXd& X);

// ---------------------------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------------------------

struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::optional<double> alpha;  // nullopt: unweighted loss

  Index dim() const { return weights.size(); }
};

/// Glorot-uniform weights drawn from the "init" stream of `seed`, zero bias.
LinearModel linear_init(Index dim, std::uint64_t seed);
LinearModel logreg_fit(const Eigen::MatrixXd& X, std::span<const int> y, std::optional<double> alpha,
                       const TrainConfig& config, TrainTrace* trace = nullptr);
double linear_predict_proba(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd linear_predict_proba_batch(const LinearModel& model, const Eigen::MatrixXd& X);

/// Mean weighted loss over the rows of X; writes d(loss)/d[w..., b] when `gradient` is given.
double linear_loss(const LinearModel& model, const Eigen::MatrixXd& X, std::span<const int> y,
                   const LossWeights& weights, Eigen::VectorXd* gradient = nullptr);
Eigen::VectorXd flatten(const LinearModel& model);
void unflatten(LinearModel& model, const Eigen::VectorXd& params);

// ---------------------------------------------------------------------------------------------
// Multi-layer perceptron
// ---------------------------------------------------------------------------------------------

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Rectifier hidden layers, one sigmoid output unit.
struct MlpModel {
  std::vector<DenseLayer> layers;
  std::optional<double> alpha;  // nullopt: unweighted loss

  Index input_dim() const { return layers.empty() ? 0 : layers.front().weights.cols(); }
  /// Unit counts [input, hidden..., 1].
  std::vector<Index> architecture() const;
  Index parameter_count() const;
};

bool same_architecture(const MlpModel& a, const MlpModel& b);

/// Validates [input, hidden..., 1] and draws Glorot-uniform weights from the "init" stream of `seed`.
MlpModel mlp_init(std::span<const Index> architecture, std::uint64_t seed);

/// Runs `epochs` epochs of mini-batch descent starting at global epoch `first_epoch`; the shuffle
/// for each epoch comes from the "shuffle" stream of config.seed and the global epoch index.
void mlp_train_epochs(MlpModel& model, const Eigen::MatrixXd& X, std::span<const int> y, const TrainConfig& config,
                      int first_epoch, int epochs, TrainTrace* trace = nullptr);

MlpModel mlp_fit(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const Index> architecture,
                 std::optional<double> alpha, const TrainConfig& config, TrainTrace* trace = nullptr);

double mlp_logit(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double mlp_predict_proba(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd mlp_predict_proba_batch(const MlpModel& model, const Eigen::MatrixXd& X);

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& X, std::span<const int> y, const LossWeights& weights,
                Eigen::VectorXd* gradient = nullptr);
/// Layer by layer: weights (column-major) then bias.
Eigen::VectorXd flatten(const MlpModel& model);
void unflatten(MlpModel& model, const Eigen::VectorXd& params);

}  // namespace phec
