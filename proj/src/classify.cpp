#include "phec/classify.hpp"

#include "phec/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace phec {

namespace {

const std::string kModule = "classify";

void check_labels(const Eigen::MatrixXd& X, std::span<const int> y) {
  if (X.rows() == 0) throw DataError(kModule, "training set is empty");
  if (static_cast<std::size_t>(X.rows()) != y.size())
    throw DataError(kModule, "feature rows and labels differ in length");
  for (int v : y)
    if (v != 0 && v != 1) throw DataError(kModule, "labels must be 0 or 1");
}

void check_dim(Index expected, Index got) {
  if (expected != got)
    throw DataError(kModule, "model expects " + std::to_string(expected) + " features, got " + std::to_string(got));
}

double glorot_limit(Index fan_in, Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Row order of one epoch: identity for full-batch descent, a seeded permutation otherwise.
std::vector<Index> epoch_order(Index n, const TrainConfig& config, int epoch) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (config.batch_size < n) {
    Rng rng(derive_seed(config.seed, "shuffle", {static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);
  }
  return order;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X, std::span<const Index> rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = X.row(rows[r]);
  return out;
}

std::vector<int> gather_labels(std::span<const int> y, std::span<const Index> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = y[static_cast<std::size_t>(rows[r])];
  return out;
}

void record_loss(TrainTrace* trace, double loss, int epoch) {
  if (!std::isfinite(loss))
    throw NumericError(kModule, "non-finite training loss at epoch " + std::to_string(epoch));
  if (trace) trace->loss.push_back(loss);
}

}  // namespace

double weighted_ce_loss_prob(double p, int y, double alpha) {
  const auto w = LossWeights::from_alpha(alpha);
  const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return y > 0 ? -w.positive * std::log(q) : -w.negative * std::log1p(-q);
}

void TrainConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw UsageError(kModule, "learning rate must be finite and >= 0");
  if (epochs < 0) throw UsageError(kModule, "epochs must be non-negative");
  if (batch_size < 1) throw UsageError(kModule, "batch size must be positive");
}

// --- KNN -------------------------------------------------------------------------------------

KnnModel knn_fit(const Eigen::MatrixXd& X, std::span<const int> y, int k, bool noise_tolerant) {
  check_labels(X, y);
  if (k < 1) throw UsageError(kModule, "K must be at least 1");
  if (noise_tolerant && k < 5) throw UsageError(kModule, "noise-tolerant KNN requires K >= 5");
  if (k > X.rows())
    throw UsageError(kModule, "K = " + std::to_string(k) + " exceeds the " + std::to_string(X.rows()) +
                                  " stored samples");
  return KnnModel{X, std::vector<int>(y.begin(), y.end()), k};
}

double knn_predict_proba(const KnnModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(model.dim(), x.size());
  const Eigen::VectorXd dist = (model.points.rowwise() - x.transpose()).rowwise().squaredNorm();
  std::vector<Index> idx(static_cast<std::size_t>(dist.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  const auto closer = [&](Index a, Index b) { return dist(a) < dist(b) || (dist(a) == dist(b) && a < b); };
  const auto kth = idx.begin() + (model.k - 1);
  std::nth_element(idx.begin(), kth, idx.end(), closer);
  int threats = 0;
  for (auto it = idx.begin(); it <= kth; ++it) threats += model.labels[static_cast<std::size_t>(*it)];
  return static_cast<double>(threats) / model.k;
}

Eigen::VectorXd knn_predict_proba_batch(const KnnModel& model, const Eigen::MatrixXd& X) {
  Eigen::VectorXd p(X.rows());
  for (Index i = 0; i < X.rows(); ++i) p(i) = knn_predict_proba(model, X.row(i).transpose());
  return p;
}

// --- Decision trees and forests --------------------------------------------------------------

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

/// Weighted Gini impurity n * (1 - p^2 - (1-p)^2) of a child with `pos` threats among `n`.
double gini_mass(double n, double pos) { return n > 0 ? 2.0 * pos * (n - pos) / n : 0.0; }

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

class TreeGrower {
public:
  TreeGrower(const Eigen::MatrixXd& X, std::span<const int> y, std::size_t max_depth, std::size_t features_per_split,
             std::uint64_t seed)
      : X_(X), y_(y), max_depth_(max_depth), features_per_split_(features_per_split), rng_(seed) {}

  std::vector<DecisionTree::Node> run(std::vector<Index> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

private:
  int grow(std::vector<Index> rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double pos = 0;
    for (Index r : rows) pos += y_[static_cast<std::size_t>(r)];
    const double n = static_cast<double>(rows.size());
    nodes_[static_cast<std::size_t>(id)].value = n > 0 ? pos / n : 0.0;

    const bool pure = pos == 0 || pos == n;
    if (pure || rows.size() < 2 || (max_depth_ != 0 && depth >= max_depth_)) return id;

    const SplitChoice best = best_split(rows, pos);
    if (best.feature < 0) return id;

    std::vector<Index> left, right;
    for (Index r : rows) (X_(r, best.feature) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::vector<Index> candidate_features() {
    const auto m = static_cast<std::size_t>(X_.cols());
    std::vector<Index> features(m);
    std::iota(features.begin(), features.end(), Index{0});
    if (features_per_split_ >= m) return features;
    for (std::size_t i = 0; i < features_per_split_; ++i)
      std::swap(features[i], features[i + rng_.index(m - i)]);
    features.resize(features_per_split_);
    std::sort(features.begin(), features.end());
    return features;
  }

  SplitChoice best_split(const std::vector<Index>& rows, double pos_total) {
    SplitChoice best;
    const double n = static_cast<double>(rows.size());
    std::vector<std::pair<double, int>> column(rows.size());
    for (Index f : candidate_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        column[i] = {X_(rows[i], f), y_[static_cast<std::size_t>(rows[i])]};
      std::sort(column.begin(), column.end());
      double left_n = 0, left_pos = 0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_n += 1;
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double impurity = gini_mass(left_n, left_pos) + gini_mass(n - left_n, pos_total - left_pos);
        if (impurity < best.impurity) {
          best.feature = static_cast<int>(f);
          best.threshold = midpoint(column[i].first, column[i + 1].first);
          best.impurity = impurity;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  std::span<const int> y_;
  std::size_t max_depth_;
  std::size_t features_per_split_;
  Rng rng_;
  std::vector<DecisionTree::Node> nodes_;
};

}  // namespace

DecisionTree DecisionTree::grow(const Eigen::MatrixXd& X, std::span<const int> y, std::vector<Index> rows,
                                std::size_t max_depth, std::size_t features_per_split, std::uint64_t seed) {
  return DecisionTree(TreeGrower(X, y, max_depth, features_per_split, seed).run(std::move(rows)));
}

double DecisionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0)
    i = static_cast<std::size_t>(x(nodes_[i].feature) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right);
  return nodes_[i].value;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

ForestModel rf_fit(const Eigen::MatrixXd& X, std::span<const int> y, const ForestConfig& config) {
  check_labels(X, y);
  if (config.trees == 0) throw UsageError(kModule, "forest needs at least one tree");
  const auto m = static_cast<std::size_t>(X.cols());
  std::size_t per_split = config.features_per_split;
  if (per_split == 0) per_split = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
  per_split = std::min(per_split, m);

  ForestModel forest;
  forest.input_dim = X.cols();
  forest.trees.reserve(config.trees);
  const auto n = static_cast<std::uint64_t>(X.rows());
  for (std::size_t t = 0; t < config.trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(config.seed, "tree", {t});
    std::vector<Index> rows(static_cast<std::size_t>(n));
    if (config.bootstrap) {
      Rng rng(derive_seed(tree_seed, "bootstrap"));
      for (auto& r : rows) r = static_cast<Index>(rng.index(n));
    } else {
      std::iota(rows.begin(), rows.end(), Index{0});
    }
    forest.trees.push_back(
        DecisionTree::grow(X, y, std::move(rows), config.max_depth, per_split, derive_seed(tree_seed, "features")));
  }
  return forest;
}

double rf_predict_proba(const ForestModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(model.input_dim, x.size());
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.predict(x);
  return sum / static_cast<double>(model.trees.size());
}

Eigen::VectorXd rf_predict_proba_batch(const ForestModel& model, const Eigen::MatrixXd& X) {
  Eigen::VectorXd p(X.rows());
  for (Index i = 0; i < X.rows(); ++i) p(i) = rf_predict_proba(model, X.row(i).transpose());
  return p;
}

// --- Logistic regression ---------------------------------------------------------------------

LinearModel linear_init(Index dim, std::uint64_t seed) {
  LinearModel model;
  model.weights.resize(dim);
  Rng rng(derive_seed(seed, "init"));
  const double limit = glorot_limit(dim, 1);
  for (Index i = 0; i < dim; ++i) model.weights(i) = rng.uniform(-limit, limit);
  return model;
}

double linear_loss(const LinearModel& model, const Eigen::MatrixXd& X, std::span<const int> y,
                   const LossWeights& weights, Eigen::VectorXd* gradient) {
  check_dim(model.dim(), X.cols());
  const Eigen::VectorXd z = (X * model.weights).array() + model.bias;
  const double n = static_cast<double>(X.rows());
  double loss = 0.0;
  Eigen::VectorXd dz(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    loss += weighted_ce_value(z(i), yi, weights);
    dz(i) = weighted_ce_derivative(z(i), yi, weights) / n;
  }
  if (gradient) {
    gradient->resize(model.dim() + 1);
    gradient->head(model.dim()) = X.transpose() * dz;
    (*gradient)(model.dim()) = dz.sum();
  }
  return loss / n;
}

Eigen::VectorXd flatten(const LinearModel& model) {
  Eigen::VectorXd p(model.dim() + 1);
  p << model.weights, model.bias;
  return p;
}

void unflatten(LinearModel& model, const Eigen::VectorXd& params) {
  if (params.size() != model.dim() + 1) throw DataError(kModule, "parameter vector has the wrong length");
  model.weights = params.head(model.dim());
  model.bias = params(model.dim());
}

LinearModel logreg_fit(const Eigen::MatrixXd& X, std::span<const int> y, std::optional<double> alpha,
                       const TrainConfig& config, TrainTrace* trace) {
  check_labels(X, y);
  config.validate();
  const auto weights = LossWeights::from(alpha);
  LinearModel model = linear_init(X.cols(), config.seed);
  model.alpha = alpha;

  record_loss(trace, linear_loss(model, X, y, weights), 0);
  const Index n = X.rows();
  Eigen::VectorXd grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(n, config, epoch);
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index len = std::min(config.batch_size, n - start);
      const std::span<const Index> rows(order.data() + start, static_cast<std::size_t>(len));
      if (len == n) {
        linear_loss(model, X, y, weights, &grad);
      } else {
        const auto labels = gather_labels(y, rows);
        linear_loss(model, gather_rows(X, rows), labels, weights, &grad);
      }
      model.weights -= config.eta * grad.head(model.dim());
      model.bias -= config.eta * grad(model.dim());
    }
    record_loss(trace, linear_loss(model, X, y, weights), epoch + 1);
  }
  return model;
}

double linear_predict_proba(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(model.dim(), x.size());
  return sigmoid(model.weights.dot(x) + model.bias);
}

Eigen::VectorXd linear_predict_proba_batch(const LinearModel& model, const Eigen::MatrixXd& X) {
  check_dim(model.dim(), X.cols());
  const Eigen::VectorXd z = (X * model.weights).array() + model.bias;
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

// --- MLP -------------------------------------------------------------------------------------

std::vector<Index> MlpModel::architecture() const {
  std::vector<Index> arch;
  if (layers.empty()) return arch;
  arch.push_back(layers.front().weights.cols());
  for (const auto& l : layers) arch.push_back(l.weights.rows());
  return arch;
}

Index MlpModel::parameter_count() const {
  Index count = 0;
  for (const auto& l : layers) count += l.weights.size() + l.bias.size();
  return count;
}

bool same_architecture(const MlpModel& a, const MlpModel& b) { return a.architecture() == b.architecture(); }

MlpModel mlp_init(std::span<const Index> architecture, std::uint64_t seed) {
  if (architecture.size() < 2) throw UsageError(kModule, "MLP architecture needs an input and an output size");
  if (architecture.back() != 1) throw UsageError(kModule, "MLP architecture must end in exactly 1 output unit");
  for (Index units : architecture)
    if (units < 1) throw UsageError(kModule, "MLP layer sizes must be positive");

  MlpModel model;
  Rng rng(derive_seed(seed, "init"));
  for (std::size_t l = 0; l + 1 < architecture.size(); ++l) {
    const Index in = architecture[l], out = architecture[l + 1];
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    const double limit = glorot_limit(in, out);
    for (Index r = 0; r < out; ++r)
      for (Index c = 0; c < in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

double mlp_logit(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(model.input_dim(), x.size());
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Eigen::VectorXd z = model.layers[l].weights * a + model.layers[l].bias;
    if (l + 1 < model.layers.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a(0);
}

double mlp_predict_proba(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return sigmoid(mlp_logit(model, x));
}

Eigen::VectorXd mlp_predict_proba_batch(const MlpModel& model, const Eigen::MatrixXd& X) {
  check_dim(model.input_dim(), X.cols());
  Eigen::MatrixXd a = X.transpose();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Eigen::MatrixXd z = (model.layers[l].weights * a).colwise() + model.layers[l].bias;
    if (l + 1 < model.layers.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a.row(0).transpose().unaryExpr([](double v) { return sigmoid(v); });
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& X, std::span<const int> y, const LossWeights& weights,
                Eigen::VectorXd* gradient) {
  check_dim(model.input_dim(), X.cols());
  const std::size_t L = model.layers.size();
  const double n = static_cast<double>(X.rows());

  // activations[0] is the input; pre[l] are the pre-activations of layer l.
  std::vector<Eigen::MatrixXd> activations(L + 1), pre(L);
  activations[0] = X.transpose();
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = (model.layers[l].weights * activations[l]).colwise() + model.layers[l].bias;
    activations[l + 1] = l + 1 < L ? Eigen::MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
  }

  double loss = 0.0;
  Eigen::MatrixXd delta(1, X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const double z = pre[L - 1](0, i);
    const int yi = y[static_cast<std::size_t>(i)];
    loss += weighted_ce_value(z, yi, weights);
    delta(0, i) = weighted_ce_derivative(z, yi, weights) / n;
  }
  if (!gradient) return loss / n;

  gradient->resize(model.parameter_count());
  std::vector<Eigen::MatrixXd> grad_w(L);
  std::vector<Eigen::VectorXd> grad_b(L);
  for (std::size_t l = L; l-- > 0;) {
    grad_w[l] = delta * activations[l].transpose();
    grad_b[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.layers[l].weights.transpose() * delta;
      delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  Index offset = 0;
  for (std::size_t l = 0; l < L; ++l) {
    gradient->segment(offset, grad_w[l].size()) = Eigen::Map<const Eigen::VectorXd>(grad_w[l].data(), grad_w[l].size());
    offset += grad_w[l].size();
    gradient->segment(offset, grad_b[l].size()) = grad_b[l];
    offset += grad_b[l].size();
  }
  return loss / n;
}

Eigen::VectorXd flatten(const MlpModel& model) {
  Eigen::VectorXd p(model.parameter_count());
  Index offset = 0;
  for (const auto& l : model.layers) {
    p.segment(offset, l.weights.size()) = Eigen::Map<const Eigen::VectorXd>(l.weights.data(), l.weights.size());
    offset += l.weights.size();
    p.segment(offset, l.bias.size()) = l.bias;
    offset += l.bias.size();
  }
  return p;
}

void unflatten(MlpModel& model, const Eigen::VectorXd& params) {
  if (params.size() != model.parameter_count()) throw DataError(kModule, "parameter vector has the wrong length");
  Index offset = 0;
  for (auto& l : model.layers) {
    Eigen::Map<Eigen::VectorXd>(l.weights.data(), l.weights.size()) = params.segment(offset, l.weights.size());
    offset += l.weights.size();
    l.bias = params.segment(offset, l.bias.size());
    offset += l.bias.size();
  }
}

void mlp_train_epochs(MlpModel& model, const Eigen::MatrixXd& X, std::span<const int> y, const TrainConfig& config,
                      int first_epoch, int epochs, TrainTrace* trace) {
  check_labels(X, y);
  check_dim(model.input_dim(), X.cols());
  config.validate();
  const auto weights = LossWeights::from(model.alpha);
  const Index n = X.rows();
  if (trace && trace->loss.empty()) record_loss(trace, mlp_loss(model, X, y, weights), first_epoch);

  Eigen::VectorXd grad;
  for (int e = 0; e < epochs; ++e) {
    const int epoch = first_epoch + e;
    const auto order = epoch_order(n, config, epoch);
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index len = std::min(config.batch_size, n - start);
      const std::span<const Index> rows(order.data() + start, static_cast<std::size_t>(len));
      if (len == n) {
        mlp_loss(model, X, y, weights, &grad);
      } else {
        const auto labels = gather_labels(y, rows);
        mlp_loss(model, gather_rows(X, rows), labels, weights, &grad);
      }
      if (!grad.allFinite())
        throw NumericError(kModule, "non-finite gradient at epoch " + std::to_string(epoch + 1));
      Index offset = 0;
      for (auto& l : model.layers) {
        Eigen::Map<Eigen::VectorXd>(l.weights.data(), l.weights.size()) -=
            config.eta * grad.segment(offset, l.weights.size());
        offset += l.weights.size();
        l.bias -= config.eta * grad.segment(offset, l.bias.size());
        offset += l.bias.size();
      }
    }
    if (trace) record_loss(trace, mlp_loss(model, X, y, weights), epoch + 1);
  }
}

MlpModel mlp_fit(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const Index> architecture,
                 std::optional<double> alpha, const TrainConfig& config, TrainTrace* trace) {
  if (!architecture.empty() && architecture.front() != X.cols())
    throw UsageError(kModule, "MLP input size " + std::to_string(architecture.front()) + " does not match " +
                                  std::to_string(X.cols()) + " features");
  if (alpha) LossWeights::from_alpha(*alpha);
  MlpModel model = mlp_init(architecture, config.seed);
  model.alpha = alpha;
  mlp_train_epochs(model, X, y, config, 0, config.epochs, trace);
  return model;
}

}  // namespace phec
