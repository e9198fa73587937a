#include "phec/ensemble.hpp"

#include "phec/error.hpp"

#include <algorithm>
#include <cmath>

namespace phec {

namespace {

const std::string kModule = "ensemble";

void check_scores(std::span<const double> scores) {
  if (scores.empty()) throw DataError(kModule, "cannot aggregate an empty score vector");
}

// Feasible points: higher TPR, then lower FPR, then larger gamma.
bool better_feasible(const CurvePoint& a, const CurvePoint& b) {
  if (a.tpr != b.tpr) return a.tpr > b.tpr;
  if (a.fpr != b.fpr) return a.fpr < b.fpr;
  return a.gamma > b.gamma;
}

// Fallback points: lower FPR, then higher TPR, then larger gamma.
bool better_fallback(const CurvePoint& a, const CurvePoint& b) {
  if (a.fpr != b.fpr) return a.fpr < b.fpr;
  if (a.tpr != b.tpr) return a.tpr > b.tpr;
  return a.gamma > b.gamma;
}

}  // namespace

std::string_view to_string(Aggregator aggregator) { return aggregator == Aggregator::Mean ? "mean" : "max"; }

double aggregate_mean(std::span<const double> scores) {
  check_scores(scores);
  double sum = 0.0;
  for (double p : scores) sum += p;
  return sum / static_cast<double>(scores.size());
}

double aggregate_max(std::span<const double> scores) {
  check_scores(scores);
  return *std::max_element(scores.begin(), scores.end());
}

double aggregate(Aggregator aggregator, std::span<const double> scores) {
  return aggregator == Aggregator::Mean ? aggregate_mean(scores) : aggregate_max(scores);
}

std::vector<double> gamma_grid(std::size_t grid_size) {
  if (grid_size < 2) throw UsageError(kModule, "gamma grid needs at least 2 points");
  std::vector<double> grid(grid_size);
  const double last = static_cast<double>(grid_size - 1);
  for (std::size_t k = 0; k < grid_size; ++k) grid[k] = static_cast<double>(k) / last;
  return grid;
}

ThresholdSearchResult tune_gamma(std::span<const double> scores, std::span<const int> truth, double u,
                                 std::size_t grid_size) {
  if (!(u >= 0.0 && u <= 1.0)) throw UsageError(kModule, "FPR cap u must lie in [0, 1]");
  const auto grid = gamma_grid(grid_size);
  if (scores.empty() || scores.size() != truth.size())
    throw DataError(kModule, "scores and truth must be non-empty and of equal length");

  std::vector<double> positives, negatives;
  for (std::size_t i = 0; i < scores.size(); ++i) (truth[i] ? positives : negatives).push_back(scores[i]);
  std::sort(positives.begin(), positives.end());
  std::sort(negatives.begin(), negatives.end());
  const auto at_or_above = [](const std::vector<double>& sorted, double gamma) {
    return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), gamma));
  };

  ThresholdSearchResult result;
  result.u = u;
  result.grid_size = grid_size;
  result.degenerate = positives.empty() || negatives.empty();
  result.curve.reserve(grid_size);
  for (double gamma : grid) {
    const double tpr = positives.empty() ? 0.0 : at_or_above(positives, gamma) / static_cast<double>(positives.size());
    const double fpr = negatives.empty() ? 0.0 : at_or_above(negatives, gamma) / static_cast<double>(negatives.size());
    result.curve.push_back({gamma, tpr, fpr});
  }

  const CurvePoint* best = nullptr;
  for (const auto& point : result.curve)
    if (point.fpr <= u && (!best || better_feasible(point, *best))) best = &point;
  result.feasible = best != nullptr;
  if (!best)
    for (const auto& point : result.curve)
      if (!best || better_fallback(point, *best)) best = &point;

  result.gamma_star = best->gamma;
  result.tpr = best->tpr;
  result.fpr = best->fpr;
  return result;
}

AlphaSearchResult tune_alpha(std::span<const double> alpha_grid, const AlphaScorer& scorer,
                             std::span<const int> validation_truth, double u, std::size_t grid_size) {
  if (alpha_grid.empty()) throw UsageError(kModule, "alpha grid is empty");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw UsageError(kModule, "alpha grid values must lie in [0, 1]");

  AlphaSearchResult out;
  for (double alpha : alpha_grid) {
    const auto scores = scorer(alpha);
    out.trials.push_back({alpha, tune_gamma(scores, validation_truth, u, grid_size)});
  }

  const auto better = [](const AlphaTrial& a, const AlphaTrial& b) {
    if (a.search.feasible != b.search.feasible) return a.search.feasible;
    if (a.search.feasible) {
      if (a.search.tpr != b.search.tpr) return a.search.tpr > b.search.tpr;
      if (a.search.fpr != b.search.fpr) return a.search.fpr < b.search.fpr;
    } else {
      if (a.search.fpr != b.search.fpr) return a.search.fpr < b.search.fpr;
      if (a.search.tpr != b.search.tpr) return a.search.tpr > b.search.tpr;
    }
    const double da = std::abs(a.alpha - 0.5), db = std::abs(b.alpha - 0.5);
    if (std::abs(da - db) > 1e-12) return da < db;
    return a.alpha < b.alpha;
  };
  for (std::size_t i = 1; i < out.trials.size(); ++i)
    if (better(out.trials[i], out.trials[out.best])) out.best = i;
  out.alpha_star = out.trials[out.best].alpha;
  return out;
}

double predict_proba(const ClassifierRef& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::visit(
      [&](const auto& ref) -> double {
        using Model = std::decay_t<decltype(ref.get())>;
        if constexpr (std::is_same_v<Model, KnnModel>) return knn_predict_proba(ref.get(), x);
        else if constexpr (std::is_same_v<Model, ForestModel>) return rf_predict_proba(ref.get(), x);
        else if constexpr (std::is_same_v<Model, LinearModel>) return linear_predict_proba(ref.get(), x);
        else return mlp_predict_proba(ref.get(), x);
      },
      model);
}

Eigen::VectorXd predict_proba_batch(const ClassifierRef& model, const Eigen::MatrixXd& X) {
  return std::visit(
      [&](const auto& ref) -> Eigen::VectorXd {
        using Model = std::decay_t<decltype(ref.get())>;
        if constexpr (std::is_same_v<Model, KnnModel>) return knn_predict_proba_batch(ref.get(), X);
        else if constexpr (std::is_same_v<Model, ForestModel>) return rf_predict_proba_batch(ref.get(), X);
        else if constexpr (std::is_same_v<Model, LinearModel>) return linear_predict_proba_batch(ref.get(), X);
        else return mlp_predict_proba_batch(ref.get(), X);
      },
      model);
}

Index input_dim(const ClassifierRef& model) {
  return std::visit(
      [](const auto& ref) -> Index {
        using Model = std::decay_t<decltype(ref.get())>;
        if constexpr (std::is_same_v<Model, KnnModel>) return ref.get().dim();
        else if constexpr (std::is_same_v<Model, ForestModel>) return ref.get().input_dim;
        else if constexpr (std::is_same_v<Model, LinearModel>) return ref.get().dim();
        else return ref.get().input_dim();
      },
      model);
}

Verdict phec_predict(std::span<const ClassifierRef> models, Aggregator aggregator, double gamma_star,
                     const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (models.empty()) throw UsageError(kModule, "ensemble has no models");
  std::vector<double> scores;
  scores.reserve(models.size());
  for (const auto& m : models) {
    if (input_dim(m) != x.size())
      throw DataError(kModule, "model expects " + std::to_string(input_dim(m)) + " features, sample has " +
                                   std::to_string(x.size()));
    scores.push_back(predict_proba(m, x));
  }
  return label(aggregate(aggregator, scores), gamma_star);
}

Eigen::VectorXd phec_scores(std::span<const ClassifierRef> models, Aggregator aggregator, const Eigen::MatrixXd& X) {
  if (models.empty()) throw UsageError(kModule, "ensemble has no models");
  Eigen::MatrixXd per_model(X.rows(), static_cast<Index>(models.size()));
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (input_dim(models[m]) != X.cols())
      throw DataError(kModule, "model expects " + std::to_string(input_dim(models[m])) + " features, data has " +
                                   std::to_string(X.cols()));
    per_model.col(static_cast<Index>(m)) = predict_proba_batch(models[m], X);
  }
  Eigen::VectorXd out(X.rows());
  std::vector<double> row(models.size());
  for (Index i = 0; i < X.rows(); ++i) {
    for (std::size_t m = 0; m < models.size(); ++m) row[m] = per_model(i, static_cast<Index>(m));
    out(i) = aggregate(aggregator, row);
  }
  return out;
}

}  // namespace phec
