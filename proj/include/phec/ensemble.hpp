#pragma once

#include "phec/classify.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace phec {

enum class Verdict { Normal = 0, Threat = 1 };
enum class Aggregator { Mean, Max };

std::string_view to_string(Aggregator aggregator);

double aggregate_mean(std::span<const double> scores);
double aggregate_max(std::span<const double> scores);
double aggregate(Aggregator aggregator, std::span<const double> scores);

/// Threat iff score >= gamma.
constexpr Verdict label(double score, double gamma) { return score >= gamma ? Verdict::Threat : Verdict::Normal; }

struct CurvePoint {
  double gamma;
  double tpr;  // g(gamma)
  double fpr;  // h(gamma)
};

struct ThresholdSearchResult {
  double gamma_star = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  bool feasible = false;
  bool degenerate = false;  // validation truth lacks a class
  double u = 0.0;
  std::size_t grid_size = 0;
  std::vector<CurvePoint> curve;
};

inline constexpr std::size_t kDefaultGridSize = 201;

/// S uniformly spaced points k / (S - 1) over [0, 1].
std::vector<double> gamma_grid(std::size_t grid_size);

/// Maximizes TPR subject to FPR <= u over the gamma grid. Among maximizers the smallest FPR, then
/// the largest gamma, wins. When no grid point meets the cap the result is flagged infeasible and
/// holds the minimum-FPR point (ties: largest TPR, then largest gamma).
ThresholdSearchResult tune_gamma(std::span<const double> scores, std::span<const int> truth, double u,
                                 std::size_t grid_size = kDefaultGridSize);

struct AlphaTrial {
  double alpha;
  ThresholdSearchResult search;
};

struct AlphaSearchResult {
  double alpha_star = 0.5;
  std::size_t best = 0;  // index into trials
  std::vector<AlphaTrial> trials;

  const ThresholdSearchResult& search() const { return trials[best].search; }
};

/// Validation scores of a variant trained with the given alpha.
using AlphaScorer = std::function<std::vector<double>(double alpha)>;

/// Runs tune_gamma for each alpha and keeps the best: feasible beats infeasible, then higher TPR,
/// then lower FPR, then alpha closest to 1/2 (smaller alpha on an exact tie).
AlphaSearchResult tune_alpha(std::span<const double> alpha_grid, const AlphaScorer& scorer,
                             std::span<const int> validation_truth, double u, std::size_t grid_size = kDefaultGridSize);

/// Non-owning handle on any fitted classifier.
using ClassifierRef = std::variant<std::reference_wrapper<const KnnModel>, std::reference_wrapper<const ForestModel>,
                                   std::reference_wrapper<const LinearModel>, std::reference_wrapper<const MlpModel>>;

double predict_proba(const ClassifierRef& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict_proba_batch(const ClassifierRef& model, const Eigen::MatrixXd& X);
Index input_dim(const ClassifierRef& model);

/// Scores of every model on x, aggregated and thresholded at gamma_star.
Verdict phec_predict(std::span<const ClassifierRef> models, Aggregator aggregator, double gamma_star,
                     const Eigen::Ref<const Eigen::VectorXd>& x);

/// Aggregated score of each row of X.
Eigen::VectorXd phec_scores(std::span<const ClassifierRef> models, Aggregator aggregator, const Eigen::MatrixXd& X);

}  // namespace phec
