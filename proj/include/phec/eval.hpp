#pragma once

#include "phec/classify.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phec {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Threat (1) is the positive class.
ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth);

struct Metrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  /// Names of metrics whose denominator was zero; those metrics are reported as 0.
  std::vector<std::string> degenerate;

  bool is_degenerate(const std::string& name) const;
};

Metrics metrics(const ConfusionMatrix& cm);

struct CategoryRate {
  std::size_t total = 0;
  std::size_t detected = 0;
  std::size_t missed = 0;
  double tpr = 0.0;
};

/// Detection counts per attack category. Normal and empty categories are skipped, as are
/// categories with no samples.
std::map<std::string, CategoryRate> per_category_tpr(std::span<const int> predicted,
                                                     std::span<const std::string> categories);

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all parameters, with the
/// numeric gradient from central differences of the mean (weighted) loss.
double grad_check(const LinearModel& model, const Eigen::MatrixXd& X, std::span<const int> y,
                  std::optional<double> alpha, double epsilon);
double grad_check(const MlpModel& model, const Eigen::MatrixXd& X, std::span<const int> y,
                  std::optional<double> alpha, double epsilon);

using Predictor = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

/// Median over `repetitions` timed passes of the per-instance prediction latency in seconds. The
/// first pass serves as warm-up and is left out of the median; the predictor is called exactly
/// repetitions * rows(X) times.
double time_per_instance(const Predictor& predictor, const Eigen::MatrixXd& X, int repetitions);

}  // namespace phec
