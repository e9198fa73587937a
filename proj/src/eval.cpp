#include "phec/eval.hpp"

#include "phec/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace phec {

namespace {

const std::string kModule = "eval";

template <typename Model, typename LossFn>
double grad_check_impl(Model model, const LossFn& loss, double epsilon) {
  if (!(epsilon > 0.0)) throw UsageError(kModule, "epsilon must be positive");
  Eigen::VectorXd analytic;
  loss(model, &analytic);
  if (!analytic.allFinite()) throw NumericError(kModule, "analytic gradient is not finite");
  const Eigen::VectorXd base = flatten(model);
  double worst = 0.0;
  for (Index k = 0; k < base.size(); ++k) {
    Eigen::VectorXd p = base;
    p(k) = base(k) + epsilon;
    unflatten(model, p);
    const double up = loss(model, nullptr);
    p(k) = base(k) - epsilon;
    unflatten(model, p);
    const double down = loss(model, nullptr);
    const double numeric = (up - down) / (2.0 * epsilon);
    if (!std::isfinite(numeric)) throw NumericError(kModule, "numeric gradient is not finite");
    const double a = analytic(k);
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw DataError(kModule, "predicted and truth lengths differ (" + std::to_string(predicted.size()) + " vs " +
                                 std::to_string(truth.size()) + ")");
  if (predicted.empty()) throw DataError(kModule, "nothing to evaluate");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) (predicted[i] ? cm.tp : cm.fn)++;
    else (predicted[i] ? cm.fp : cm.tn)++;
  }
  return cm;
}

bool Metrics::is_degenerate(const std::string& name) const {
  return std::find(degenerate.begin(), degenerate.end(), name) != degenerate.end();
}

Metrics metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError(kModule, "confusion matrix is empty");
  Metrics m;
  const auto ratio = [&](std::size_t num, std::size_t den, const char* name) {
    if (den == 0) {
      m.degenerate.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.tpr = ratio(cm.tp, cm.tp + cm.fn, "tpr");
  m.fpr = ratio(cm.fp, cm.fp + cm.tn, "fpr");
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  m.precision = ratio(cm.tp, cm.tp + cm.fp, "precision");
  if (m.precision + m.tpr > 0.0) {
    m.f1 = 2.0 * m.precision * m.tpr / (m.precision + m.tpr);
  } else {
    m.degenerate.emplace_back("f1");
  }
  return m;
}

std::map<std::string, CategoryRate> per_category_tpr(std::span<const int> predicted,
                                                     std::span<const std::string> categories) {
  if (predicted.size() != categories.size()) throw DataError(kModule, "predicted and category lengths differ");
  std::map<std::string, CategoryRate> out;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& cat = categories[i];
    if (cat.empty() || cat == "Normal") continue;
    auto& rate = out[cat];
    ++rate.total;
    (predicted[i] ? rate.detected : rate.missed)++;
  }
  for (auto& [cat, rate] : out) rate.tpr = static_cast<double>(rate.detected) / static_cast<double>(rate.total);
  return out;
}

double grad_check(const LinearModel& model, const Eigen::MatrixXd& X, std::span<const int> y,
                  std::optional<double> alpha, double epsilon) {
  const auto weights = LossWeights::from(alpha);
  return grad_check_impl(
      model, [&](const LinearModel& m, Eigen::VectorXd* g) { return linear_loss(m, X, y, weights, g); }, epsilon);
}

double grad_check(const MlpModel& model, const Eigen::MatrixXd& X, std::span<const int> y,
                  std::optional<double> alpha, double epsilon) {
  const auto weights = LossWeights::from(alpha);
  return grad_check_impl(
      model, [&](const MlpModel& m, Eigen::VectorXd* g) { return mlp_loss(m, X, y, weights, g); }, epsilon);
}

double time_per_instance(const Predictor& predictor, const Eigen::MatrixXd& X, int repetitions) {
  if (X.rows() == 0) throw DataError(kModule, "no instances to time");
  if (repetitions < 3) throw UsageError(kModule, "timing needs at least 3 repetitions");
  using Clock = std::chrono::steady_clock;
  std::vector<double> per_instance;
  volatile double sink = 0.0;
  for (int r = 0; r < repetitions; ++r) {
    const auto start = Clock::now();
    double acc = 0.0;
    for (Index i = 0; i < X.rows(); ++i) acc += predictor(X.row(i).transpose());
    const auto stop = Clock::now();
    sink = sink + acc;
    if (r == 0) continue;
    const double seconds = std::chrono::duration<double>(stop - start).count();
    per_instance.push_back(seconds / static_cast<double>(X.rows()));
  }
  std::sort(per_instance.begin(), per_instance.end());
  const std::size_t n = per_instance.size();
  return n % 2 ? per_instance[n / 2] : 0.5 * (per_instance[n / 2 - 1] + per_instance[n / 2]);
}

}  // namespace phec
