#include "phec/classify.hpp"
#include "phec/eval.hpp"
#include "phec/federated.hpp"
#include "phec/rng.hpp"

#include <doctest.h>

#include <algorithm>

using namespace phec;

namespace {

std::pair<Eigen::MatrixXd, std::vector<int>> random_points(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(n, d);
  std::vector<int> y;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) X(i, j) = rng.normal();
    y.push_back(rng.uniform() < 0.5 ? 1 : 0);
  }
  return {X, y};
}

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector<int> truth{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  CHECK(confusion(truth, truth) == ConfusionMatrix{5, 0, 5, 0});

  const std::vector<int> t2{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<int> all(10, 1);
  const ConfusionMatrix cm = confusion(all, t2);
  CHECK(cm.tp == 3);
  CHECK(cm.fp == 7);

  std::vector<int> flipped;
  for (int v : truth) flipped.push_back(1 - v);
  const ConfusionMatrix c = confusion(flipped, truth);
  CHECK(c.tp == 0);
  CHECK(c.tn == 0);

  CHECK_THROWS_AS(confusion(std::vector<int>{1}, std::vector<int>{1, 0}), DataError);
}

TEST_CASE("metric definitions and degenerate flags") {
  const Metrics a = metrics(ConfusionMatrix{9, 0, 0, 1});
  CHECK(a.tpr == doctest::Approx(0.9).epsilon(1e-15));

  const Metrics b = metrics(ConfusionMatrix{0, 0, 10, 0});
  CHECK(b.fpr == 0.0);
  CHECK(b.precision == 0.0);
  CHECK(b.is_degenerate("precision"));
  CHECK(b.is_degenerate("tpr"));
  CHECK_FALSE(b.is_degenerate("fpr"));

  const Metrics c = metrics(ConfusionMatrix{50, 0, 50, 0});
  CHECK(c.accuracy == 1.0);
  CHECK(c.f1 == 1.0);
  CHECK(c.degenerate.empty());

  CHECK_THROWS_AS(metrics(ConfusionMatrix{}), DataError);
}

TEST_CASE("metric invariants") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionMatrix cm{rng.index(20), rng.index(20), rng.index(20), rng.index(20) + 1};
    const Metrics m = metrics(cm);
    CHECK(m.accuracy == static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total()));
    for (double v : {m.tpr, m.fpr, m.accuracy, m.precision, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (m.precision + m.tpr > 0)
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.tpr / (m.precision + m.tpr)).epsilon(1e-14));
  }

  const auto [X, y] = random_points(50, 1, 3);
  std::vector<int> pred;
  for (Index i = 0; i < 50; ++i) pred.push_back(X(i, 0) > 0 ? 1 : 0);
  std::vector<std::size_t> order(50);
  for (std::size_t i = 0; i < 50; ++i) order[i] = (i * 17) % 50;
  std::vector<int> p2, y2;
  for (std::size_t i : order) {
    p2.push_back(pred[i]);
    y2.push_back(y[i]);
  }
  CHECK(confusion(p2, y2) == confusion(pred, y));
}

TEST_CASE("per-category detection") {
  const std::vector<int> pred{1, 1, 0, 0, 1, 0};
  const std::vector<std::string> cats{"DoS", "DoS", "R2L", "R2L", "", ""};
  const auto r = per_category_tpr(pred, cats);
  REQUIRE(r.size() == 2);
  CHECK(r.at("DoS").tpr == 1.0);
  CHECK(r.at("R2L").tpr == 0.0);
  CHECK(r.at("R2L").missed == 2);
  CHECK(r.count("U2R") == 0);
  CHECK(r.count("Normal") == 0);

  Rng rng(5);
  const std::vector<std::string> names{"DoS", "Probe", "R2L", "U2R"};
  std::vector<int> p, truth;
  std::vector<std::string> c;
  for (int i = 0; i < 500; ++i) {
    const bool threat = rng.uniform() < 0.6;
    truth.push_back(threat);
    c.push_back(threat ? names[rng.index(4)] : "");
    p.push_back(rng.uniform() < (threat ? 0.8 : 0.1));
  }
  const auto per = per_category_tpr(p, c);
  const ConfusionMatrix cm = confusion(p, truth);
  double weighted = 0.0;
  std::size_t totals = 0;
  for (const auto& [name, rate] : per) {
    weighted += rate.tpr * static_cast<double>(rate.total);
    totals += rate.total;
    CHECK(rate.detected + rate.missed == rate.total);
  }
  CHECK(totals == cm.tp + cm.fn);
  CHECK(weighted / static_cast<double>(totals) == doctest::Approx(metrics(cm).tpr).epsilon(1e-12));
}

TEST_CASE("gradient checks") {
  const auto [X, y] = random_points(20, 4, 7);
  Rng rng(8);
  LinearModel lin;
  lin.weights = Eigen::VectorXd::NullaryExpr(4, [&] { return rng.normal(); });
  lin.bias = 0.3;
  CHECK(grad_check(lin, X, y, std::nullopt, 1e-5) < 1e-5);
  CHECK(grad_check(lin, X, y, 0.2, 1e-5) < 1e-5);

  const std::vector<Index> arch{4, 8, 1};
  const MlpModel net = mlp_init(arch, 9);
  CHECK(grad_check(net, X, y, std::nullopt, 1e-5) < 1e-4);
  CHECK(grad_check(net, X, y, 0.7, 1e-5) < 1e-4);

  // Zero weights, each point present with both labels: the bias gradient cancels.
  Eigen::MatrixXd S(10, 4);
  std::vector<int> ys;
  for (Index i = 0; i < 5; ++i) {
    S.row(2 * i) = X.row(i);
    S.row(2 * i + 1) = X.row(i);
    ys.push_back(1);
    ys.push_back(0);
  }
  LinearModel zero;
  zero.weights = Eigen::VectorXd::Zero(4);
  zero.bias = 0.0;
  Eigen::VectorXd grad;
  linear_loss(zero, S, ys, LossWeights::from_alpha(0.5), &grad);
  CHECK(std::abs(grad(4)) <= 1e-10);

  CHECK_THROWS_AS(grad_check(lin, X, y, std::nullopt, 0.0), UsageError);
  LinearModel bad = lin;
  bad.weights(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(grad_check(bad, X, y, std::nullopt, 1e-5), NumericError);
}

TEST_CASE("timing contract") {
  const auto [X, y] = random_points(30, 3, 1);
  std::size_t calls = 0;
  const Predictor counting = [&](const Eigen::Ref<const Eigen::VectorXd>& x) {
    ++calls;
    return x.sum() > 0 ? 1.0 : 0.0;
  };
  const double t = time_per_instance(counting, X, 5);
  CHECK(t > 0.0);
  CHECK(calls == 5 * 30);
  CHECK_THROWS_AS(time_per_instance(counting, X, 2), UsageError);
  CHECK_THROWS_AS(time_per_instance(counting, Eigen::MatrixXd(0, 3), 3), DataError);
}
