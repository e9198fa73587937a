#include "phec/error.hpp"
#include "phec/reduce.hpp"
#include "phec/rng.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace phec;
using Eigen::Index;

namespace {

Eigen::MatrixXd random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) X(i, j) = rng.normal() * static_cast<double>(j + 1);
  return X;
}

// Reference decomposition from Eigen's dense symmetric solver, eigenvalues descending.
struct Oracle {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
};

Oracle oracle(const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

}  // namespace

TEST_CASE("single direction of variance") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(5, 3);
  for (Index i = 0; i < 5; ++i) X(i, 0) = static_cast<double>(i) - 7.0;
  X.col(1).setConstant(2.0);
  const PcaModel m = pca_fit(X, 1);
  CHECK(m.components(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(m.components(0, 1)) < 1e-12);
  CHECK(std::abs(m.components(0, 2)) < 1e-12);
  CHECK(m.explained_variance_ratio()(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("components match a dense eigensolver up to sign") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::MatrixXd X = random_matrix(10, 6, seed);
    const PcaModel m = pca_fit(X, 6);
    const Oracle o = oracle(X);
    CHECK((m.components * m.components.transpose() - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
    for (Index k = 0; k < 6; ++k) {
      CHECK(std::abs(m.explained_variance(k) - o.values(k)) < 1e-8);
      CHECK(std::abs(std::abs(m.components.row(k).dot(o.vectors.col(k))) - 1.0) < 1e-8);
      Index arg = 0;
      m.components.row(k).cwiseAbs().maxCoeff(&arg);
      CHECK(m.components(k, arg) > 0.0);
    }
    for (Index k = 1; k < 6; ++k) CHECK(m.explained_variance(k) <= m.explained_variance(k - 1));
  }
}

TEST_CASE("projection matches the oracle projection") {
  const Eigen::MatrixXd X = random_matrix(30, 5, 77);
  const PcaModel m = pca_fit(X, 3);
  const Oracle o = oracle(X);
  const Eigen::MatrixXd Q = random_matrix(8, 5, 78);
  const Eigen::MatrixXd Z = pca_transform(m, Q);
  const Eigen::MatrixXd centered = Q.rowwise() - X.colwise().mean();
  for (Index k = 0; k < 3; ++k) {
    const Eigen::VectorXd expected = centered * o.vectors.col(k);
    const double sign = m.components.row(k).dot(o.vectors.col(k)) > 0 ? 1.0 : -1.0;
    CHECK((Z.col(k) - sign * expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("complete basis reconstructs training rows") {
  const Eigen::MatrixXd X = random_matrix(10, 6, 3);
  const PcaModel m = pca_fit(X, 6);
  const Eigen::MatrixXd R = pca_reconstruct(m, pca_transform(m, X));
  CHECK((R - X).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mean maps to the origin and projection is affine") {
  const Eigen::MatrixXd X = random_matrix(20, 4, 8);
  const PcaModel m = pca_fit(X, 2);
  CHECK(pca_transform(m, Eigen::MatrixXd(m.mean.transpose())).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::RowVectorXd x1 = X.row(0), x2 = X.row(1);
  const double a = 0.3, b = -1.7;
  const Eigen::MatrixXd mix = a * x1 + b * x2 + (1.0 - a - b) * m.mean.transpose();
  const Eigen::MatrixXd lhs = pca_transform(m, mix);
  const Eigen::MatrixXd rhs = a * pca_transform(m, Eigen::MatrixXd(x1)) + b * pca_transform(m, Eigen::MatrixXd(x2));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projected variance equals explained variance") {
  const Eigen::MatrixXd X = random_matrix(40, 5, 12);
  const PcaModel m = pca_fit(X, 5);
  const Eigen::MatrixXd Z = pca_transform(m, X);
  for (Index k = 0; k < 5; ++k) {
    const double var = Z.col(k).squaredNorm() / static_cast<double>(X.rows() - 1);
    CHECK(std::abs(var - m.explained_variance(k)) <= 1e-6 * m.explained_variance(k));
  }
}

TEST_CASE("reconstruction error does not grow with M") {
  const Eigen::MatrixXd X = random_matrix(25, 6, 21);
  double previous = std::numeric_limits<double>::infinity();
  for (Index M = 1; M <= 6; ++M) {
    const PcaModel m = pca_fit(X, M);
    const double err = (pca_reconstruct(m, pca_transform(m, X)) - X).squaredNorm();
    CHECK(err <= previous + 1e-9);
    previous = err;
  }
}

TEST_CASE("variance ratio selects the smallest sufficient M") {
  const Eigen::MatrixXd X = random_matrix(50, 6, 5);
  const PcaModel full = pca_fit(X, 6);
  const Eigen::VectorXd ratio = full.explained_variance_ratio();
  for (double target : {0.5, 0.9, 0.95, 0.99}) {
    const PcaModel m = pca_fit_variance(X, target);
    Index expected = 0;
    double cumulative = 0.0;
    while (cumulative < target) cumulative += ratio(expected++);
    CHECK(m.output_dim() == expected);
  }
}

TEST_CASE("errors") {
  const Eigen::MatrixXd X = random_matrix(5, 3, 1);
  CHECK_THROWS_AS(pca_fit(X, 4), UsageError);
  CHECK_THROWS_AS(pca_fit(X, 0), UsageError);
  CHECK_THROWS_AS(pca_fit(X.topRows(1), 1), DataError);
  Eigen::MatrixXd bad = X;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(pca_fit(bad, 1), DataError);
  const PcaModel m = pca_fit(X, 2);
  CHECK_THROWS_AS(pca_transform(m, random_matrix(2, 4, 2)), DataError);
}

TEST_CASE("single precision instantiation") {
  const Eigen::MatrixXf X = random_matrix(12, 4, 6).cast<float>();
  const PcaModelT<float> m = pca_fit(X, 4);
  CHECK((m.components * m.components.transpose() - Eigen::MatrixXf::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-5f);
  CHECK((pca_reconstruct(m, pca_transform(m, X)) - X).cwiseAbs().maxCoeff() < 1e-4f);
}
