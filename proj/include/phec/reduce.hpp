#pragma once

#include "phec/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace phec {

template <typename Scalar>
struct SymmetricEigen {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;                // non-increasing
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;  // columns pair with values
  int sweeps = 0;
};

/// Cyclic Jacobi rotations on a symmetric matrix. Iterates until every off-diagonal entry is
/// negligible against its diagonal pair, or `max_sweeps` full sweeps have run.
template <typename Derived>
SymmetricEigen<typename Derived::Scalar> jacobi_eigen(const Eigen::MatrixBase<Derived>& input, int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw NumericError("reduce", "eigen-decomposition needs a square matrix");

  Matrix a = input;
  Matrix v = Matrix::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar norm = a.norm();

  SymmetricEigen<Scalar> out;
  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    out.sweeps = sweep + 1;
    bool rotated = false;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar diag = std::min(std::abs(a(p, p)), std::abs(a(q, q)));
        if (Scalar(100) * std::abs(apq) <= eps * diag || std::abs(apq) <= eps * eps * norm) {
          a(p, q) = a(q, p) = Scalar(0);
          continue;
        }
        rotated = true;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) throw NumericError("reduce", "Jacobi eigen-decomposition did not converge");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Flips `direction` so that its largest-magnitude entry (first one on ties) is positive.
template <typename Derived>
void fix_sign(Eigen::MatrixBase<Derived>&& direction) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < direction.size(); ++i)
    if (std::abs(direction(i)) > std::abs(direction(arg))) arg = i;
  if (direction(arg) < 0) direction = -direction;
}

template <typename Scalar>
struct PcaModelT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector mean;                 // d
  Matrix components;           // M x d, orthonormal rows
  Vector explained_variance;   // M, non-increasing
  Scalar total_variance = 0;   // trace of the sample covariance

  Eigen::Index input_dim() const { return components.cols(); }
  Eigen::Index output_dim() const { return components.rows(); }

  Vector explained_variance_ratio() const {
    return total_variance > Scalar(0) ? Vector(explained_variance / total_variance)
                                      : Vector::Zero(explained_variance.size());
  }
};

using PcaModel = PcaModelT<double>;

namespace detail {

template <typename Derived>
SymmetricEigen<typename Derived::Scalar> covariance_eigen(const Eigen::MatrixBase<Derived>& X,
                                                          Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>& mean) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (X.rows() < 2) throw DataError("reduce", "PCA needs at least 2 samples");
  if (!X.allFinite()) throw DataError("reduce", "PCA input contains non-finite values");
  mean = X.colwise().mean().transpose();
  const Matrix centered = X.rowwise() - mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / Scalar(X.rows() - 1);
  return jacobi_eigen(cov);
}

template <typename Scalar>
PcaModelT<Scalar> assemble(const SymmetricEigen<Scalar>& eig, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean,
                           Eigen::Index m) {
  PcaModelT<Scalar> model;
  model.mean = std::move(mean);
  model.components = eig.vectors.leftCols(m).transpose();
  for (Eigen::Index k = 0; k < m; ++k) fix_sign(model.components.row(k));
  model.explained_variance = eig.values.head(m).cwiseMax(Scalar(0));
  model.total_variance = eig.values.cwiseMax(Scalar(0)).sum();
  return model;
}

}  // namespace detail

/// Fits the top-`m` principal directions of the sample covariance of the rows of X.
template <typename Derived>
PcaModelT<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& X, Eigen::Index m) {
  if (m < 1 || m > X.cols())
    throw UsageError("reduce", "PCA target dimension " + std::to_string(m) + " is outside [1, " +
                                   std::to_string(X.cols()) + "]");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> mean;
  const auto eig = detail::covariance_eigen(X, mean);
  return detail::assemble(eig, std::move(mean), m);
}

/// Smallest M whose cumulative explained-variance ratio reaches `ratio`.
template <typename Derived>
PcaModelT<typename Derived::Scalar> pca_fit_variance(const Eigen::MatrixBase<Derived>& X, double ratio) {
  using Scalar = typename Derived::Scalar;
  if (!(ratio > 0.0 && ratio <= 1.0)) throw UsageError("reduce", "variance ratio must lie in (0, 1]");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  const auto eig = detail::covariance_eigen(X, mean);
  const auto positive = eig.values.cwiseMax(Scalar(0));
  const Scalar total = positive.sum();
  Eigen::Index m = X.cols();
  if (total > Scalar(0)) {
    Scalar cumulative = 0;
    for (Eigen::Index k = 0; k < positive.size(); ++k) {
      cumulative += positive(k);
      if (cumulative >= Scalar(ratio) * total) {
        m = k + 1;
        break;
      }
    }
  } else {
    m = 1;
  }
  return detail::assemble(eig, std::move(mean), m);
}

/// Row i of the result is components * (x_i - mean).
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pca_transform(const PcaModelT<Scalar>& model,
                                                                    const Eigen::MatrixBase<Derived>& X) {
  if (X.cols() != model.input_dim())
    throw DataError("reduce", "PCA expects " + std::to_string(model.input_dim()) + " features, got " +
                                  std::to_string(X.cols()));
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

/// Maps projected rows back into the input space.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pca_reconstruct(const PcaModelT<Scalar>& model,
                                                                      const Eigen::MatrixBase<Derived>& Z) {
  return (Z * model.components).rowwise() + model.mean.transpose();
}

}  // namespace phec
