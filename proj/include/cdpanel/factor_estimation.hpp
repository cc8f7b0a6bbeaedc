#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "cdpanel/errors.hpp"
#include "cdpanel/panel.hpp"

namespace cdpanel {

/// Principal-components fit of an n x T panel with m components.
///
/// loadings (n x m) = sqrt(n) * Q, where Q holds the leading orthonormal
/// eigenvectors of the n x n Gram matrix of unit rows; factors (T x m) are
/// panel^T Q / sqrt(n). Hence loadings^T loadings / n = I_m and
/// factors^T factors / T = diag(eigenvalues) / (n T).
struct FactorModelFit {
  Matrix factors;
  Matrix loadings;
  PanelMatrix residuals;
  Vector eigenvalues;  // leading eigenvalues of the Gram matrix, descending
  std::size_t m = 0;
};

/// Which equivalent eigenproblem fit_pca solves.
enum class EigenPath {
  Automatic,  // the smaller of the two
  Units,      // n x n Gram matrix of unit rows
  Periods,    // T x T Gram matrix of period columns, converted back
};

namespace detail {

/// Largest-magnitude entry positive, ties to the lowest index.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double a = std::abs(v(k));
    if (a > best) {
      best = a;
      arg = k;
    }
  }
  if (v(arg) < 0.0) v = -v;
}

}  // namespace detail

inline FactorModelFit fit_pca(const PanelMatrix& panel, std::size_t m,
                              EigenPath path = EigenPath::Automatic) {
  const std::size_t n = panel.n();
  const std::size_t T = panel.T();
  if (m < 1 || m > std::min(n, T) - 1) {
    throw DimensionError("number of components m=" + std::to_string(m) + " outside [1, " +
                         std::to_string(std::min(n, T) - 1) + "]");
  }
  const auto& Y = panel.values();
  const auto mi = static_cast<Eigen::Index>(m);

  if (path == EigenPath::Automatic) path = (T < n) ? EigenPath::Periods : EigenPath::Units;

  Eigen::MatrixXd Q(static_cast<Eigen::Index>(n), mi);
  Vector lambda(mi);
  if (path == EigenPath::Units) {
    Eigen::MatrixXd gram = Y * Y.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
    const Eigen::Index top = es.eigenvalues().size() - 1;
    for (Eigen::Index k = 0; k < mi; ++k) {
      lambda(k) = es.eigenvalues()(top - k);
      Q.col(k) = es.eigenvectors().col(top - k);
    }
  } else {
    // Y Y^T and Y^T Y share nonzero eigenvalues; q = Y v / sqrt(lambda).
    Eigen::MatrixXd gram = Y.transpose() * Y;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
    const Eigen::Index top = es.eigenvalues().size() - 1;
    for (Eigen::Index k = 0; k < mi; ++k) {
      lambda(k) = es.eigenvalues()(top - k);
      if (!(lambda(k) > 0.0)) throw RankDeficient(m);
      Q.col(k) = Y * es.eigenvectors().col(top - k);
      Q.col(k) /= Q.col(k).norm();
    }
  }

  if (!(lambda(0) > 0.0) || lambda(mi - 1) <= 1e-12 * lambda(0)) throw RankDeficient(m);
  for (Eigen::Index k = 0; k < mi; ++k) detail::fix_sign(Q.col(k));

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  FactorModelFit fit;
  fit.m = m;
  fit.eigenvalues = lambda;
  fit.loadings = sqrt_n * Q;
  fit.factors = (Y.transpose() * Q) / sqrt_n;
  Matrix resid = Y - fit.loadings * fit.factors.transpose();
  fit.residuals = PanelMatrix(std::move(resid));
  return fit;
}

/// e_it = y_it - loadings_i' factors_t, as stored by fit_pca.
inline const PanelMatrix& residuals_from_fit(const FactorModelFit& fit) { return fit.residuals; }

}  // namespace cdpanel
