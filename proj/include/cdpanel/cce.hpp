#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdpanel/errors.hpp"
#include "cdpanel/panel.hpp"

namespace cdpanel {

/// Singular-value ratio below which a cross-product matrix counts as singular.
inline constexpr double kConditionFloor = 1e-10;

/// y_it = alpha_i' d_t + beta_i' x_it + v_it.
struct RegressionDesign {
  PanelMatrix y;                  // n x T
  std::vector<Eigen::MatrixXd> X;  // n entries, each T x k_x
  Eigen::MatrixXd D;               // T x k_d, may have zero columns

  std::size_t n() const noexcept { return y.n(); }
  std::size_t T() const noexcept { return y.T(); }
  Eigen::Index kx() const noexcept { return X.empty() ? 0 : X.front().cols(); }
  Eigen::Index kd() const noexcept { return D.cols(); }

  void validate() const {
    const auto T = static_cast<Eigen::Index>(y.T());
    if (X.size() != y.n()) throw DimensionError("need one regressor block per unit");
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (X[i].rows() != T || X[i].cols() != kx()) {
        throw DimensionError("regressor block of unit " + std::to_string(i) + " has wrong shape");
      }
      if (!X[i].allFinite()) throw InputError("non-finite regressor for unit " + std::to_string(i));
    }
    if (D.cols() > 0 && D.rows() != T) throw DimensionError("common factor matrix needs T rows");
    if (!D.allFinite()) throw InputError("non-finite common factor entry");
  }
};

struct CceFit {
  Eigen::MatrixXd beta;   // n x k_x
  Eigen::MatrixXd alpha;  // n x k_d (zero columns when k_d = 0)
  PanelMatrix vhat;
};

/// Orthogonal projector complement M = I - H (H'H)^+ H', applied without forming it.
class ResidualMaker {
 public:
  explicit ResidualMaker(const Eigen::MatrixXd& H) : T_(H.rows()) {
    if (H.cols() == 0) {
      basis_.resize(T_, 0);
      return;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    const double tol = s.size() > 0 ? s(0) * static_cast<double>(std::max(H.rows(), H.cols())) *
                                          Eigen::NumTraits<double>::epsilon()
                                    : 0.0;
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > tol) ++rank;
    basis_ = svd.matrixU().leftCols(rank);
  }

  Eigen::Index rank() const noexcept { return basis_.cols(); }

  template <typename Derived>
  Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& A) const {
    Eigen::MatrixXd out = A;
    if (basis_.cols() > 0) out.noalias() -= basis_ * (basis_.transpose() * A);
    return out;
  }

  Eigen::MatrixXd matrix() const {
    return apply(Eigen::MatrixXd::Identity(T_, T_));
  }

 private:
  Eigen::Index T_;
  Eigen::MatrixXd basis_;
};

namespace detail {

// `scale` is the largest singular value the matrix would have before projection;
// it catches a matrix that is uniformly tiny, which the internal ratio misses.
inline bool well_conditioned(const Eigen::MatrixXd& A, double scale = 0.0) {
  if (A.cols() == 0) return true;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  const double top = std::max(s(0), scale);
  return top > 0.0 && s(s.size() - 1) / top >= kConditionFloor;
}

}  // namespace detail

/// T x (k_d + 1 + k_x) matrix [D | ybar_t | xbar_t].
inline Eigen::MatrixXd build_augmented_averages(const RegressionDesign& design) {
  design.validate();
  const auto T = static_cast<Eigen::Index>(design.T());
  const Eigen::Index kd = design.kd();
  const Eigen::Index kx = design.kx();
  const double n = static_cast<double>(design.n());
  Eigen::MatrixXd H(T, kd + 1 + kx);
  if (kd > 0) H.leftCols(kd) = design.D;
  H.col(kd) = design.y.values().colwise().sum().transpose() / n;
  if (kx > 0) {
    Eigen::MatrixXd xbar = Eigen::MatrixXd::Zero(T, kx);
    for (const auto& Xi : design.X) xbar += Xi;
    H.rightCols(kx) = xbar / n;
  }
  return H;
}

inline CceFit cce_fit(const RegressionDesign& design) {
  const Eigen::MatrixXd H = build_augmented_averages(design);
  const ResidualMaker M(H);
  const std::size_t n = design.n();
  const auto T = static_cast<Eigen::Index>(design.T());
  const Eigen::Index kx = design.kx();
  const Eigen::Index kd = design.kd();

  Eigen::MatrixXd DtD_inv_Dt;
  if (kd > 0) {
    const Eigen::MatrixXd DtD = design.D.transpose() * design.D;
    if (!detail::well_conditioned(DtD)) throw SingularCommonDesign();
    DtD_inv_Dt = DtD.ldlt().solve(design.D.transpose());
  }

  CceFit fit;
  fit.beta.resize(static_cast<Eigen::Index>(n), kx);
  fit.alpha.resize(static_cast<Eigen::Index>(n), kd);
  Matrix vhat(static_cast<Eigen::Index>(n), T);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Eigen::VectorXd yi = design.y.values().row(ii).transpose();
    Eigen::VectorXd resid = yi;
    if (kx > 0) {
      const Eigen::MatrixXd& Xi = design.X[i];
      const Eigen::MatrixXd MX = M.apply(Xi);
      const Eigen::MatrixXd XtMX = Xi.transpose() * MX;
      const double raw = Eigen::JacobiSVD<Eigen::MatrixXd>(Xi.transpose() * Xi).singularValues()(0);
      if (!detail::well_conditioned(XtMX, raw)) throw SingularUnitDesign(i);
      const Eigen::VectorXd b = XtMX.ldlt().solve(MX.transpose() * yi);
      fit.beta.row(ii) = b.transpose();
      resid -= Xi * b;
    }
    if (kd > 0) {
      const Eigen::VectorXd a = DtD_inv_Dt * resid;
      fit.alpha.row(ii) = a.transpose();
      resid -= design.D * a;
    }
    vhat.row(ii) = resid.transpose();
  }
  fit.vhat = PanelMatrix(std::move(vhat));
  return fit;
}

struct OlsResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
};

/// Least squares of one series on a T x k regressor matrix.
inline OlsResult ols_filter(const Eigen::VectorXd& y, const Eigen::MatrixXd& regressors) {
  if (regressors.rows() != y.size()) throw DimensionError("regressors need one row per period");
  if (regressors.cols() == 0) throw DimensionError("ols filter needs at least one regressor");
  const Eigen::MatrixXd XtX = regressors.transpose() * regressors;
  if (!detail::well_conditioned(XtX)) throw SingularDesign();
  OlsResult out;
  out.coefficients = regressors.colPivHouseholderQr().solve(y);
  out.residuals = y - regressors * out.coefficients;
  return out;
}

}  // namespace cdpanel
