#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdpanel/errors.hpp"

namespace cdpanel {

/// Dense row-major storage: one row per unit, one column per period.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Residual rows whose mean square falls at or below this are rejected.
inline constexpr double kScaleFloor = 1e-10;

/// n x T balanced panel with finite entries, n >= 2 and T >= 2.
class PanelMatrix {
 public:
  PanelMatrix() = default;

  explicit PanelMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 2 || values_.cols() < 2) {
      throw DimensionError("panel needs n >= 2 units and T >= 2 periods, got " +
                           std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
    }
    if (!values_.allFinite()) {
      for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        for (Eigen::Index t = 0; t < values_.cols(); ++t) {
          if (!std::isfinite(values_(i, t))) {
            throw InputError("non-finite panel entry at unit " + std::to_string(i) + ", period " +
                             std::to_string(t));
          }
        }
      }
    }
  }

  const Matrix& values() const noexcept { return values_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t T() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  double operator()(std::size_t i, std::size_t t) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
  }

 private:
  Matrix values_;
};

/// Residuals divided by their per-unit root mean square.
struct ScaledResiduals {
  Matrix tilde_e;
  Vector sigma_hat;

  std::size_t n() const noexcept { return static_cast<std::size_t>(tilde_e.rows()); }
  std::size_t T() const noexcept { return static_cast<std::size_t>(tilde_e.cols()); }
};

/// Pairwise correlations rho_ij for i < j, stored row by row of the upper triangle.
class CorrelationSet {
 public:
  CorrelationSet() = default;
  CorrelationSet(std::size_t n, std::vector<double> rho) : n_(n), rho_(std::move(rho)) {
    if (n_ < 2 || rho_.size() != n_ * (n_ - 1) / 2) {
      throw DimensionError("correlation set size does not match n(n-1)/2");
    }
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return rho_.size(); }
  const std::vector<double>& values() const noexcept { return rho_; }

  /// Correlation for the pair (i, j), i != j, in either order.
  double at(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return rho_[index(i, j)];
  }

  std::size_t index(std::size_t i, std::size_t j) const noexcept {
    // offset of row i in the packed upper triangle, then column j
    return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> rho_;
};

/// Subtracts each unit's arithmetic time mean.
inline PanelMatrix demean_units(const PanelMatrix& panel) {
  Matrix out = panel.values();
  out.colwise() -= out.rowwise().mean();
  return PanelMatrix(std::move(out));
}

inline ScaledResiduals scale_residuals(const PanelMatrix& residuals) {
  const auto& e = residuals.values();
  const double T = static_cast<double>(residuals.T());
  ScaledResiduals out;
  out.sigma_hat.resize(e.rows());
  out.tilde_e.resize(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const double mean_sq = e.row(i).squaredNorm() / T;
    if (!(mean_sq > kScaleFloor)) throw DegenerateUnitScale(static_cast<std::size_t>(i));
    const double s = std::sqrt(mean_sq);
    out.sigma_hat(i) = s;
    out.tilde_e.row(i) = e.row(i) / s;
  }
  return out;
}

/// rho_ij = (1/T) sum_t tilde_e_it tilde_e_jt. Each pair is an independent dot product.
inline CorrelationSet pairwise_correlations(const ScaledResiduals& scaled) {
  const auto& z = scaled.tilde_e;
  const std::size_t n = scaled.n();
  const double T = static_cast<double>(scaled.T());
  std::vector<double> rho;
  rho.reserve(n * (n - 1) / 2);
  for (Eigen::Index i = 0; i + 1 < z.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) {
      rho.push_back(z.row(i).dot(z.row(j)) / T);
    }
  }
  return CorrelationSet(n, std::move(rho));
}

}  // namespace cdpanel
