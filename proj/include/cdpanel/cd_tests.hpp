#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cdpanel/errors.hpp"
#include "cdpanel/factor_estimation.hpp"
#include "cdpanel/panel.hpp"
#include "cdpanel/rng.hpp"

namespace cdpanel {

/// |1 - theta_hat| at or below this makes CD* undefined.
inline constexpr double kCorrectionFloor = 1e-8;

enum class TestName { CD, CD_STAR, CD_W, CD_W_PLUS };

inline std::string_view to_string(TestName t) {
  switch (t) {
    case TestName::CD: return "CD";
    case TestName::CD_STAR: return "CD_STAR";
    case TestName::CD_W: return "CD_W";
    case TestName::CD_W_PLUS: return "CD_W_PLUS";
  }
  return "?";
}

inline TestName test_name_from_string(std::string_view s) {
  if (s == "CD") return TestName::CD;
  if (s == "CD_STAR" || s == "CD*") return TestName::CD_STAR;
  if (s == "CD_W") return TestName::CD_W;
  if (s == "CD_W_PLUS" || s == "CD_W+") return TestName::CD_W_PLUS;
  throw InputError("unknown test name '" + std::string(s) + "'");
}

inline constexpr TestName kAllTests[] = {TestName::CD, TestName::CD_STAR, TestName::CD_W,
                                         TestName::CD_W_PLUS};

/// Ingredients of the estimated bias-correction parameter.
struct BiasCorrection {
  double theta_hat = 0.0;
  Vector a_hat;    // per unit: 1 - sigma_i * phi' gamma_i
  Vector phi_hat;  // (1/n) sum_i gamma_i / sigma_i
};

struct TestOutcome {
  TestName test_name = TestName::CD;
  double statistic = 0.0;
  double p_value = 1.0;
  double level = 0.05;
  bool reject = false;
};

struct RademacherWeights {
  std::vector<int> w;
  std::size_t size() const noexcept { return w.size(); }
};

/// CD = sqrt(2T / (n(n-1))) * sum_{i<j} rho_ij.
inline double cd_statistic(const CorrelationSet& rho, std::size_t T) {
  const double n = static_cast<double>(rho.n());
  double sum = 0.0;
  for (double r : rho.values()) sum += r;
  return std::sqrt(2.0 * static_cast<double>(T) / (n * (n - 1.0))) * sum;
}

/// Same statistic through the squared cross-section sums of scaled residuals.
inline double cd_time_aggregated(const ScaledResiduals& scaled) {
  const double n = static_cast<double>(scaled.n());
  const double T = static_cast<double>(scaled.T());
  const Eigen::RowVectorXd col_sums = scaled.tilde_e.colwise().sum();
  double acc = 0.0;
  for (Eigen::Index t = 0; t < col_sums.size(); ++t) {
    const double s = col_sums(t) / std::sqrt(n);
    acc += (s * s - 1.0) / std::sqrt(2.0);
  }
  return std::sqrt(n / (n - 1.0)) * acc / std::sqrt(T);
}

/// theta_hat = 1 - (1/n) sum_i a_hat_i^2 with a_hat_i = 1 - sigma_i phi_hat' gamma_i.
inline BiasCorrection estimate_bias_correction(const Matrix& loadings, const Vector& sigma_hat) {
  if (loadings.rows() != sigma_hat.size()) {
    throw DimensionError("loadings and residual scales disagree on n");
  }
  const Eigen::Index n = loadings.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(sigma_hat(i) * sigma_hat(i) > kScaleFloor)) {
      throw DegenerateUnitScale(static_cast<std::size_t>(i));
    }
  }
  BiasCorrection bc;
  bc.phi_hat = Vector::Zero(loadings.cols());
  for (Eigen::Index i = 0; i < n; ++i) bc.phi_hat += loadings.row(i).transpose() / sigma_hat(i);
  bc.phi_hat /= static_cast<double>(n);

  bc.a_hat.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bc.a_hat(i) = 1.0 - sigma_hat(i) * loadings.row(i).dot(bc.phi_hat);
  }
  bc.theta_hat = 1.0 - bc.a_hat.squaredNorm() / static_cast<double>(n);
  return bc;
}

inline BiasCorrection estimate_bias_correction(const FactorModelFit& fit,
                                               const ScaledResiduals& scaled) {
  return estimate_bias_correction(fit.loadings, scaled.sigma_hat);
}

/// CD* = (CD + sqrt(T/2) theta_hat) / (1 - theta_hat).
inline double cd_star(double cd, const BiasCorrection& bc, std::size_t T) {
  const double denom = 1.0 - bc.theta_hat;
  if (!(std::abs(denom) > kCorrectionFloor)) throw DegenerateCorrection();
  return (cd + std::sqrt(static_cast<double>(T) / 2.0) * bc.theta_hat) / denom;
}

inline RademacherWeights draw_rademacher(std::size_t n, RandomStream& rng) {
  RademacherWeights out;
  out.w.resize(n);
  for (auto& w : out.w) w = rng.rademacher();
  return out;
}

/// Randomized CD over unscaled residuals:
/// sqrt(2 / (T n (n-1))) * sum_t sum_{i>j} (w_i e_it)(w_j e_jt).
///
/// Uses sum_{i>j} x_i x_j = ((sum_i x_i)^2 - sum_i x_i^2) / 2 per period.
inline double cd_w(const Matrix& residuals, const RademacherWeights& weights) {
  const Eigen::Index n = residuals.rows();
  const Eigen::Index T = residuals.cols();
  if (static_cast<std::size_t>(n) != weights.size()) {
    throw DimensionError("weight vector length does not match n");
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = weights.w[static_cast<std::size_t>(i)];
  double acc = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double s = residuals.col(t).dot(w);
    const double ss = residuals.col(t).squaredNorm();
    acc += 0.5 * (s * s - ss);
  }
  const double nd = static_cast<double>(n);
  return std::sqrt(2.0 / (static_cast<double>(T) * nd * (nd - 1.0))) * acc;
}

inline double cd_w(const PanelMatrix& residuals, const RademacherWeights& weights) {
  return cd_w(residuals.values(), weights);
}

/// Sum of |rho_ij| over pairs with |rho_ij| > 2 sqrt(ln(n) / T), strict.
inline double screening_delta(const CorrelationSet& rho, std::size_t n, std::size_t T) {
  const double threshold =
      2.0 * std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(T));
  double delta = 0.0;
  for (double r : rho.values()) {
    if (std::abs(r) > threshold) delta += std::abs(r);
  }
  return delta;
}

inline double cd_w_plus(double cdw, double delta) { return cdw + delta; }

/// Two-sided p-value against N(0,1): 2(1 - Phi(|z|)) = erfc(|z| / sqrt 2).
inline double two_sided_p_value(double statistic) {
  return std::erfc(std::abs(statistic) / std::sqrt(2.0));
}

inline TestOutcome decide(double statistic, double level, TestName test_name) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("significance level must lie in (0, 1)");
  TestOutcome out;
  out.test_name = test_name;
  out.statistic = statistic;
  out.level = level;
  out.p_value = std::isnan(statistic) ? 1.0 : two_sided_p_value(statistic);
  out.reject = out.p_value < level;
  return out;
}

/// All four statistics from a fitted factor model.
struct CdStatistics {
  double cd = 0.0;
  double cd_star = 0.0;
  double cd_w = 0.0;
  double cd_w_plus = 0.0;
  double delta = 0.0;
  BiasCorrection bias;

  double get(TestName t) const {
    switch (t) {
      case TestName::CD: return cd;
      case TestName::CD_STAR: return cd_star;
      case TestName::CD_W: return cd_w;
      case TestName::CD_W_PLUS: return cd_w_plus;
    }
    return 0.0;
  }
};

struct CdOptions {
  /// Compute CD_W from scaled residuals instead of raw residuals.
  bool scaled_cd_w = false;
};

/// Runs the full residual pipeline on a fit: scale, correlate, CD, CD*, CD_W, CD_W+.
inline CdStatistics compute_all_statistics(const FactorModelFit& fit,
                                           const RademacherWeights& weights,
                                           const CdOptions& options = {}) {
  const PanelMatrix& e = residuals_from_fit(fit);
  const ScaledResiduals scaled = scale_residuals(e);
  const CorrelationSet rho = pairwise_correlations(scaled);
  CdStatistics s;
  s.cd = cd_statistic(rho, e.T());
  s.bias = estimate_bias_correction(fit, scaled);
  s.cd_star = cd_star(s.cd, s.bias, e.T());
  s.cd_w = options.scaled_cd_w ? cd_w(scaled.tilde_e, weights) : cd_w(e, weights);
  s.delta = screening_delta(rho, e.n(), e.T());
  s.cd_w_plus = cd_w_plus(s.cd_w, s.delta);
  return s;
}

}  // namespace cdpanel
