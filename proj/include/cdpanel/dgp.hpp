#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdpanel/errors.hpp"
#include "cdpanel/panel.hpp"
#include "cdpanel/rng.hpp"

namespace cdpanel {

enum class ErrorDist { Gaussian, Chi2 };

inline std::string_view to_string(ErrorDist d) {
  return d == ErrorDist::Gaussian ? "gaussian" : "chi2";
}

inline ErrorDist error_dist_from_string(std::string_view s) {
  if (s == "gaussian" || s == "normal" || s == "GAUSSIAN") return ErrorDist::Gaussian;
  if (s == "chi2" || s == "CHI2" || s == "CHI2_2" || s == "chi2_2") return ErrorDist::Chi2;
  throw InputError("unknown error distribution '" + std::string(s) + "'");
}

struct LoadingParams {
  double mean1 = 0.5, var1 = 0.5;  // gamma_i1
  double mean2 = 1.0, var2 = 1.0;  // gamma_i2
};

struct BetaParams {
  double mean1 = 0.5, var1 = 0.25;  // slope on d_t
  double mean2 = 0.5, var2 = 0.25;  // slope on x_it
};

struct ArParams {
  double rho_d = 0.8;          // observed common factor, Gaussian innovations
  double rho_f = 0.9;          // latent factors, standardized chi2(2) innovations
  double rho_x_max = 0.95;     // regressor error AR coefficient ~ U(0, rho_x_max)
  double gamma_x1_lo = 0.25, gamma_x1_hi = 0.75;
  double gamma_x2_lo = 0.1, gamma_x2_hi = 0.5;
};

struct DgpConfig {
  std::size_t n = 100;
  std::size_t T = 100;
  std::size_t m0 = 1;
  std::vector<double> alphas{1.0};
  double rho_spatial = 0.0;
  ErrorDist error_dist = ErrorDist::Gaussian;
  bool include_regressors = false;
  LoadingParams loading_params;
  BetaParams beta_params;
  ArParams ar_params;
  double intercept_mean = 1.0;
  double intercept_var = 2.0;

  void validate() const {
    if (n < 3 || T < 3) throw InputError("DGP needs n >= 3 and T >= 3");
    if (m0 != 1 && m0 != 2) throw InputError("m0 must be 1 or 2");
    if (alphas.size() != m0) throw InputError("need one factor strength per latent factor");
    for (double a : alphas) {
      if (!(a >= 0.0 && a <= 1.0)) throw InputError("factor strengths must lie in [0, 1]");
    }
    if (!(rho_spatial >= 0.0 && rho_spatial < 1.0)) {
      throw InputError("spatial coefficient must lie in [0, 1)");
    }
  }
};

/// Row-normalized spatial weights.
struct SpatialWeightMatrix {
  Eigen::MatrixXd W;

  std::size_t n() const noexcept { return static_cast<std::size_t>(W.rows()); }

  static SpatialWeightMatrix from_matrix(Eigen::MatrixXd W) {
    if (W.rows() != W.cols()) throw DimensionError("spatial weights must be square");
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      if (W(i, i) != 0.0) throw InputError("spatial weights need a zero diagonal");
      if ((W.row(i).array() < 0.0).any()) throw InputError("spatial weights must be nonnegative");
      const double s = W.row(i).sum();
      if (s != 0.0 && std::abs(s - 1.0) > 1e-12) throw InputError("spatial weight rows must sum to 1");
    }
    return SpatialWeightMatrix{std::move(W)};
  }
};

/// Band of two neighbors on each side, truncated at the edges, then row-normalized.
inline SpatialWeightMatrix build_spatial_weights(std::size_t n) {
  if (n < 3) throw InputError("spatial weights need n >= 3");
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    int count = 0;
    for (Eigen::Index j = i - 2; j <= i + 2; ++j) {
      if (j != i && j >= 0 && j < N) ++count;
    }
    for (Eigen::Index j = i - 2; j <= i + 2; ++j) {
      if (j != i && j >= 0 && j < N) W(i, j) = 1.0 / count;
    }
  }
  return SpatialWeightMatrix{std::move(W)};
}

/// Factorized I - rho W together with the variance-normalizing constant c.
class SpatialSystem {
 public:
  SpatialSystem(const SpatialWeightMatrix& W, double rho) : rho_(rho) {
    const auto N = W.W.rows();
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(N, N) - rho * W.W;
    lu_.compute(A);
    if (!(lu_.rcond() > 1e-13)) throw SingularSpatialSystem();
    const Eigen::MatrixXd Ainv = lu_.inverse();
    if (!Ainv.allFinite()) throw SingularSpatialSystem();
    // tr[A^{-1} A^{-1}'] is the squared Frobenius norm of A^{-1}
    c_ = std::sqrt(static_cast<double>(N) / Ainv.squaredNorm());
  }

  double c() const noexcept { return c_; }
  double rho() const noexcept { return rho_; }

  /// c (I - rho W)^{-1} zeta, column by column.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& zeta) const { return c_ * lu_.solve(zeta); }

 private:
  double rho_;
  double c_ = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline double spatial_scale(const SpatialWeightMatrix& W, double rho) {
  return SpatialSystem(W, rho).c();
}

/// Number of nonzero loadings for strength alpha: floor(n^alpha).
inline std::size_t strong_units(std::size_t n, double alpha) {
  const double v = std::pow(static_cast<double>(n), alpha);
  // n^alpha can land a hair below an exact integer (1000^(2/3))
  return std::min(n, static_cast<std::size_t>(std::floor(v + 1e-9)));
}

inline Vector gen_loadings(std::size_t n, double alpha, double mean, double variance,
                           RandomStream& rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("factor strength must lie in [0, 1]");
  Vector g = Vector::Zero(static_cast<Eigen::Index>(n));
  const std::size_t k = strong_units(n, alpha);
  for (std::size_t i = 0; i < k; ++i) g(static_cast<Eigen::Index>(i)) = rng.normal(mean, variance);
  return g;
}

inline double draw_error(ErrorDist dist, RandomStream& rng) {
  return dist == ErrorDist::Gaussian ? rng.standard_normal() : rng.standardized_chi2_2();
}

inline constexpr int kArBurnIn = 200;

/// Unit-variance stationary AR(1): x_t = rho x_{t-1} + sqrt(1 - rho^2) v_t.
/// Gaussian innovations start from the stationary law; others burn in from zero.
inline Vector gen_ar1(std::size_t T, double rho, ErrorDist innovations, RandomStream& rng) {
  if (!(std::abs(rho) < 1.0)) throw InputError("AR coefficient must satisfy |rho| < 1");
  const double s = std::sqrt(1.0 - rho * rho);
  Vector x(static_cast<Eigen::Index>(T));
  double prev = 0.0;
  Eigen::Index start = 0;
  if (innovations == ErrorDist::Gaussian) {
    prev = rng.standard_normal();
    if (T > 0) x(0) = prev;
    start = 1;
  } else {
    for (int b = 0; b < kArBurnIn; ++b) prev = rho * prev + s * draw_error(innovations, rng);
  }
  for (Eigen::Index t = start; t < x.size(); ++t) {
    prev = rho * prev + s * draw_error(innovations, rng);
    x(t) = prev;
  }
  return x;
}

/// i.i.d. errors (rho = 0) or the SAR transform c (I - rho W)^{-1} zeta per period.
/// Draws fill the n x T matrix period by period.
inline Matrix gen_errors(std::size_t n, std::size_t T, ErrorDist dist, RandomStream& rng,
                         const SpatialSystem* spatial = nullptr) {
  const auto N = static_cast<Eigen::Index>(n);
  const auto TT = static_cast<Eigen::Index>(T);
  Eigen::MatrixXd zeta(N, TT);
  for (Eigen::Index t = 0; t < TT; ++t) {
    for (Eigen::Index i = 0; i < N; ++i) zeta(i, t) = draw_error(dist, rng);
  }
  if (spatial != nullptr && spatial->rho() != 0.0) return Matrix(spatial->transform(zeta));
  return Matrix(zeta);
}

inline Matrix gen_errors(std::size_t n, std::size_t T, double rho, const SpatialWeightMatrix& W,
                         ErrorDist dist, RandomStream& rng) {
  if (rho == 0.0) return gen_errors(n, T, dist, rng);
  const SpatialSystem sys(W, rho);
  return gen_errors(n, T, dist, rng, &sys);
}

/// One simulated panel plus the unit-level draws behind it.
struct GeneratedPanel {
  PanelMatrix y;
  std::vector<Eigen::MatrixXd> X;  // T x 1 per unit, regression mode only
  Eigen::MatrixXd D;               // T x 2 = [1, d_t], regression mode only

  // population quantities, kept for diagnostics and oracles
  Vector intercepts;
  Vector sigma;
  Matrix gamma;     // n x m0
  Matrix gamma_x;   // n x 2, regression mode only
  Matrix beta;      // n x 2, zero in pure factor mode
  Matrix factors;   // T x 2 (second column unused when m0 = 1 and no regressors)
  Matrix errors;    // n x T, epsilon_it

  /// v_it = sigma_i (m0^{-1/2} gamma_i' f_t + eps_it): what remains after a_i and the covariates.
  Matrix latent_component() const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(gamma.cols()));
    Matrix v = scale * gamma * factors.leftCols(gamma.cols()).transpose() + errors;
    return sigma.asDiagonal() * v;
  }
};

inline Vector draw_intercepts(std::size_t n, double mean, double variance, RandomStream& rng) {
  Vector a(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal(mean, variance);
  return a;
}

/// y_it = a_i + sigma_i (beta_i1 d_t + beta_i2 x_it + m0^{-1/2} gamma_i' f_t + eps_it).
inline GeneratedPanel gen_panel(const DgpConfig& cfg, const Vector& intercepts, RandomStream& rng,
                                const SpatialSystem* spatial = nullptr) {
  cfg.validate();
  const auto N = static_cast<Eigen::Index>(cfg.n);
  const auto TT = static_cast<Eigen::Index>(cfg.T);
  const auto M0 = static_cast<Eigen::Index>(cfg.m0);
  if (intercepts.size() != N) throw DimensionError("intercept vector must have n entries");

  GeneratedPanel g;
  g.intercepts = intercepts;

  // sigma_i^2 = 0.5 + s_i^2 / 4 with s_i^2 ~ chi2(2), so E(sigma_i^2) = 1
  g.sigma.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) g.sigma(i) = std::sqrt(0.5 + 0.25 * rng.chi2_2());

  const auto& lp = cfg.loading_params;
  g.gamma.resize(N, M0);
  g.gamma.col(0) = gen_loadings(cfg.n, cfg.alphas[0], lp.mean1, lp.var1, rng);
  if (cfg.m0 == 2) g.gamma.col(1) = gen_loadings(cfg.n, cfg.alphas[1], lp.mean2, lp.var2, rng);

  const auto& ar = cfg.ar_params;
  g.factors = Matrix::Zero(TT, 2);
  g.factors.col(0) = gen_ar1(cfg.T, ar.rho_f, ErrorDist::Chi2, rng);
  if (cfg.m0 == 2 || cfg.include_regressors) {
    g.factors.col(1) = gen_ar1(cfg.T, ar.rho_f, ErrorDist::Chi2, rng);
  }

  std::optional<SpatialSystem> local;
  if (spatial == nullptr && cfg.rho_spatial != 0.0) {
    local.emplace(build_spatial_weights(cfg.n), cfg.rho_spatial);
    spatial = &*local;
  }
  g.errors = gen_errors(cfg.n, cfg.T, cfg.error_dist, rng, spatial);

  Matrix x;  // n x T
  Vector d;
  g.beta = Matrix::Zero(N, 2);
  if (cfg.include_regressors) {
    d = gen_ar1(cfg.T, ar.rho_d, ErrorDist::Gaussian, rng);
    const auto& bp = cfg.beta_params;
    g.gamma_x.resize(N, 2);
    x.resize(N, TT);
    for (Eigen::Index i = 0; i < N; ++i) {
      g.beta(i, 0) = rng.normal(bp.mean1, bp.var1);
      g.beta(i, 1) = rng.normal(bp.mean2, bp.var2);
      g.gamma_x(i, 0) = rng.uniform(ar.gamma_x1_lo, ar.gamma_x1_hi);
      g.gamma_x(i, 1) = rng.uniform(ar.gamma_x2_lo, ar.gamma_x2_hi);
      const double rho_i = rng.uniform(0.0, ar.rho_x_max);
      const Vector ex = gen_ar1(cfg.T, rho_i, ErrorDist::Gaussian, rng);
      x.row(i) = (g.gamma_x(i, 0) * g.factors.col(0) + g.gamma_x(i, 1) * g.factors.col(1) + ex)
                     .transpose();
    }
  }

  const double load_scale = 1.0 / std::sqrt(static_cast<double>(cfg.m0));
  Matrix inner = load_scale * g.gamma * g.factors.leftCols(M0).transpose() + g.errors;
  if (cfg.include_regressors) {
    inner += g.beta.col(0) * d.transpose();
    inner += g.beta.col(1).asDiagonal() * x;
  }
  Matrix y = g.sigma.asDiagonal() * inner;
  y.colwise() += intercepts;
  g.y = PanelMatrix(std::move(y));

  if (cfg.include_regressors) {
    g.X.reserve(cfg.n);
    for (Eigen::Index i = 0; i < N; ++i) g.X.emplace_back(x.row(i).transpose());
    g.D.resize(TT, 2);
    g.D.col(0).setOnes();
    g.D.col(1) = d;
  }
  return g;
}

/// Moments of the unit-level draws entering the pooled R-squared limit.
struct LoadingMoments {
  double gamma_sq = 0.0;        // E(gamma' gamma)
  double gamma_x_sq = 0.0;      // E(gamma_x' gamma_x)
  double gamma_x_gamma = 0.0;   // E(gamma_x' gamma)
};

namespace detail {

inline double uniform_second_moment(double a, double b) { return (a * a + a * b + b * b) / 3.0; }

}  // namespace detail

/// Population moments implied by the configuration (including the zero loadings).
inline LoadingMoments population_moments(const DgpConfig& cfg) {
  const auto& lp = cfg.loading_params;
  const auto& ar = cfg.ar_params;
  const double n = static_cast<double>(cfg.n);
  const double means[2] = {lp.mean1, lp.mean2};
  const double vars[2] = {lp.var1, lp.var2};
  const double gx_means[2] = {0.5 * (ar.gamma_x1_lo + ar.gamma_x1_hi),
                              0.5 * (ar.gamma_x2_lo + ar.gamma_x2_hi)};
  LoadingMoments m;
  for (std::size_t j = 0; j < cfg.m0; ++j) {
    const double frac = static_cast<double>(strong_units(cfg.n, cfg.alphas[j])) / n;
    m.gamma_sq += frac * (means[j] * means[j] + vars[j]);
    m.gamma_x_gamma += frac * means[j] * gx_means[j];
  }
  m.gamma_x_sq = detail::uniform_second_moment(ar.gamma_x1_lo, ar.gamma_x1_hi) +
                 detail::uniform_second_moment(ar.gamma_x2_lo, ar.gamma_x2_hi);
  return m;
}

/// Sample moments of the draws in a generated panel.
inline LoadingMoments sample_moments(const GeneratedPanel& g) {
  LoadingMoments m;
  const double n = static_cast<double>(g.gamma.rows());
  m.gamma_sq = g.gamma.squaredNorm() / n;
  if (g.gamma_x.size() > 0) {
    m.gamma_x_sq = g.gamma_x.squaredNorm() / n;
    const auto k = g.gamma.cols();
    m.gamma_x_gamma = g.gamma_x.leftCols(k).cwiseProduct(g.gamma).sum() / n;
  }
  return m;
}

/// Limit of the pooled R-squared, eta^2 / (1 + eta^2).
inline double pooled_r_squared(const DgpConfig& cfg, const LoadingMoments& moments) {
  const double m0 = static_cast<double>(cfg.m0);
  double eta2 = moments.gamma_sq / m0;
  if (cfg.include_regressors) {
    const auto& bp = cfg.beta_params;
    eta2 += bp.mean1 * bp.mean1 + bp.var1;
    eta2 += (bp.mean2 * bp.mean2 + bp.var2) * (1.0 + moments.gamma_x_sq);
    eta2 += 2.0 * bp.mean2 * moments.gamma_x_gamma / std::sqrt(m0);
  }
  return eta2 / (1.0 + eta2);
}

inline double pooled_r_squared(const DgpConfig& cfg) {
  return pooled_r_squared(cfg, population_moments(cfg));
}

}  // namespace cdpanel
