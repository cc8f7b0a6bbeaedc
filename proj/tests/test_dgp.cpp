#include <gtest/gtest.h>

#include <cmath>

#include "cdpanel/dgp.hpp"
#include "oracles.hpp"

using namespace cdpanel;

namespace {

/// Mean over periods of (1/n) sum_i e_it^2 and its standard error.
std::pair<double, double> average_variance(const Matrix& e) {
  const double n = static_cast<double>(e.rows());
  const double T = static_cast<double>(e.cols());
  double sum = 0, sumsq = 0;
  for (Eigen::Index t = 0; t < e.cols(); ++t) {
    const double s = e.col(t).squaredNorm() / n;
    sum += s;
    sumsq += s * s;
  }
  const double mean = sum / T;
  const double sd = std::sqrt((sumsq - T * mean * mean) / (T - 1.0));
  return {mean, sd / std::sqrt(T)};
}

}  // namespace

TEST(SpatialWeights, BandTruncatedAndRowNormalized) {
  const SpatialWeightMatrix W = build_spatial_weights(5);
  EXPECT_EQ(W.W(0, 0), 0.0);
  EXPECT_EQ(W.W(0, 1), 0.5);
  EXPECT_EQ(W.W(0, 2), 0.5);
  EXPECT_EQ(W.W(0, 3), 0.0);
  EXPECT_EQ(W.W(0, 4), 0.0);
  for (Eigen::Index j : {0, 1, 3, 4}) EXPECT_EQ(W.W(2, j), 0.25);
  EXPECT_EQ(W.W(2, 2), 0.0);
  for (std::size_t n : {3u, 4u, 10u, 57u}) {
    const SpatialWeightMatrix Wn = build_spatial_weights(n);
    for (Eigen::Index i = 0; i < Wn.W.rows(); ++i) {
      EXPECT_NEAR(Wn.W.row(i).sum(), 1.0, 1e-15);
      EXPECT_EQ(Wn.W(i, i), 0.0);
    }
  }
}

TEST(SpatialScale, ZeroRhoAndTwoByTwoOracle) {
  EXPECT_NEAR(spatial_scale(build_spatial_weights(7), 0.0), 1.0, 1e-15);

  Eigen::MatrixXd W(2, 2);
  W << 0, 1, 1, 0;
  const double c = spatial_scale(SpatialWeightMatrix::from_matrix(W), 0.5);
  // (I - 0.5 W)^{-1} = (4/3)[[1, .5], [.5, 1]] by direct inversion
  const auto inv = oracle::inverse({{1.0, -0.5}, {-0.5, 1.0}});
  double fro = 0;
  for (const auto& r : inv) {
    for (double v : r) fro += v * v;
  }
  EXPECT_NEAR(fro, 40.0 / 9.0, 1e-12);
  EXPECT_NEAR(c, std::sqrt(2.0 / fro), 1e-12);
  EXPECT_NEAR(c, 0.670820393249937, 1e-12);
}

TEST(SpatialSystem, RejectsSingular) {
  Eigen::MatrixXd W(2, 2);
  W << 0, 1, 1, 0;
  EXPECT_THROW(SpatialSystem(SpatialWeightMatrix::from_matrix(W), 1.0), SingularSpatialSystem);
}

TEST(SpatialWeights, FromMatrixValidates) {
  Eigen::MatrixXd W(2, 2);
  W << 1, 0, 0, 1;
  EXPECT_THROW(SpatialWeightMatrix::from_matrix(W), InputError);
  W << 0, 0.7, 0.3, 0;
  EXPECT_THROW(SpatialWeightMatrix::from_matrix(W), InputError);
}

TEST(GenLoadings, SparsityFollowsStrength) {
  EXPECT_EQ(strong_units(100, 1.0), 100u);
  EXPECT_EQ(strong_units(100, 0.5), 10u);
  EXPECT_EQ(strong_units(200, 2.0 / 3.0), 34u);
  EXPECT_EQ(strong_units(1000, 2.0 / 3.0), 100u);
  RandomStream rs{1};
  for (auto [n, a] : {std::pair{100, 1.0}, std::pair{100, 0.5}, std::pair{200, 2.0 / 3.0}}) {
    const Vector g = gen_loadings(n, a, 1.0, 1.0, rs);
    std::size_t nonzero = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i) nonzero += g(i) != 0.0;
    EXPECT_EQ(nonzero, strong_units(n, a));
  }
  EXPECT_THROW(gen_loadings(10, 1.5, 0, 1, rs), InputError);
}

TEST(GenAr1, ZeroCoefficientReturnsInnovations) {
  RandomStream a{2};
  RandomStream b{2};
  const Vector x = gen_ar1(50, 0.0, ErrorDist::Gaussian, a);
  for (Eigen::Index t = 0; t < 50; ++t) EXPECT_EQ(x(t), b.standard_normal());
}

TEST(GenAr1, LongRunVarianceNearOne) {
  RandomStream rs{3};
  for (auto dist : {ErrorDist::Gaussian, ErrorDist::Chi2}) {
    const Vector x = gen_ar1(100000, 0.8, dist, rs);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (x.size() - 1.0);
    EXPECT_NEAR(var, 1.0, 0.05);
  }
}

TEST(GenAr1, Deterministic) {
  RandomStream a{4, 5};
  RandomStream b{4, 5};
  EXPECT_EQ(gen_ar1(40, 0.9, ErrorDist::Chi2, a), gen_ar1(40, 0.9, ErrorDist::Chi2, b));
}

TEST(GenErrors, Chi2Moments) {
  RandomStream rs{6};
  const Matrix e = gen_errors(1000, 1000, ErrorDist::Chi2, rs);
  const double N = static_cast<double>(e.size());
  const double mean = e.mean();
  const double var = (e.array() - mean).square().sum() / N;
  // standardized chi2(2): variance 1, fourth moment 9
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(N));
  EXPECT_LE(std::abs(var - 1.0), 4.0 * std::sqrt(8.0 / N));
}

TEST(GenErrors, SpatialVarianceNormalized) {
  RandomStream rs{7};
  const SpatialWeightMatrix W = build_spatial_weights(50);
  const Matrix e = gen_errors(50, 20000, 0.25, W, ErrorDist::Gaussian, rs);
  const auto [mean, se] = average_variance(e);
  EXPECT_LE(std::abs(mean - 1.0), 3.0 * se);
}

TEST(GenErrors, ReproducibleUnderSeed) {
  RandomStream a{8};
  RandomStream b{8};
  EXPECT_EQ(gen_errors(10, 12, ErrorDist::Gaussian, a), gen_errors(10, 12, ErrorDist::Gaussian, b));
}

TEST(GenPanel, Reproducible) {
  DgpConfig cfg;
  cfg.n = 30;
  cfg.T = 20;
  cfg.m0 = 2;
  cfg.alphas = {1.0, 0.5};
  cfg.rho_spatial = 0.25;
  cfg.include_regressors = true;
  const Vector a = Vector::Ones(30);
  RandomStream r1{9};
  RandomStream r2{9};
  const GeneratedPanel g1 = gen_panel(cfg, a, r1);
  const GeneratedPanel g2 = gen_panel(cfg, a, r2);
  EXPECT_EQ(g1.y.values(), g2.y.values());
  ASSERT_EQ(g1.X.size(), 30u);
  EXPECT_EQ(g1.X[7], g2.X[7]);
  EXPECT_EQ(g1.D, g2.D);
  EXPECT_EQ(g1.D.col(0), Eigen::VectorXd::Ones(20));
}

TEST(GenPanel, ZeroLoadingsLeaveScaledErrors) {
  DgpConfig cfg;
  cfg.n = 12;
  cfg.T = 15;
  cfg.loading_params.mean1 = 0.0;
  cfg.loading_params.var1 = 0.0;
  Vector a(12);
  for (Eigen::Index i = 0; i < 12; ++i) a(i) = static_cast<double>(i);
  RandomStream rs{10};
  const GeneratedPanel g = gen_panel(cfg, a, rs);
  for (Eigen::Index i = 0; i < 12; ++i) {
    for (Eigen::Index t = 0; t < 15; ++t) {
      EXPECT_NEAR(g.y.values()(i, t), a(i) + g.sigma(i) * g.errors(i, t), 1e-12);
    }
  }
}

TEST(GenPanel, OneFactorHasUnitScale) {
  DgpConfig cfg;
  cfg.n = 10;
  cfg.T = 8;
  RandomStream rs{11};
  const GeneratedPanel g = gen_panel(cfg, Vector::Zero(10), rs);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index t = 0; t < 8; ++t) {
      const double expect = g.sigma(i) * (g.gamma(i, 0) * g.factors(t, 0) + g.errors(i, t));
      EXPECT_NEAR(g.y.values()(i, t), expect, 1e-12);
    }
  }
  EXPECT_LE((g.latent_component() - g.y.values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GenPanel, SigmaSquaredHasUnitMean) {
  DgpConfig cfg;
  cfg.n = 20000;
  cfg.T = 3;
  RandomStream rs{12};
  const GeneratedPanel g = gen_panel(cfg, Vector::Zero(20000), rs);
  const double mean = g.sigma.squaredNorm() / 20000.0;
  // sigma^2 - 1 = (chi2(2) - 2) / 4 has standard deviation 0.5
  EXPECT_NEAR(mean, 1.0, 4.0 * 0.5 / std::sqrt(20000.0));
  EXPECT_GE(g.sigma.minCoeff(), std::sqrt(0.5));
}

TEST(DgpConfig, Validation) {
  DgpConfig cfg;
  cfg.m0 = 3;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg.m0 = 2;
  EXPECT_THROW(cfg.validate(), InputError);  // one alpha for two factors
  cfg.alphas = {1.0, 1.2};
  EXPECT_THROW(cfg.validate(), InputError);
  cfg.alphas = {1.0, 0.5};
  cfg.rho_spatial = 1.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg.rho_spatial = 0.5;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(PooledRSquared, ZeroLoadingsAndPureFactor) {
  DgpConfig cfg;
  cfg.loading_params.mean1 = 0.0;
  cfg.loading_params.var1 = 0.0;
  EXPECT_EQ(pooled_r_squared(cfg), 0.0);

  DgpConfig pure;
  pure.n = 400;
  pure.T = 5;
  RandomStream rs{13};
  const GeneratedPanel g = gen_panel(pure, Vector::Zero(400), rs);
  const LoadingMoments sm = sample_moments(g);
  // eta^2 = E(gamma' gamma) / m0 with sample moments plugged in
  const double eta2 = g.gamma.squaredNorm() / 400.0;
  EXPECT_NEAR(pooled_r_squared(pure, sm), eta2 / (1.0 + eta2), 1e-14);
  // population: E(gamma^2) = 0.5^2 + 0.5 = 0.75
  EXPECT_NEAR(pooled_r_squared(pure), 0.75 / 1.75, 1e-14);
  EXPECT_NEAR(sm.gamma_sq, 0.75, 0.15);
}

TEST(PooledRSquared, RegressorRaisesFit) {
  DgpConfig pure;
  DgpConfig reg = pure;
  reg.include_regressors = true;
  EXPECT_GT(pooled_r_squared(reg), pooled_r_squared(pure));
}
