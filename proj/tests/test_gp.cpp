#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "test_support.hpp"
#include "wmfgp/gp.hpp"

namespace wmfgp {
namespace {

using testing::relative_error;

TEST(CovMatrix, ZeroDistance) {
  const std::vector<double> a{0.0};
  const Matrix k = cov_matrix(a, a, {1.0, 2.0, 0.0});
  ASSERT_EQ(k.rows(), 1);
  EXPECT_DOUBLE_EQ(k(0, 0), 2.0);
}

TEST(CovMatrix, UnitDistance) {
  const std::vector<double> a{0.0};
  const std::vector<double> b{1.0};
  EXPECT_NEAR(cov_matrix(a, b, {1.0, 1.0, 0.0})(0, 0), std::exp(-0.5), 1e-15);
}

TEST(CovMatrix, MatchesElementwiseOracle) {
  const std::vector<double> x{0.0, 1.0, 2.0};
  const Matrix k = cov_matrix(x, x, {0.7, 1.3, 0.0});
  // Frozen from a dense NumPy evaluation.
  const double frozen[9] = {1.3, 0.46858212517716724, 0.02194384939342687,
                            0.46858212517716724, 1.3, 0.46858212517716724,
                            0.02194384939342687, 0.46858212517716724, 1.3};
  const auto oracle = testing::se_oracle(x, x, 0.7, 1.3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(k(i, j), frozen[i * 3 + j], 1e-15);
      EXPECT_NEAR(k(i, j), oracle(i, j), 1e-15);
    }
  }
}

TEST(CovMatrix, NuggetOnlyOnExactMatches) {
  const std::vector<double> a{0.0, 1.0};
  const std::vector<double> b{1.0, 2.0};
  const Matrix k = cov_matrix(a, b, {1.0, 1.0, 0.5});
  EXPECT_NEAR(k(1, 0), 1.5, 1e-15);
  EXPECT_NEAR(k(0, 0), std::exp(-0.5), 1e-15);
}

TEST(CovMatrix, RejectsNonFiniteIndex) {
  const std::vector<double> a{0.0, std::nan("")};
  EXPECT_THROW(cov_matrix(a, a, {}), InvalidInput);
  const std::vector<double> b{std::numeric_limits<double>::infinity()};
  EXPECT_THROW(cov_matrix(b, b, {}), InvalidInput);
}

TEST(CovMatrix, Matern52ClosedForm) {
  const std::vector<double> a{0.0};
  const std::vector<double> b{2.0};
  KernelParams k{1.5, 0.7, 0.0, KernelFamily::matern52};
  const double s = std::sqrt(5.0) * 2.0 / 1.5;
  EXPECT_NEAR(cov_matrix(a, b, k)(0, 0), 0.7 * (1 + s + s * s / 3) * std::exp(-s), 1e-15);
}

TEST(CovMatrix, SymmetricAndFactorizableWithJitter) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = testing::random_design(rng, 30, 200);
    KernelParams k{std::exp(std::log(0.01) + u(rng) * std::log(1e5)),
                   std::exp(std::log(1e-4) + u(rng) * std::log(1e6)), 0.0,
                   trial % 2 ? KernelFamily::matern52 : KernelFamily::squared_exponential};
    const Matrix c = cov_matrix(x, x, k);
    EXPECT_EQ((c - c.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NO_THROW(factorize_with_jitter(c));
  }
}

TEST(KernelParams, Validation) {
  EXPECT_THROW((KernelParams{0.0, 1.0}.validate()), InvalidInput);
  EXPECT_THROW((KernelParams{1.0, -1.0}.validate()), InvalidInput);
  EXPECT_THROW((KernelParams{1.0, 1.0, -0.1}.validate()), InvalidInput);
}

TEST(GpNlml, SinglePointIsStandardNormal) {
  const std::vector<double> x{0.0};
  const std::vector<double> y{0.0};
  GpHyperparams hp{{1.0, 0.6, 0.0}, 0.4};
  EXPECT_NEAR(gp_nlml(hp, x, y), 0.5 * std::log(2 * M_PI), 1e-9);
  EXPECT_NEAR(gp_nlml(hp, x, y), 0.9189385332, 1e-9);
}

TEST(GpNlml, ThreePointDenseOracle) {
  const std::vector<double> x{0.0, 1.5, 3.2};
  const std::vector<double> y{0.3, -0.4, 1.1};
  GpHyperparams hp{{1.2, 0.9, 0.05}, 0.1};
  Matrix k = testing::se_oracle(x, x, 1.2, 0.9, 0.05);
  k.diagonal().array() += 0.1;
  const double oracle = testing::dense_nlml(k, to_vector(y));
  EXPECT_NEAR(gp_nlml(hp, x, y), 3.757321492281422, 1e-9);
  EXPECT_NEAR(gp_nlml(hp, x, y), oracle, 1e-9);
  EXPECT_NEAR(gp_nlml_with_gradient(hp, x, y).value, oracle, 1e-9);
}

TEST(GpNlml, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto x = testing::random_design(rng, 12, 40);
  const auto y = testing::normal_draws(rng, 12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> p{0.5 + 10 * u(rng), 0.1 + 3 * u(rng), 0.01 + 0.3 * u(rng),
                                0.01 + 0.5 * u(rng)};
    auto f = [&](const std::vector<double> &q) {
      return gp_nlml({{q[0], q[1], q[2]}, q[3]}, x, y);
    };
    const auto g = gp_nlml_with_gradient({{p[0], p[1], p[2]}, p[3]}, x, y).gradient;
    const double analytic[4] = {g.length_scale, g.signal_variance, g.nugget,
                                g.noise_variance};
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_LT(relative_error(analytic[i], testing::central_difference(f, p, i), 1e-4),
                1e-4)
          << "param " << i << " trial " << trial;
    }
  }
}

TEST(Jitter, WellConditionedMatrixFactorsPlain) {
  Matrix k(2, 2);
  k << 2.0, 0.5, 0.5, 1.0;
  const auto f = factorize_with_jitter(k);
  EXPECT_EQ(f.jitter, 0.0);
  EXPECT_NEAR((f.matrix_l() * f.lower.transpose() - k).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Jitter, NearSingularMatrixGetsFirstLevel) {
  // Two identical inputs without noise: singular, plain factor has a zero pivot.
  Matrix k = Matrix::Constant(2, 2, 3.0);
  const auto f = factorize_with_jitter(k);
  EXPECT_GE(f.jitter, 1e-10 * 3.0);
  EXPECT_LE(f.jitter, 1e-9 * 3.0 * (1 + 1e-12));
}

TEST(GpNlml, ReportsJitterLevelsOnFailure) {
  // Indefinite: no diagonal jitter up to the cap can repair it.
  Matrix bad = Matrix::Constant(2, 2, 1.0);
  bad(0, 1) = bad(1, 0) = 2.0;
  try {
    factorize_with_jitter(bad);
    FAIL() << "expected NumericalFailure";
  } catch (const NumericalFailure &e) {
    ASSERT_EQ(e.attempted_jitters().size(), 7u);
    EXPECT_NEAR(e.attempted_jitters().front(), 1e-10 * 1.0, 1e-20);
    EXPECT_NEAR(e.attempted_jitters().back(), 1e-4 * 1.0, 1e-12);
  }
}

TEST(GpPredict, InterpolatesTrainingPointsWithoutNoise) {
  const std::vector<double> x{0.0, 3.0, 7.0, 12.0};
  const std::vector<double> y{1.0, -0.5, 0.25, 2.0};
  const auto m = GPModel::condition({{2.0, 1.0}, 0.0}, x, y);
  const auto p = gp_predict(m, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(p.mean[static_cast<Eigen::Index>(i)], y[i], 1e-8);
    EXPECT_NEAR(p.variance[static_cast<Eigen::Index>(i)], 0.0, 1e-8);
  }
}

TEST(GpPredict, RevertsToPriorFarFromData) {
  const std::vector<double> x{0.0, 1.0, 2.0};
  const std::vector<double> y{1.0, 2.0, 1.5};
  const auto m = GPModel::condition({{1.0, 1.7, 0.2}, 0.1}, x, y);
  const std::vector<double> far{1000.0};
  const auto p = gp_predict(m, far);
  EXPECT_NEAR(p.mean[0], 0.0, 1e-12);
  EXPECT_NEAR(p.variance[0], 1.7 + 0.2, 1e-12);
}

TEST(GpPredict, FivePointDenseOracle) {
  const std::vector<double> x{0, 1, 2.5, 4, 6};
  const std::vector<double> y{1.0, 0.2, -0.5, 0.3, 0.9};
  const std::vector<double> q{0.5, 3.0, 7.5};
  const auto m = GPModel::condition({{1.5, 1.1}, 0.01}, x, y);
  const auto p = gp_predict(m, q);
  const double mean[3] = {0.6449304804359501, -0.33266876735180156, 0.4703955928732882};
  const double var[3] = {0.00885687250929457, 0.0162166994842714, 0.6339018080798019};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(p.mean[i], mean[i], 1e-8);
    EXPECT_NEAR(p.variance[i], var[i], 1e-8);
  }
}

TEST(GpPredict, VarianceShrinksWhenPointAddedAtQuery) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    auto x = testing::random_design(rng, 11, 60);
    const double query = x.back();
    x.pop_back();
    const auto y = testing::normal_draws(rng, x.size());
    const GpHyperparams hp{{3.0, 1.0}, 0.05};
    const std::vector<double> q{query};
    const double before = gp_predict(GPModel::condition(hp, x, y), q).variance[0];
    auto x2 = x;
    auto y2 = y;
    x2.push_back(query);
    y2.push_back(0.3);
    const double after = gp_predict(GPModel::condition(hp, x2, y2), q).variance[0];
    EXPECT_LE(after, before + 1e-12);
  }
}

TEST(GpPredict, CholeskyReproducesTrainingCovariance) {
  const std::vector<double> x{0, 2, 5, 9};
  const std::vector<double> y{0.1, 0.2, 0.3, 0.4};
  const auto m = GPModel::condition({{2.5, 0.8}, 0.05}, x, y);
  const Matrix l = m.cholesky_factor();
  Matrix k = testing::se_oracle(x, x, 2.5, 0.8);
  k.diagonal().array() += 0.05 + m.jitter();
  EXPECT_LT((l * l.transpose() - k).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GpModel, RejectsUnsortedInputs) {
  EXPECT_THROW(GPModel::condition({}, {1.0, 0.0}, {0.0, 0.0}), InvalidInput);
  EXPECT_THROW(GPModel::condition({}, {0.0, 0.0}, {0.0, 0.0}), InvalidInput);
}

TEST(GpFit, RecoversLengthScaleOfSyntheticDraw) {
  std::mt19937_64 rng(5);
  std::vector<double> x(200);
  for (int i = 0; i < 200; ++i) {
    x[static_cast<std::size_t>(i)] = i;
  }
  const auto y = testing::gp_draw(rng, x, 5.0, 1.0);
  const auto m = gp_fit(x, y);
  const double ls = m.hyperparams().kernel.length_scale;
  EXPECT_GT(ls, 2.5);
  EXPECT_LT(ls, 10.0);
}

TEST(GpFit, ConstantSeriesDrivesSignalTowardFloor) {
  std::vector<double> x(30);
  std::vector<double> y(30, 0.0);
  for (int i = 0; i < 30; ++i) {
    x[static_cast<std::size_t>(i)] = i;
  }
  GPModel m = gp_fit(x, y);
  EXPECT_LT(m.hyperparams().kernel.signal_variance, 1e-2);
}

TEST(GpFit, WhiteNoiseBeatsGridSearchAndStarts) {
  std::mt19937_64 rng(8);
  std::vector<double> x(60);
  for (int i = 0; i < 60; ++i) {
    x[static_cast<std::size_t>(i)] = i;
  }
  const auto y = testing::normal_draws(rng, 60);
  GpFitConfig cfg;
  const auto m = gp_fit(x, y, cfg);
  const auto &hp = m.hyperparams();
  const bool pinned = hp.kernel.length_scale < 0.5;
  const bool absorbed = hp.noise_variance > 0.5;
  EXPECT_TRUE(pinned || absorbed);

  // 20 x 20 grid over (length scale, signal variance), noise profiled on a
  // coarse grid as well; the fit must be at least as good as every node.
  double grid_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const double ls = std::exp(std::log(1e-2) + i * (std::log(1e3) - std::log(1e-2)) / 19);
      const double sv = std::exp(std::log(1e-4) + j * (std::log(1e2) - std::log(1e-4)) / 19);
      for (double noise : {1e-4, 0.01, 0.1, 0.5, 1.0, 2.0}) {
        grid_best = std::min(grid_best, gp_nlml({{ls, sv}, noise}, x, y));
      }
    }
  }
  EXPECT_LE(m.nlml(), grid_best + 1e-6);
}

} // namespace
} // namespace wmfgp
