#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

#include "test_support.hpp"
#include "wmfgp/mfgp.hpp"

namespace wmfgp {
namespace {

using testing::relative_error;

NestedDesign small_design() {
  return {{0, 1, 2, 3, 4, 5}, {0.5, 1.2, 0.3, -0.4, -1.0, 0.2}, {1, 3, 4}, {2.1, -0.6, -1.9}};
}

MfgpHyperparams small_params() {
  MfgpHyperparams p;
  p.lf = {1.3, 0.8, 0.01};
  p.discrepancy = {2.0, 0.3, 0.0};
  p.rho = 1.7;
  p.sigma_l2 = 0.05;
  p.sigma_h2 = 0.02;
  return p;
}

/// Nested design on integer hours: LF on `nl` distinct points, HF on a subset.
NestedDesign random_nested(std::mt19937_64 &rng, std::size_t nl, std::size_t nh, int span) {
  NestedDesign d;
  d.x_l = testing::random_design(rng, nl, span);
  d.y_l = testing::normal_draws(rng, nl);
  std::vector<double> pool = d.x_l;
  std::shuffle(pool.begin(), pool.end(), rng);
  d.x_h.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(nh));
  std::sort(d.x_h.begin(), d.x_h.end());
  d.y_h = testing::normal_draws(rng, nh);
  return d;
}

MfgpHyperparams random_params(std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MfgpHyperparams p;
  p.lf = {0.5 + 5.0 * u(rng), 0.2 + 2.0 * u(rng), 0.05 * u(rng)};
  p.discrepancy = {0.5 + 5.0 * u(rng), 0.1 + u(rng), 0.0};
  p.rho = -2.0 + 4.0 * u(rng);
  p.sigma_l2 = 0.01 + 0.2 * u(rng);
  p.sigma_h2 = 0.01 + 0.2 * u(rng);
  return p;
}

testing::DenseMfgp oracle_for(const NestedDesign &d, const MfgpHyperparams &p) {
  return testing::dense_mfgp(d.x_l, d.y_l, d.x_h, d.y_h, p.lf.length_scale,
                             p.lf.signal_variance, p.lf.nugget, p.discrepancy.length_scale,
                             p.discrepancy.signal_variance, p.discrepancy.nugget, p.rho,
                             p.sigma_l2, p.sigma_h2);
}

TEST(JointCov, ZeroRhoDecouplesFidelities) {
  auto p = small_params();
  p.rho = 0.0;
  const auto d = small_design();
  const Matrix k = assemble_joint_cov(d, p);
  EXPECT_EQ(k.topRightCorner(6, 3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(k.bottomLeftCorner(3, 6).cwiseAbs().maxCoeff(), 0.0);
  Matrix hh = cov_matrix(d.x_h, d.x_h, p.discrepancy);
  hh.diagonal().array() += p.sigma_h2;
  EXPECT_LT((k.bottomRightCorner(3, 3) - hh).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(JointCov, SingleSharedPointByHand) {
  MfgpHyperparams p;
  p.lf = {1.0, 1.0, 0.0};
  p.discrepancy = {1.0, 1.0, 0.0};
  p.rho = 2.0;
  const NestedDesign d{{3.0}, {0.0}, {3.0}, {0.0}};
  const Matrix k = assemble_joint_cov(d, p);
  EXPECT_DOUBLE_EQ(k(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(k(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(k(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(k(1, 1), 5.0);
}

TEST(JointCov, MatchesBlockwiseOracleOnRandomDesigns) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const auto d = random_nested(rng, 6, 3, 20);
    const auto p = random_params(rng);
    const Matrix k = assemble_joint_cov(d, p);
    const auto o = oracle_for(d, p);
    EXPECT_LT((k - o.k).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(JointCov, RejectsNonNestedDesign) {
  NestedDesign d = small_design();
  d.x_h = {1, 3, 4.5};
  EXPECT_THROW(assemble_joint_cov(d, small_params()), DesignViolation);
}

TEST(JointCov, SymmetricAndFactorizableOnRandomDraws) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(3, 25);
  for (int rep = 0; rep < 100; ++rep) {
    const auto nl = static_cast<std::size_t>(size(rng));
    std::uniform_int_distribution<std::size_t> hsize(1, nl);
    const auto d = random_nested(rng, nl, hsize(rng), 60);
    const auto p = random_params(rng);
    const Matrix k = assemble_joint_cov(d, p);
    ASSERT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NO_THROW(factorize_with_jitter(k));
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10 * k.diagonal().mean());
  }
}

TEST(MfgpNlml, SmallDesignDenseOracle) {
  const auto d = small_design();
  const auto p = small_params();
  const auto o = oracle_for(d, p);
  const double frozen = 8.716870968108806;
  EXPECT_NEAR(mfgp_nlml(p, d), frozen, 1e-10);
  EXPECT_NEAR(testing::dense_nlml(o.k, o.y), frozen, 1e-10);
}

TEST(MfgpNlml, ZeroRhoIsSumOfSingleFidelityNlmls) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto d = random_nested(rng, 12, 5, 40);
    auto p = random_params(rng);
    p.rho = 0.0;
    const double lf = gp_nlml({p.lf, p.sigma_l2}, d.x_l, d.y_l);
    const double hf = gp_nlml({p.discrepancy, p.sigma_h2}, d.x_h, d.y_h);
    EXPECT_LT(relative_error(mfgp_nlml(p, d), lf + hf), 1e-12);
  }
}

TEST(MfgpNlml, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(23);
  int checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_nested(rng, 10, 4, 30);
    const auto p = random_params(rng);
    const auto analytic = mfgp_nlml_with_gradient(p, d);
    EXPECT_NEAR(analytic.value, mfgp_nlml(p, d), 1e-10);

    const std::vector<double> base{p.lf.length_scale,          p.lf.signal_variance,
                                   p.discrepancy.length_scale, p.discrepancy.signal_variance,
                                   p.rho,                      p.sigma_l2,
                                   p.sigma_h2};
    const auto f = [&](const std::vector<double> &v) {
      MfgpHyperparams q = p;
      q.lf.length_scale = v[0];
      q.lf.signal_variance = v[1];
      q.discrepancy.length_scale = v[2];
      q.discrepancy.signal_variance = v[3];
      q.rho = v[4];
      q.sigma_l2 = v[5];
      q.sigma_h2 = v[6];
      return mfgp_nlml(q, d);
    };
    for (std::size_t i = 0; i < 7; ++i) {
      const double fd = testing::central_difference(f, base, i);
      EXPECT_LT(relative_error(analytic.gradient.values[i], fd, 1e-4), 1e-4)
          << MfgpGradient::names[i] << " analytic " << analytic.gradient.values[i] << " fd "
          << fd;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 140);
}

TEST(MfgpPredict, SmallDesignDenseOracle) {
  const auto d = small_design();
  const auto p = small_params();
  const std::vector<double> q{0.5, 2.0, 4.5, 8.0};
  const auto model = MFGPModel::condition(p, d);
  const auto pred = mfgp_predict(model, q);

  const double mean[4] = {1.8101472482832575, 1.0811018275977418, -1.268634498395099,
                          0.16431617244019284};
  const double var[4] = {0.12511296354343981, 0.11167244759710515, 0.12258879349135787,
                         2.620704204411711};
  const auto o = oracle_for(d, p);
  testing::Mat qm(9, 4);
  qm.topRows(6) = p.rho * testing::se_oracle(d.x_l, q, 1.3, 0.8, 0.01);
  qm.bottomRows(3) = p.rho * p.rho * testing::se_oracle(d.x_h, q, 1.3, 0.8, 0.01) +
                     testing::se_oracle(d.x_h, q, 2.0, 0.3, 0.0);
  const auto dense = testing::dense_predict(o.k, qm, o.y,
                                            testing::Vec::Constant(4, p.hf_prior_variance()));
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(pred.mean[i], mean[i], 1e-8);
    EXPECT_NEAR(pred.variance[i], var[i], 1e-8);
    EXPECT_NEAR(pred.mean[i], dense.mean[i], 1e-8);
    EXPECT_NEAR(pred.variance[i], dense.variance[i], 1e-8);
  }
}

TEST(MfgpPredict, InterpolatesHfTrainingPointWithoutNoise) {
  auto p = small_params();
  p.lf.nugget = 0.0;
  p.sigma_l2 = 0.0;
  p.sigma_h2 = 0.0;
  const auto d = small_design();
  const auto model = MFGPModel::condition(p, d);
  const auto pred = mfgp_predict(model, d.x_h);
  for (std::size_t i = 0; i < d.n_h(); ++i) {
    EXPECT_NEAR(pred.mean[static_cast<Eigen::Index>(i)], d.y_h[i], 1e-6);
  }
}

TEST(MfgpPredict, RevertsToPriorFarFromData) {
  const auto p = small_params();
  const auto model = MFGPModel::condition(p, small_design());
  const std::vector<double> far{1e4};
  const auto pred = mfgp_predict(model, far);
  EXPECT_NEAR(pred.mean[0], 0.0, 1e-12);
  const double prior = p.rho * p.rho * (0.8 + 0.01) + 0.3;
  EXPECT_NEAR(pred.variance[0], prior, 1e-12);
}

TEST(MfgpPredict, ZeroRhoMatchesSingleFidelityGp) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    const auto d = random_nested(rng, 15, 6, 40);
    auto p = random_params(rng);
    p.rho = 0.0;
    const auto mf = MFGPModel::condition(p, d);
    const auto gp = GPModel::condition({p.discrepancy, p.sigma_h2}, d.x_h, d.y_h);
    std::vector<double> q;
    for (double t = -3.0; t < 45.0; t += 2.5) {
      q.push_back(t);
    }
    const auto a = mfgp_predict(mf, q);
    const auto b = gp_predict(gp, q);
    EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a.variance - b.variance).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(MfgpPredict, VarianceNeverExceedsPrior) {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_nested(rng, 20, 6, 50);
    const auto p = random_params(rng);
    const auto model = MFGPModel::condition(p, d);
    std::vector<double> q;
    for (double t = -5.0; t < 55.0; t += 0.7) {
      q.push_back(t);
    }
    const auto pred = mfgp_predict(model, q);
    EXPECT_LE(pred.variance.maxCoeff(), p.hf_prior_variance() + 1e-8);
    EXPECT_GE(pred.variance.minCoeff(), 0.0);
  }
}

TEST(MfgpPredict, RemovingLfPointsNeverReducesVariance) {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 10; ++rep) {
    const auto full = random_nested(rng, 30, 6, 60);
    const auto p = random_params(rng);
    // Drop every LF-only point at an odd position.
    NestedDesign reduced;
    reduced.x_h = full.x_h;
    reduced.y_h = full.y_h;
    for (std::size_t i = 0; i < full.n_l(); ++i) {
      const bool shared = std::binary_search(full.x_h.begin(), full.x_h.end(), full.x_l[i]);
      if (shared || i % 2 == 0) {
        reduced.x_l.push_back(full.x_l[i]);
        reduced.y_l.push_back(full.y_l[i]);
      }
    }
    std::vector<double> q;
    for (int t = 0; t < 60; ++t) {
      if (!std::binary_search(full.x_h.begin(), full.x_h.end(), static_cast<double>(t))) {
        q.push_back(t);
      }
    }
    const auto a = mfgp_predict(MFGPModel::condition(p, full), q);
    const auto b = mfgp_predict(MFGPModel::condition(p, reduced), q);
    for (Eigen::Index i = 0; i < a.variance.size(); ++i) {
      EXPECT_GE(b.variance[i], a.variance[i] - 1e-10);
    }
  }
}

/// Smooth LF series plus an HF series on every `stride`-th index.
NestedDesign scaled_design(std::size_t nl, std::size_t stride, double rho, double noise,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NestedDesign d;
  for (std::size_t i = 0; i < nl; ++i) {
    d.x_l.push_back(static_cast<double>(i));
  }
  d.y_l = testing::gp_draw(rng, d.x_l, 6.0, 1.0);
  std::normal_distribution<double> n(0.0, noise);
  for (std::size_t i = 0; i < nl; i += stride) {
    d.x_h.push_back(d.x_l[i]);
    d.y_h.push_back(rho * d.y_l[i] + (noise > 0.0 ? n(rng) : 0.0));
  }
  return d;
}

TEST(MfgpFit, RecoversExactScaling) {
  const auto d = scaled_design(120, 6, 2.0, 0.0, 2);
  const auto model = mfgp_fit(d);
  const auto &h = model.hyperparams();
  EXPECT_GE(h.rho, 1.8);
  EXPECT_LE(h.rho, 2.2);
  EXPECT_LT(h.discrepancy.signal_variance, 1e-2);
  EXPECT_EQ(MfgpGradient::names.size(), 7u);
}

TEST(MfgpFit, IndependentFidelitiesGiveSmallRho) {
  std::mt19937_64 rng(8);
  NestedDesign d;
  for (int i = 0; i < 120; ++i) {
    d.x_l.push_back(i);
  }
  d.y_l = testing::gp_draw(rng, d.x_l, 6.0, 1.0);
  for (int i = 0; i < 120; i += 4) {
    d.x_h.push_back(i);
  }
  d.y_h = testing::gp_draw(rng, d.x_h, 10.0, 1.0);

  MfgpFitConfig cfg;
  const auto model = mfgp_fit(d, cfg);
  EXPECT_LT(std::abs(model.hyperparams().rho), 0.3);

  // The returned optimum is no worse than any starting point.
  const auto dist = MfgpDistances::of(d);
  const auto y = detail::stacked_targets(d);
  const Objective f = [&](const Vector &x, Vector *) {
    return detail::mfgp_nlml_cached(detail::mfgp_from_packed(x, cfg), dist, y, false,
                                    cfg.jitter)
        .value;
  };
  std::mt19937_64 srng(cfg.optimizer.seed);
  Box box{Vector::Constant(7, std::log(1e-2)), Vector::Constant(7, std::log(1e2))};
  box.lower[4] = -3.0;
  box.upper[4] = 3.0;
  for (const auto &s : latin_hypercube(box, 16, srng)) {
    try {
      EXPECT_LE(model.nlml(), f(s, nullptr) + 1e-8);
    } catch (const Error &) {
    }
  }
}

TEST(MfgpFit, MinimalHighFidelitySetRuns) {
  NestedDesign d = scaled_design(40, 1, 1.5, 0.05, 4);
  NestedDesign tiny{d.x_l, d.y_l, {d.x_h[5], d.x_h[20], d.x_h[35]},
                    {d.y_h[5], d.y_h[20], d.y_h[35]}};
  MFGPModel model = mfgp_fit(tiny);
  const auto pred = mfgp_predict(model, tiny.x_l);
  EXPECT_TRUE(pred.mean.allFinite());
  // Away from HF points the prediction follows the scaled LF structure.
  Vector lf = to_vector(tiny.y_l);
  const double corr = (pred.mean.array() - pred.mean.mean())
                          .matrix()
                          .dot((lf.array() - lf.mean()).matrix()) /
                      ((pred.mean.array() - pred.mean.mean()).matrix().norm() *
                       (lf.array() - lf.mean()).matrix().norm());
  EXPECT_GT(std::abs(corr), 0.8);
}

TEST(MfgpFit, AdvisesWhenHighFidelityShareIsLarge) {
  const auto d = scaled_design(30, 2, 2.0, 0.05, 6);
  const auto model = mfgp_fit(d);
  ASSERT_FALSE(model.warnings().empty());
  EXPECT_NE(model.warnings().front().find("N_H/N_L"), std::string::npos);
  const auto sparse = mfgp_fit(scaled_design(30, 5, 2.0, 0.05, 6));
  EXPECT_TRUE(sparse.warnings().empty());
}

TEST(MfgpFit, RequiresThreePointsPerFidelity) {
  NestedDesign d{{0, 1, 2, 3}, {0, 1, 0, 1}, {1, 2}, {0, 1}};
  EXPECT_THROW(mfgp_fit(d), InvalidInput);
}

} // namespace
} // namespace wmfgp
