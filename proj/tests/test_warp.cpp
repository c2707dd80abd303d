#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "test_support.hpp"
#include "wmfgp/warp.hpp"

namespace wmfgp {
namespace {

std::vector<double> standard_normal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::normal_draws(rng, n);
}

TEST(Bandwidth, NormalSampleInExpectedRange) {
  const auto y = standard_normal(1000, 1);
  const double h = estimate_bandwidth(y);
  EXPECT_GE(h, 0.2);
  EXPECT_LE(h, 0.3);
}

TEST(Bandwidth, TwoPointSample) {
  const std::vector<double> y{0.0, 1.0};
  const double h = estimate_bandwidth(y);
  EXPECT_GT(h, 0.0);
  EXPECT_TRUE(std::isfinite(h));
}

TEST(Bandwidth, ScalesWithData) {
  auto y = standard_normal(500, 2);
  const double h = estimate_bandwidth(y);
  for (auto &v : y) {
    v *= 10.0;
  }
  EXPECT_NEAR(estimate_bandwidth(y), 10.0 * h, 1e-12 * h);
}

TEST(Bandwidth, ConstantSampleIsDegenerate) {
  const std::vector<double> y(50, 3.0);
  EXPECT_THROW(estimate_bandwidth(y), DegenerateSample);
}

TEST(Bandwidth, ZeroInterquartileRangeFallsBackToSd) {
  std::vector<double> y(40, 1.0);
  y[0] = 0.0;
  y[39] = 2.0;
  const double h = estimate_bandwidth(y);
  EXPECT_GT(h, 0.0);
}

TEST(KernelCdf, MedianOfSymmetricSampleIsHalf) {
  auto y = standard_normal(2001, 3);
  std::vector<double> s = y;
  std::nth_element(s.begin(), s.begin() + 1000, s.end());
  const KernelCDF cdf(y);
  EXPECT_NEAR(cdf(s[1000]), 0.5, 0.02);
}

TEST(KernelCdf, LowerTailVanishes) {
  const auto y = standard_normal(300, 4);
  const KernelCDF cdf(y);
  EXPECT_LT(cdf(cdf.min() - 10.0 * cdf.bandwidth()), 1e-6);
  EXPECT_GT(cdf(cdf.max() + 10.0 * cdf.bandwidth()), 1.0 - 1e-6);
}

TEST(KernelCdf, MatchesQuadratureOfDensity) {
  std::mt19937_64 rng(5);
  const auto y = testing::weibull_draws(rng, 2000, 2.0, 0.8);
  const KernelCDF cdf(y);
  const double h = cdf.bandwidth();
  std::vector<double> queries;
  for (int i = 0; i < 10; ++i) {
    queries.push_back(cdf.min() + (cdf.max() - cdf.min()) * i * i / 100.0);
  }
  std::sort(queries.begin(), queries.end());
  const auto got = kernel_cdf_eval(cdf, queries);

  // Composite Simpson on the density, accumulated left to right.
  const double c = 1.0 / (std::sqrt(2.0 * M_PI) * h * static_cast<double>(y.size()));
  auto density = [&](double t) {
    double acc = 0.0;
    for (double s : y) {
      const double u = (t - s) / h;
      acc += std::exp(-0.5 * u * u);
    }
    return c * acc;
  };
  double a = cdf.min() - 12.0 * h;
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const double b = queries[i];
    const int m = 2 * std::max(1, static_cast<int>(std::ceil((b - a) / (0.02 * h))));
    const double step = (b - a) / m;
    double acc = density(a) + density(b);
    for (int j = 1; j < m; ++j) {
      acc += (j % 2 == 1 ? 4.0 : 2.0) * density(a + j * step);
    }
    total += acc * step / 3.0;
    a = b;
    EXPECT_NEAR(got[i], total, 1e-6) << "query " << queries[i];
  }
}

TEST(KernelCdf, NonDecreasing) {
  std::mt19937_64 rng(6);
  const auto y = testing::weibull_draws(rng, 500, 0.5, 0.8);
  const KernelCDF cdf(y);
  double prev = 0.0;
  for (double t = -2.0; t < 20.0; t += 0.01) {
    const double p = cdf(t);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(BuildWarp, NormalSampleIsNearIdentity) {
  const auto y = standard_normal(5000, 7);
  const auto w = build_warp(y);
  double mad = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mad += std::abs(w.scores[i] - y[i]);
  }
  EXPECT_LT(mad / static_cast<double>(y.size()), 0.08);
  EXPECT_TRUE(w.warnings.empty());
}

TEST(BuildWarp, RemovesHeavySkew) {
  std::mt19937_64 rng(8);
  const auto y = testing::weibull_draws(rng, 5000, 2.0, 0.8);
  EXPECT_GT(testing::skewness(y), 2.0);
  const auto w = build_warp(y);
  EXPECT_LT(std::abs(testing::skewness(w.scores)), 0.15);
}

TEST(BuildWarp, RampScoresNonDecreasing) {
  std::vector<double> y(100);
  std::iota(y.begin(), y.end(), 0.0);
  const auto w = build_warp(y);
  for (std::size_t i = 1; i < y.size(); ++i) {
    EXPECT_GE(w.scores[i], w.scores[i - 1]);
  }
  ASSERT_EQ(w.warnings.size(), 1u);
}

TEST(BuildWarp, QuantileInvariance) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    auto y = testing::weibull_draws(rng, 200, 1.0 + rep, 0.8);
    y[3] = y[4];
    const auto w = build_warp(y);
    for (std::size_t i = 0; i < y.size(); ++i) {
      for (std::size_t j = 0; j < y.size(); ++j) {
        if (y[i] < y[j]) {
          ASSERT_LE(w.scores[i], w.scores[j]);
        } else if (y[i] == y[j]) {
          ASSERT_EQ(w.scores[i], w.scores[j]);
        }
      }
    }
  }
}

TEST(BuildWarp, TableShape) {
  std::mt19937_64 rng(10);
  const auto y = testing::weibull_draws(rng, 1500, 0.5, 0.8);
  const auto w = build_warp(y, Fidelity::low);
  const auto &t = w.table;
  ASSERT_EQ(t.z_grid.size(), 4000u);
  ASSERT_EQ(t.p_levels.size(), 4000u);
  EXPECT_EQ(t.source, Fidelity::low);
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  EXPECT_EQ(t.z_grid.front(), *mn - w.bandwidth);
  EXPECT_EQ(t.z_grid.back(), *mx + w.bandwidth);
  for (std::size_t i = 1; i < t.z_grid.size(); ++i) {
    ASSERT_GT(t.z_grid[i], t.z_grid[i - 1]);
    ASSERT_GE(t.p_levels[i], t.p_levels[i - 1]);
  }
  EXPECT_GT(t.p_levels.front(), 0.0);
  EXPECT_LT(t.p_levels.back(), 1.0);
}

TEST(BuildWarp, RejectsSmallSample) {
  const auto y = standard_normal(29, 11);
  EXPECT_THROW(build_warp(y), InvalidInput);
}

TEST(InverseWarp, RoundTripWithinTwoGridSpacings) {
  std::mt19937_64 rng(12);
  for (double shape : {0.8, 2.0}) {
    const auto y = testing::weibull_draws(rng, 2000, 2.0, shape);
    const auto w = build_warp(y);
    const auto back = inverse_warp(w.table, w.scores);
    const double tol = 2.0 * w.table.spacing();
    for (std::size_t i = 0; i < y.size(); ++i) {
      ASSERT_LE(std::abs(back[i] - y[i]), tol) << "shape " << shape << " at " << y[i];
    }
  }
}

TEST(InverseWarp, SaturatesAtTableEnds) {
  const auto y = standard_normal(400, 13);
  const auto w = build_warp(y);
  const std::vector<double> latent{10.0, -10.0};
  const auto out = inverse_warp(w.table, latent);
  EXPECT_EQ(out[0], w.table.z_grid.back());
  EXPECT_EQ(out[1], w.table.z_grid.front());
}

TEST(InverseWarp, MonotoneInLatent) {
  std::mt19937_64 rng(14);
  const auto y = testing::weibull_draws(rng, 1000, 0.5, 0.8);
  const auto w = build_warp(y);
  std::vector<double> latent;
  for (double v = -6.0; v <= 6.0; v += 0.003) {
    latent.push_back(v);
  }
  const auto out = inverse_warp(w.table, latent);
  for (std::size_t i = 1; i < out.size(); ++i) {
    ASSERT_GE(out[i], out[i - 1]);
  }
}

TEST(InverseWarp, TiesGoToLowestIndex) {
  WarpTable t{{0.0, 1.0, 2.0, 3.0}, {0.2, 0.5, 0.5, 0.8}, Fidelity::high};
  const std::vector<double> latent{0.0};
  EXPECT_EQ(inverse_warp(t, latent)[0], 1.0);
  // Equidistant between 0.2 and 0.5 resolves downward.
  const std::vector<double> mid{normal_quantile(0.35)};
  EXPECT_EQ(inverse_warp(t, mid)[0], 0.0);
}

TEST(WarpTableCsv, RoundTrip) {
  const auto y = standard_normal(100, 15);
  const auto w = build_warp(y);
  std::stringstream ss;
  w.table.write_csv(ss);
  const auto t = WarpTable::read_csv(ss, Fidelity::high);
  ASSERT_EQ(t.z_grid.size(), w.table.z_grid.size());
  for (std::size_t i = 0; i < t.z_grid.size(); ++i) {
    ASSERT_EQ(t.z_grid[i], w.table.z_grid[i]);
    ASSERT_EQ(t.p_levels[i], w.table.p_levels[i]);
  }
  std::stringstream bad("x,y\n1,2\n");
  EXPECT_THROW(WarpTable::read_csv(bad, Fidelity::low), ParseError);
}

} // namespace
} // namespace wmfgp
