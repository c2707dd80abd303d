#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "wmfgp/errors.hpp"

namespace wmfgp {

struct PointMetrics {
  double mae = 0.0;
  double bias = 0.0;
  /// Sample variance (n - 1) of the errors pred - truth.
  double variance = 0.0;
};

/// One scored fill: point metrics plus interval coverage and the reduction
/// relative to the surrogate where one exists.
struct EvalSummary {
  double mae = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double error_reduction = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_points = 0;
};

inline PointMetrics eval_point_metrics(std::span<const double> truth,
                                       std::span<const double> pred) {
  if (truth.size() != pred.size()) {
    throw InvalidInput("truth and prediction differ in length");
  }
  if (truth.empty()) {
    throw InvalidInput("metrics need at least one point");
  }
  const double n = static_cast<double>(truth.size());
  PointMetrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = pred[i] - truth[i];
    m.mae += std::abs(e);
    m.bias += e;
  }
  m.mae /= n;
  m.bias /= n;
  if (truth.size() > 1) {
    double ss = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const double d = pred[i] - truth[i] - m.bias;
      ss += d * d;
    }
    m.variance = ss / (n - 1.0);
  }
  return m;
}

/// Central-moment skewness m3 / m2^1.5.
inline double sample_skewness(std::span<const double> x) {
  if (x.size() < 3) {
    throw InvalidInput("skewness needs at least three values");
  }
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) {
    mean += v;
  }
  mean /= n;
  double resid = 0.0;
  for (double v : x) {
    resid += v - mean;
  }
  mean += resid / n;
  double m2 = 0.0;
  double m3 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (!(m2 > 0.0)) {
    throw DegenerateSample("skewness of a constant sample is undefined");
  }
  return m3 / std::pow(m2, 1.5);
}

/// Fraction of truths inside [lower, upper].
inline double coverage_probability(std::span<const double> truth, std::span<const double> lower,
                                   std::span<const double> upper) {
  if (truth.size() != lower.size() || truth.size() != upper.size()) {
    throw InvalidInput("coverage inputs differ in length");
  }
  if (truth.empty()) {
    throw InvalidInput("coverage needs at least one point");
  }
  std::size_t inside = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw InvalidInput("interval bounds out of order at position " + std::to_string(i));
    }
    if (lower[i] <= truth[i] && truth[i] <= upper[i]) {
      ++inside;
    }
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

/// 1 - model / surrogate.
inline double error_reduction(double model_mae, double surrogate_mad) {
  if (!(surrogate_mad > 0.0)) {
    throw UndefinedReduction("error reduction needs a positive surrogate discrepancy");
  }
  return 1.0 - model_mae / surrogate_mad;
}

inline double median(std::vector<double> v) {
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) {
    return *mid;
  }
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

/// Sample standard deviation (n - 1); NaN below two values.
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) {
    ss += (x - mean) * (x - mean);
  }
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace wmfgp
