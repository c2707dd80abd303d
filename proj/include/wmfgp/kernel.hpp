#pragma once

#include <cmath>
#include <span>
#include <string>

#include "wmfgp/errors.hpp"
#include "wmfgp/linalg.hpp"

namespace wmfgp {

enum class KernelFamily { squared_exponential, matern52 };

inline std::string to_string(KernelFamily f) {
  return f == KernelFamily::matern52 ? "matern52" : "squared_exponential";
}

/// Stationary covariance over time indices (hours).
///
/// The nugget is added only where the two inputs coincide exactly, so it
/// behaves as micro-scale variation of the process rather than as
/// measurement noise.
struct KernelParams {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double nugget = 0.0;
  KernelFamily family = KernelFamily::squared_exponential;

  void validate() const {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
      throw InvalidInput("kernel length_scale must be positive and finite");
    }
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
      throw InvalidInput("kernel signal_variance must be positive and finite");
    }
    if (!(nugget >= 0.0) || !std::isfinite(nugget)) {
      throw InvalidInput("kernel nugget must be non-negative and finite");
    }
  }

  /// Variance at zero distance, nugget included.
  double prior_variance() const { return signal_variance + nugget; }
};

namespace detail {

inline constexpr double kSqrt5 = 2.23606797749978969640917366873128;

/// Correlation (unit signal variance) at distance `r`.
inline double correlation(double r, const KernelParams &k) {
  if (k.family == KernelFamily::matern52) {
    const double s = kSqrt5 * std::abs(r) / k.length_scale;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
  }
  const double u = r / k.length_scale;
  return std::exp(-0.5 * u * u);
}

inline void require_finite(std::span<const double> xs, const char *what) {
  for (double x : xs) {
    if (!std::isfinite(x)) {
      throw InvalidInput(std::string(what) + " contains a non-finite index");
    }
  }
}

} // namespace detail

/// Scalar covariance between two time indices.
inline double kernel_value(double a, double b, const KernelParams &k) {
  double v = k.signal_variance * detail::correlation(a - b, k);
  if (a == b) {
    v += k.nugget;
  }
  return v;
}

/// Squared distances and exact-coincidence mask between two index sets.
/// Computed once per design and reused across hyperparameter evaluations.
struct PairwiseDistances {
  Matrix squared;
  /// 1 where the inputs coincide exactly, else 0.
  Matrix coincide;
};

inline PairwiseDistances pairwise_distances(std::span<const double> a,
                                            std::span<const double> b) {
  detail::require_finite(a, "first input");
  detail::require_finite(b, "second input");
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  PairwiseDistances out{Matrix(na, nb), Matrix(na, nb)};
  for (Eigen::Index j = 0; j < nb; ++j) {
    const double bj = b[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < na; ++i) {
      const double r = a[static_cast<std::size_t>(i)] - bj;
      out.squared(i, j) = r * r;
      out.coincide(i, j) = r == 0.0 ? 1.0 : 0.0;
    }
  }
  return out;
}

/// Correlation matrix (unit signal variance, no nugget) and its derivative
/// with respect to log(length_scale).
struct CorrelationBlock {
  Matrix corr;
  Matrix dcorr_dlog_length;
};

/// Correlations below exp(-kUnderflowExponent) are stored as exact zeros so
/// that no subnormal values reach the factorization.
inline constexpr double kUnderflowExponent = 700.0;

inline CorrelationBlock correlation_block(const PairwiseDistances &d, const KernelParams &k,
                                          bool with_derivative = true) {
  const auto rows = d.squared.rows();
  const auto cols = d.squared.cols();
  CorrelationBlock out{Matrix(rows, cols), Matrix()};
  if (with_derivative) {
    out.dcorr_dlog_length.resize(rows, cols);
  }
  const double inv_l2 = 1.0 / (k.length_scale * k.length_scale);
  const Eigen::Index n = rows * cols;
  const double *sq = d.squared.data();
  double *c = out.corr.data();
  double *dc = with_derivative ? out.dcorr_dlog_length.data() : nullptr;
  if (k.family == KernelFamily::matern52) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = std::sqrt(5.0 * inv_l2 * sq[i]);
      const double e = s > kUnderflowExponent ? 0.0 : std::exp(-s);
      c[i] = (1.0 + s + s * s / 3.0) * e;
      if (dc != nullptr) {
        dc[i] = s * s * (1.0 + s) / 3.0 * e;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u2 = inv_l2 * sq[i];
      const double e = u2 > 2.0 * kUnderflowExponent ? 0.0 : std::exp(-0.5 * u2);
      c[i] = e;
      if (dc != nullptr) {
        dc[i] = u2 * e;
      }
    }
  }
  return out;
}

/// Covariance over precomputed distances, nugget on coincident pairs.
inline Matrix cov_matrix(const PairwiseDistances &d, const KernelParams &k) {
  Matrix out = k.signal_variance * correlation_block(d, k, false).corr;
  if (k.nugget != 0.0) {
    out += k.nugget * d.coincide;
  }
  return out;
}

/// Cross-covariance matrix with entry (i, j) = k(a_i, b_j).
inline Matrix cov_matrix(std::span<const double> a, std::span<const double> b,
                         const KernelParams &k) {
  return cov_matrix(pairwise_distances(a, b), k);
}

} // namespace wmfgp
