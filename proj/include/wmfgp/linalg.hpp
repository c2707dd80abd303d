#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#define WMFGP_HAS_MXCSR 1
#endif

#include "wmfgp/errors.hpp"

extern "C" {
void dpotrf_(const char *uplo, const int *n, double *a, const int *lda, int *info);
void dpotri_(const char *uplo, const int *n, double *a, const int *lda, int *info);
}

namespace wmfgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112; // log(2*pi)

/// Flushes subnormal results to zero for the lifetime of the guard.
/// Cholesky factors of smooth kernels decay far below the normal range and
/// subnormal arithmetic is orders of magnitude slower.
class FlushDenormals {
public:
  FlushDenormals() {
#ifdef WMFGP_HAS_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040u);
#endif
  }
  ~FlushDenormals() {
#ifdef WMFGP_HAS_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals &) = delete;
  FlushDenormals &operator=(const FlushDenormals &) = delete;

private:
  unsigned int saved_ = 0;
};

/// Diagonal jitter schedule, relative to the mean diagonal of the matrix.
struct JitterPolicy {
  double initial = 1e-10;
  double maximum = 1e-4;
  double growth = 10.0;
};

/// Cholesky factor of `K + jitter * I`; jitter is 0 when the plain factor is
/// well enough conditioned, otherwise the smallest level that worked.
struct JitteredCholesky {
  /// Lower-triangular factor; the strict upper triangle is zero.
  Matrix lower;
  double jitter = 0.0;

  auto matrix_l() const { return lower.triangularView<Eigen::Lower>(); }

  double log_determinant() const {
    return 2.0 * lower.diagonal().array().log().sum();
  }

  Vector solve(const Vector &b) const {
    const Vector z = matrix_l().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(z);
  }

  /// Full symmetric inverse of the jittered matrix.
  Matrix inverse() const {
    FlushDenormals guard;
    Matrix inv = lower;
    const int n = static_cast<int>(inv.rows());
    int info = 0;
    if (n > 0) {
      dpotri_("L", &n, inv.data(), &n, &info);
    }
    if (info != 0) {
      throw NumericalFailure("inverse from Cholesky factor failed", {jitter});
    }
    inv.triangularView<Eigen::StrictlyUpper>() = inv.transpose();
    return inv;
  }
};

inline JitteredCholesky factorize_with_jitter(const Matrix &k,
                                              const JitterPolicy &policy = {}) {
  FlushDenormals guard;
  const Eigen::Index n = k.rows();
  double scale = n > 0 ? k.diagonal().mean() : 1.0;
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    scale = 1.0;
  }
  const int ni = static_cast<int>(n);
  std::vector<double> tried;
  JitteredCholesky out;
  if (k.allFinite()) {
    // Plain factor first; kept unless a pivot falls below the first jitter
    // level, where the jittered factor is the better conditioned of the two.
    out.lower = k;
    int info = 0;
    if (n > 0) {
      dpotrf_("L", &ni, out.lower.data(), &ni, &info);
    }
    if (info == 0 && out.lower.diagonal().allFinite() &&
        (out.lower.diagonal().array().square() >= policy.initial * scale).all()) {
      out.lower.triangularView<Eigen::StrictlyUpper>().setZero();
      out.jitter = 0.0;
      return out;
    }
    for (double rel = policy.initial; rel <= policy.maximum * (1.0 + 1e-9);
         rel *= policy.growth) {
      const double jitter = rel * scale;
      tried.push_back(jitter);
      out.lower = k;
      out.lower.diagonal().array() += jitter;
      int info = 0;
      if (n > 0) {
        dpotrf_("L", &ni, out.lower.data(), &ni, &info);
      }
      if (info == 0 && out.lower.diagonal().allFinite() &&
          (out.lower.diagonal().array() > 0.0).all()) {
        out.lower.triangularView<Eigen::StrictlyUpper>().setZero();
        out.jitter = jitter;
        return out;
      }
    }
  }
  throw NumericalFailure("covariance matrix is not positive definite", tried);
}

inline std::span<const double> as_span(const std::vector<double> &v) {
  return {v.data(), v.size()};
}

inline Vector to_vector(std::span<const double> v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector &v) {
  return {v.data(), v.data() + v.size()};
}

} // namespace wmfgp
