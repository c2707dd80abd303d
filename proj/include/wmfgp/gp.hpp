#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wmfgp/errors.hpp"
#include "wmfgp/kernel.hpp"
#include "wmfgp/linalg.hpp"
#include "wmfgp/optimize.hpp"

namespace wmfgp {

/// Kernel plus i.i.d. Gaussian observation noise.
struct GpHyperparams {
  KernelParams kernel;
  double noise_variance = 0.0;

  void validate() const {
    kernel.validate();
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
      throw InvalidInput("noise_variance must be non-negative and finite");
    }
  }
};

/// Derivatives of the NLML with respect to the natural hyperparameters.
struct GpGradient {
  double length_scale = 0.0;
  double signal_variance = 0.0;
  double nugget = 0.0;
  double noise_variance = 0.0;
};

struct GpNlml {
  double value = 0.0;
  GpGradient gradient;
};

/// Predictive mean and latent variance at query indices.
struct Prediction {
  Vector mean;
  Vector variance;
  std::vector<std::string> warnings;
};

namespace detail {

inline void require_same_size(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvalidInput("inputs and targets differ in length");
  }
  if (x.empty()) {
    throw InvalidInput("at least one data point is required");
  }
}

inline void require_strictly_increasing(std::span<const double> x, const char *what) {
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) {
      throw InvalidInput(std::string(what) + " must be strictly increasing");
    }
  }
}

inline void require_finite_values(std::span<const double> y, const char *what) {
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw InvalidInput(std::string(what) + " contains non-finite values");
    }
  }
}

inline Matrix training_cov(std::span<const double> x, const GpHyperparams &hp) {
  Matrix k = cov_matrix(pairwise_distances(x, x), hp.kernel);
  k.diagonal().array() += hp.noise_variance;
  return k;
}

/// Clamp round-off negatives; warn when the violation is not round-off.
inline void clamp_variances(Vector &var, const Vector &prior,
                            std::vector<std::string> &warnings) {
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    if (var[i] < 0.0) {
      if (var[i] < -1e-8 * prior[i]) {
        warnings.push_back("negative predictive variance " + std::to_string(var[i]) +
                           " clamped to zero");
      }
      var[i] = 0.0;
    }
  }
}

/// NLML over precomputed distances; gradient filled when requested.
inline GpNlml gp_nlml_cached(const GpHyperparams &hp, const PairwiseDistances &dist,
                             std::span<const double> y, bool with_gradient,
                             const JitterPolicy &jitter) {
  hp.validate();
  const auto blk = correlation_block(dist, hp.kernel, with_gradient);
  Matrix k = hp.kernel.signal_variance * blk.corr;
  if (hp.kernel.nugget != 0.0) {
    k += hp.kernel.nugget * dist.coincide;
  }
  k.diagonal().array() += hp.noise_variance;
  const auto chol = factorize_with_jitter(k, jitter);
  const Vector yv = to_vector(y);
  const Vector alpha = chol.solve(yv);

  GpNlml out;
  out.value = 0.5 * yv.dot(alpha) + 0.5 * chol.log_determinant() +
              0.5 * static_cast<double>(y.size()) * kLog2Pi;
  if (!with_gradient) {
    return out;
  }
  Matrix w = chol.inverse();
  w.noalias() -= alpha * alpha.transpose();
  const double sv = hp.kernel.signal_variance;
  out.gradient.length_scale =
      0.5 * sv / hp.kernel.length_scale * w.cwiseProduct(blk.dcorr_dlog_length).sum();
  out.gradient.signal_variance = 0.5 * w.cwiseProduct(blk.corr).sum();
  out.gradient.nugget = 0.5 * w.cwiseProduct(dist.coincide).sum();
  out.gradient.noise_variance = 0.5 * w.trace();
  return out;
}

} // namespace detail

/// Negative log marginal likelihood of a zero-mean GP.
inline double gp_nlml(const GpHyperparams &hp, std::span<const double> x,
                      std::span<const double> y, const JitterPolicy &jitter = {}) {
  detail::require_same_size(x, y);
  return detail::gp_nlml_cached(hp, pairwise_distances(x, x), y, false, jitter).value;
}

/// NLML and its analytic gradient, 0.5 * tr((K^-1 - a a^T) dK).
inline GpNlml gp_nlml_with_gradient(const GpHyperparams &hp, std::span<const double> x,
                                    std::span<const double> y,
                                    const JitterPolicy &jitter = {}) {
  detail::require_same_size(x, y);
  return detail::gp_nlml_cached(hp, pairwise_distances(x, x), y, true, jitter);
}

/// A GP conditioned on training data. Immutable once built.
class GPModel {
public:
  static GPModel condition(const GpHyperparams &hp, std::vector<double> x,
                           std::vector<double> y, const JitterPolicy &jitter = {}) {
    hp.validate();
    detail::require_same_size(x, y);
    detail::require_strictly_increasing(x, "training inputs");
    detail::require_finite_values(y, "training targets");
    GPModel m;
    m.hp_ = hp;
    m.x_ = std::move(x);
    m.y_ = std::move(y);
    m.chol_ = factorize_with_jitter(detail::training_cov(m.x_, hp), jitter);
    const Vector yv = to_vector(m.y_);
    m.alpha_ = m.chol_.solve(yv);
    m.nlml_ = 0.5 * yv.dot(m.alpha_) + 0.5 * m.chol_.log_determinant() +
              0.5 * static_cast<double>(m.y_.size()) * kLog2Pi;
    return m;
  }

  const GpHyperparams &hyperparams() const { return hp_; }
  const std::vector<double> &inputs() const { return x_; }
  const std::vector<double> &targets() const { return y_; }
  Matrix cholesky_factor() const { return chol_.lower; }
  double jitter() const { return chol_.jitter; }
  double nlml() const { return nlml_; }

  Prediction predict(std::span<const double> query) const {
    const Matrix ks = cov_matrix(x_, query, hp_.kernel);
    Prediction p;
    p.mean = ks.transpose() * alpha_;
    const Matrix v = chol_.matrix_l().solve(ks);
    Vector prior(ks.cols());
    for (Eigen::Index i = 0; i < prior.size(); ++i) {
      prior[i] = kernel_value(query[static_cast<std::size_t>(i)],
                              query[static_cast<std::size_t>(i)], hp_.kernel);
    }
    p.variance = prior - v.colwise().squaredNorm().transpose();
    detail::clamp_variances(p.variance, prior, p.warnings);
    return p;
  }

private:
  GPModel() = default;

  GpHyperparams hp_;
  std::vector<double> x_;
  std::vector<double> y_;
  JitteredCholesky chol_;
  Vector alpha_;
  double nlml_ = 0.0;
};

inline Prediction gp_predict(const GPModel &model, std::span<const double> query) {
  return model.predict(query);
}

/// Search ranges (natural units) for the log-space optimizer.
struct HyperparameterBounds {
  double length_scale_min = 1e-2;
  double length_scale_max = 1e3;
  double variance_min = 1e-4;
  double variance_max = 1e2;
};

struct GpFitConfig {
  KernelFamily family = KernelFamily::squared_exponential;
  /// Held fixed during fitting.
  double nugget = 0.0;
  HyperparameterBounds bounds;
  OptimizerConfig optimizer;
  JitterPolicy jitter;
};

namespace detail {

inline GpHyperparams gp_from_log(const Vector &p, const GpFitConfig &cfg) {
  GpHyperparams hp;
  hp.kernel.family = cfg.family;
  hp.kernel.length_scale = std::exp(p[0]);
  hp.kernel.signal_variance = std::exp(p[1]);
  hp.kernel.nugget = cfg.nugget;
  hp.noise_variance = std::exp(p[2]);
  return hp;
}

inline double sample_variance(std::span<const double> y) {
  if (y.size() < 2) {
    return 0.0;
  }
  double mean = 0.0;
  for (double v : y) {
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) {
    ss += (v - mean) * (v - mean);
  }
  return ss / static_cast<double>(y.size() - 1);
}

inline double median_spacing(std::span<const double> x) {
  if (x.size() < 2) {
    return 1.0;
  }
  std::vector<double> d;
  d.reserve(x.size() - 1);
  for (std::size_t i = 1; i < x.size(); ++i) {
    d.push_back(x[i] - x[i - 1]);
  }
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

} // namespace detail

/// Maximum-likelihood fit of length scale, signal variance and noise.
inline GPModel gp_fit(std::vector<double> x, std::vector<double> y,
                      const GpFitConfig &cfg = {}) {
  detail::require_same_size(x, y);
  detail::require_strictly_increasing(x, "training inputs");
  detail::require_finite_values(y, "training targets");
  const auto &b = cfg.bounds;
  Box box{Vector(3), Vector(3)};
  box.lower << std::log(b.length_scale_min), std::log(b.variance_min), std::log(b.variance_min);
  box.upper << std::log(b.length_scale_max), std::log(b.variance_max), std::log(b.variance_max);

  const PairwiseDistances dist = pairwise_distances(x, x);
  const Objective objective = [&](const Vector &p, Vector *grad) {
    const GpHyperparams hp = detail::gp_from_log(p, cfg);
    const auto r = detail::gp_nlml_cached(hp, dist, y, grad != nullptr, cfg.jitter);
    if (grad == nullptr) {
      return r.value;
    }
    grad->resize(3);
    (*grad)[0] = r.gradient.length_scale * hp.kernel.length_scale;
    (*grad)[1] = r.gradient.signal_variance * hp.kernel.signal_variance;
    (*grad)[2] = r.gradient.noise_variance * hp.noise_variance;
    return r.value;
  };

  const double var = std::max(detail::sample_variance(y), b.variance_min);
  Vector guess(3);
  guess << std::log(5.0 * detail::median_spacing(x)), std::log(var), std::log(0.1 * var);
  const auto res = multistart_minimize(objective, box, {guess}, cfg.optimizer);
  return GPModel::condition(detail::gp_from_log(res.x, cfg), std::move(x), std::move(y),
                            cfg.jitter);
}

} // namespace wmfgp
