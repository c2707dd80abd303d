#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wmfgp/errors.hpp"
#include "wmfgp/gp.hpp"
#include "wmfgp/kernel.hpp"
#include "wmfgp/linalg.hpp"
#include "wmfgp/optimize.hpp"

namespace wmfgp {

/// Low- and high-fidelity observations with every HF index also an LF index.
struct NestedDesign {
  std::vector<double> x_l;
  std::vector<double> y_l;
  std::vector<double> x_h;
  std::vector<double> y_h;

  std::size_t n_l() const { return x_l.size(); }
  std::size_t n_h() const { return x_h.size(); }
  std::size_t size() const { return x_l.size() + x_h.size(); }

  /// Position of each HF index inside `x_l`. Throws when nesting fails.
  std::vector<std::size_t> hf_positions() const {
    std::vector<std::size_t> pos;
    pos.reserve(x_h.size());
    std::size_t j = 0;
    for (double xh : x_h) {
      while (j < x_l.size() && x_l[j] < xh) {
        ++j;
      }
      if (j == x_l.size() || x_l[j] != xh) {
        throw DesignViolation("HF index " + std::to_string(xh) +
                              " is not an LF index (design is not nested)");
      }
      pos.push_back(j);
    }
    return pos;
  }

  void validate() const {
    if (x_l.size() != y_l.size() || x_h.size() != y_h.size()) {
      throw InvalidInput("design inputs and targets differ in length");
    }
    if (x_l.empty() || x_h.empty()) {
      throw InvalidInput("both fidelities need at least one observation");
    }
    detail::require_strictly_increasing(x_l, "LF inputs");
    detail::require_strictly_increasing(x_h, "HF inputs");
    detail::require_finite(x_l, "LF inputs");
    detail::require_finite(x_h, "HF inputs");
    detail::require_finite_values(y_l, "LF targets");
    detail::require_finite_values(y_h, "HF targets");
    (void)hf_positions();
  }
};

/// The seven free parameters of the two-fidelity model. Kernel nuggets are
/// carried along but held fixed when fitting.
struct MfgpHyperparams {
  KernelParams lf;          // u_L
  KernelParams discrepancy; // delta
  double rho = 1.0;
  double sigma_l2 = 0.0;
  double sigma_h2 = 0.0;

  void validate() const {
    lf.validate();
    discrepancy.validate();
    if (!std::isfinite(rho)) {
      throw InvalidInput("rho must be finite");
    }
    if (!(sigma_l2 >= 0.0) || !(sigma_h2 >= 0.0) || !std::isfinite(sigma_l2) ||
        !std::isfinite(sigma_h2)) {
      throw InvalidInput("noise variances must be non-negative and finite");
    }
  }

  /// Prior variance of u_H at any single index.
  double hf_prior_variance() const {
    return rho * rho * lf.prior_variance() + discrepancy.prior_variance();
  }
};

/// Derivatives of the joint NLML, ordered as `MfgpGradient::names`.
struct MfgpGradient {
  static constexpr std::array<const char *, 7> names = {
      "lf_length_scale", "lf_signal_variance", "disc_length_scale",
      "disc_signal_variance", "rho", "sigma_l2", "sigma_h2"};
  std::array<double, 7> values{};
};

struct MfgpNlml {
  double value = 0.0;
  MfgpGradient gradient;
};

/// Pairwise distances of a nested design, reused across evaluations.
struct MfgpDistances {
  PairwiseDistances ll;
  PairwiseDistances lh;
  PairwiseDistances hh;

  static MfgpDistances of(const NestedDesign &d) {
    return {pairwise_distances(d.x_l, d.x_l), pairwise_distances(d.x_l, d.x_h),
            pairwise_distances(d.x_h, d.x_h)};
  }
};

namespace detail {

inline Vector stacked_targets(const NestedDesign &d) {
  Vector y(static_cast<Eigen::Index>(d.size()));
  y << to_vector(d.y_l), to_vector(d.y_h);
  return y;
}

inline Matrix joint_cov(const MfgpDistances &dist, const MfgpHyperparams &p) {
  const auto nl = dist.ll.squared.rows();
  const auto nh = dist.hh.squared.rows();
  Matrix k(nl + nh, nl + nh);
  k.topLeftCorner(nl, nl) = cov_matrix(dist.ll, p.lf);
  k.topLeftCorner(nl, nl).diagonal().array() += p.sigma_l2;
  k.topRightCorner(nl, nh) = p.rho * cov_matrix(dist.lh, p.lf);
  k.bottomLeftCorner(nh, nl) = k.topRightCorner(nl, nh).transpose();
  k.bottomRightCorner(nh, nh) =
      p.rho * p.rho * cov_matrix(dist.hh, p.lf) + cov_matrix(dist.hh, p.discrepancy);
  k.bottomRightCorner(nh, nh).diagonal().array() += p.sigma_h2;
  return k;
}

/// Joint NLML over precomputed distances; gradient filled when requested.
inline MfgpNlml mfgp_nlml_cached(const MfgpHyperparams &p, const MfgpDistances &dist,
                                 const Vector &y, bool with_gradient,
                                 const JitterPolicy &jitter) {
  p.validate();
  MfgpNlml out;
  if (!with_gradient) {
    const auto chol = factorize_with_jitter(joint_cov(dist, p), jitter);
    out.value = 0.5 * y.dot(chol.solve(y)) + 0.5 * chol.log_determinant() +
                0.5 * static_cast<double>(y.size()) * kLog2Pi;
    return out;
  }
  const auto nl = dist.ll.squared.rows();
  const auto nh = dist.hh.squared.rows();
  const auto ll = correlation_block(dist.ll, p.lf);
  const auto lh = correlation_block(dist.lh, p.lf);
  const auto hh1 = correlation_block(dist.hh, p.lf);
  const auto hh2 = correlation_block(dist.hh, p.discrepancy);

  const double sv1 = p.lf.signal_variance;
  const double sv2 = p.discrepancy.signal_variance;
  const double rho = p.rho;
  Matrix c1_lh = sv1 * lh.corr;
  Matrix c1_hh = sv1 * hh1.corr;
  if (p.lf.nugget != 0.0) {
    c1_lh += p.lf.nugget * dist.lh.coincide;
    c1_hh += p.lf.nugget * dist.hh.coincide;
  }

  Matrix k(nl + nh, nl + nh);
  k.topLeftCorner(nl, nl) = sv1 * ll.corr + p.lf.nugget * dist.ll.coincide;
  k.topLeftCorner(nl, nl).diagonal().array() += p.sigma_l2;
  k.topRightCorner(nl, nh) = rho * c1_lh;
  k.bottomLeftCorner(nh, nl) = k.topRightCorner(nl, nh).transpose();
  k.bottomRightCorner(nh, nh) =
      rho * rho * c1_hh + sv2 * hh2.corr + p.discrepancy.nugget * dist.hh.coincide;
  k.bottomRightCorner(nh, nh).diagonal().array() += p.sigma_h2;

  const auto chol = factorize_with_jitter(k, jitter);
  const Vector alpha = chol.solve(y);
  out.value = 0.5 * y.dot(alpha) + 0.5 * chol.log_determinant() +
              0.5 * static_cast<double>(y.size()) * kLog2Pi;

  Matrix w = chol.inverse();
  w.noalias() -= alpha * alpha.transpose();
  const auto w_ll = w.topLeftCorner(nl, nl);
  const auto w_lh = w.topRightCorner(nl, nh);
  const auto w_hh = w.bottomRightCorner(nh, nh);

  // 0.5 * tr(W dK) with dK split into its LL, LH (counted twice) and HH blocks.
  auto trace = [&](const auto &d_ll, const auto &d_lh, const auto &d_hh) {
    return 0.5 * (w_ll.cwiseProduct(d_ll).sum() + 2.0 * w_lh.cwiseProduct(d_lh).sum() +
                  w_hh.cwiseProduct(d_hh).sum());
  };
  auto &g = out.gradient.values;
  const double s1 = sv1 / p.lf.length_scale;
  g[0] = s1 * trace(ll.dcorr_dlog_length, rho * lh.dcorr_dlog_length,
                    rho * rho * hh1.dcorr_dlog_length);
  g[1] = trace(ll.corr, rho * lh.corr, rho * rho * hh1.corr);
  g[2] = 0.5 * sv2 / p.discrepancy.length_scale *
         w_hh.cwiseProduct(hh2.dcorr_dlog_length).sum();
  g[3] = 0.5 * w_hh.cwiseProduct(hh2.corr).sum();
  g[4] = w_lh.cwiseProduct(c1_lh).sum() + rho * w_hh.cwiseProduct(c1_hh).sum();
  g[5] = 0.5 * w_ll.trace();
  g[6] = 0.5 * w_hh.trace();
  return out;
}

} // namespace detail

/// Joint covariance of the stacked vector [y_L; y_H].
inline Matrix assemble_joint_cov(const NestedDesign &d, const MfgpHyperparams &p) {
  d.validate();
  p.validate();
  return detail::joint_cov(MfgpDistances::of(d), p);
}

inline double mfgp_nlml(const MfgpHyperparams &p, const NestedDesign &d,
                        const JitterPolicy &jitter = {}) {
  d.validate();
  return detail::mfgp_nlml_cached(p, MfgpDistances::of(d), detail::stacked_targets(d), false,
                                  jitter)
      .value;
}

/// Joint NLML with its analytic gradient in the seven natural parameters.
inline MfgpNlml mfgp_nlml_with_gradient(const MfgpHyperparams &p, const NestedDesign &d,
                                        const JitterPolicy &jitter = {}) {
  d.validate();
  return detail::mfgp_nlml_cached(p, MfgpDistances::of(d), detail::stacked_targets(d), true,
                                  jitter);
}

struct MfgpFitConfig;

/// Two-fidelity GP conditioned on a nested design. Immutable once built.
class MFGPModel {
public:
  static MFGPModel condition(const MfgpHyperparams &p, NestedDesign d,
                             const JitterPolicy &jitter = {}) {
    MFGPModel m;
    m.p_ = p;
    m.design_ = std::move(d);
    m.chol_ = factorize_with_jitter(assemble_joint_cov(m.design_, p), jitter);
    const Vector y = detail::stacked_targets(m.design_);
    m.alpha_ = m.chol_.solve(y);
    m.nlml_ = 0.5 * y.dot(m.alpha_) + 0.5 * m.chol_.log_determinant() +
              0.5 * static_cast<double>(y.size()) * kLog2Pi;
    return m;
  }

  const MfgpHyperparams &hyperparams() const { return p_; }
  const NestedDesign &design() const { return design_; }
  Matrix cholesky_factor() const { return chol_.lower; }
  double jitter() const { return chol_.jitter; }
  double nlml() const { return nlml_; }
  const std::vector<std::string> &warnings() const { return warnings_; }

  /// Cross-covariance q between the training vector and u_H at `query`.
  Matrix cross_cov(std::span<const double> query) const {
    const auto nl = static_cast<Eigen::Index>(design_.n_l());
    const auto nh = static_cast<Eigen::Index>(design_.n_h());
    Matrix q(nl + nh, static_cast<Eigen::Index>(query.size()));
    q.topRows(nl) = p_.rho * cov_matrix(design_.x_l, query, p_.lf);
    q.bottomRows(nh) = p_.rho * p_.rho * cov_matrix(design_.x_h, query, p_.lf) +
                       cov_matrix(design_.x_h, query, p_.discrepancy);
    return q;
  }

  /// Mean q^T K^-1 y and latent variance C_HH(x*, x*) - q^T K^-1 q.
  Prediction predict(std::span<const double> query) const {
    const Matrix q = cross_cov(query);
    Prediction out;
    out.mean = q.transpose() * alpha_;
    const Matrix v = chol_.matrix_l().solve(q);
    const Vector prior = Vector::Constant(q.cols(), p_.hf_prior_variance());
    out.variance = prior - v.colwise().squaredNorm().transpose();
    detail::clamp_variances(out.variance, prior, out.warnings);
    return out;
  }

private:
  friend MFGPModel mfgp_fit(NestedDesign, const MfgpFitConfig &);
  MFGPModel() = default;

  MfgpHyperparams p_;
  NestedDesign design_;
  JitteredCholesky chol_;
  Vector alpha_;
  double nlml_ = 0.0;
  std::vector<std::string> warnings_;
};

inline Prediction mfgp_predict(const MFGPModel &m, std::span<const double> query) {
  return m.predict(query);
}

struct MfgpFitConfig {
  KernelFamily family = KernelFamily::squared_exponential;
  double lf_nugget = 0.0;
  double discrepancy_nugget = 0.0;
  HyperparameterBounds bounds;
  /// Feasible range for rho; wide enough to act as unconstrained.
  double rho_limit = 1e3;
  /// Half-width of the rho start range around the regression slope,
  /// as a multiple of max(1, |slope|).
  double rho_start_spread = 1.0;
  /// Advisory threshold on N_H / N_L.
  double advisory_ratio = 0.35;
  OptimizerConfig optimizer;
  JitterPolicy jitter;
};

namespace detail {

inline MfgpHyperparams mfgp_from_packed(const Vector &p, const MfgpFitConfig &cfg) {
  MfgpHyperparams h;
  h.lf = {std::exp(p[0]), std::exp(p[1]), cfg.lf_nugget, cfg.family};
  h.discrepancy = {std::exp(p[2]), std::exp(p[3]), cfg.discrepancy_nugget, cfg.family};
  h.rho = p[4];
  h.sigma_l2 = std::exp(p[5]);
  h.sigma_h2 = std::exp(p[6]);
  return h;
}

/// Least-squares slope of y_H on y_L at the shared indices.
inline double regression_slope(const NestedDesign &d) {
  const auto pos = d.hf_positions();
  const auto n = static_cast<double>(pos.size());
  double ml = 0.0;
  double mh = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    ml += d.y_l[pos[i]];
    mh += d.y_h[i];
  }
  ml /= n;
  mh /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double a = d.y_l[pos[i]] - ml;
    sxy += a * (d.y_h[i] - mh);
    sxx += a * a;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

} // namespace detail

/// Joint maximum-likelihood fit of the seven parameters.
inline MFGPModel mfgp_fit(NestedDesign d, const MfgpFitConfig &cfg = {}) {
  d.validate();
  if (d.n_l() < 3 || d.n_h() < 3) {
    throw InvalidInput("mfgp_fit needs at least 3 observations per fidelity");
  }
  const auto &b = cfg.bounds;
  const double slope = detail::regression_slope(d);
  const double spread = cfg.rho_start_spread * std::max(1.0, std::abs(slope));
  const double lv_min = std::log(b.variance_min);
  const double lv_max = std::log(b.variance_max);
  const double ll_min = std::log(b.length_scale_min);
  const double ll_max = std::log(b.length_scale_max);

  Box box{Vector(7), Vector(7)};
  box.lower << ll_min, lv_min, ll_min, lv_min, -cfg.rho_limit, lv_min, lv_min;
  box.upper << ll_max, lv_max, ll_max, lv_max, cfg.rho_limit, lv_max, lv_max;
  Box start_box = box;
  start_box.lower[4] = slope - spread;
  start_box.upper[4] = slope + spread;

  const MfgpDistances dist = MfgpDistances::of(d);
  const Vector y = detail::stacked_targets(d);
  const Objective objective = [&](const Vector &x, Vector *grad) {
    const MfgpHyperparams h = detail::mfgp_from_packed(x, cfg);
    const auto r = detail::mfgp_nlml_cached(h, dist, y, grad != nullptr, cfg.jitter);
    if (grad == nullptr) {
      return r.value;
    }
    const auto &g = r.gradient.values;
    grad->resize(7);
    (*grad)[0] = g[0] * h.lf.length_scale;
    (*grad)[1] = g[1] * h.lf.signal_variance;
    (*grad)[2] = g[2] * h.discrepancy.length_scale;
    (*grad)[3] = g[3] * h.discrepancy.signal_variance;
    (*grad)[4] = g[4];
    (*grad)[5] = g[5] * h.sigma_l2;
    (*grad)[6] = g[6] * h.sigma_h2;
    return r.value;
  };

  // Data-driven start: LF variance split between signal and noise, residual
  // variance of the HF-on-LF regression for the discrepancy.
  const double var_l = std::max(detail::sample_variance(d.y_l), b.variance_min);
  const auto pos = d.hf_positions();
  std::vector<double> resid(d.n_h());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    resid[i] = d.y_h[i] - slope * d.y_l[pos[i]];
  }
  const double var_r = std::max(detail::sample_variance(resid), b.variance_min);
  Vector guess(7);
  guess << std::log(5.0 * detail::median_spacing(d.x_l)), std::log(0.8 * var_l),
      std::log(5.0 * detail::median_spacing(d.x_h)), std::log(0.8 * var_r), slope,
      std::log(0.2 * var_l), std::log(0.2 * var_r);

  const auto res = multistart_minimize(objective, box, {guess}, cfg.optimizer, start_box);
  const double ratio = static_cast<double>(d.n_h()) / static_cast<double>(d.n_l());
  MFGPModel m = MFGPModel::condition(detail::mfgp_from_packed(res.x, cfg), std::move(d),
                                     cfg.jitter);
  if (ratio > cfg.advisory_ratio) {
    m.warnings_.push_back("N_H/N_L = " + std::to_string(ratio) +
                          " exceeds " + std::to_string(cfg.advisory_ratio) +
                          "; a single-fidelity GP may do as well");
  }
  return m;
}

} // namespace wmfgp
