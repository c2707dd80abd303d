#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wmfgp/errors.hpp"
#include "wmfgp/gp.hpp"
#include "wmfgp/mfgp.hpp"
#include "wmfgp/warp.hpp"

namespace wmfgp {

inline constexpr double kZ95 = 1.959963984540054;

struct FillDiagnostics {
  double nlml = std::numeric_limits<double>::quiet_NaN();
  /// NaN for single-fidelity models.
  double rho = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

/// Point predictions and 95% intervals in response units.
struct FillResult {
  std::vector<double> query;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
  std::string model;
  FillDiagnostics diagnostics;

  std::size_t size() const { return query.size(); }

  /// Columns timestamp, mean, lower, upper, model. `label` renders a query
  /// index; the index itself is written when it is empty.
  void write_csv(std::ostream &os, bool header = true,
                 const std::function<std::string(double)> &label = {}) const {
    if (header) {
      os << "timestamp,mean,lower,upper,model\n";
    }
    os << std::setprecision(10);
    for (std::size_t i = 0; i < query.size(); ++i) {
      if (label) {
        os << label(query[i]);
      } else {
        os << query[i];
      }
      os << ',' << mean[i] << ',' << lower[i] << ',' << upper[i] << ',' << model << '\n';
    }
  }
};

struct BoxCoxConfig {
  double lambda_min = -2.0;
  double lambda_max = 2.0;
  double lambda_step = 0.01;
  /// Used instead of the grid search when set.
  std::optional<double> fixed_lambda;
  /// Shift epsilon as a fraction of the sample range.
  double shift_fraction = 0.05;
};

struct FillConfig {
  MfgpFitConfig mfgp;
  GpFitConfig gp;
  WarpConfig warp;
  BoxCoxConfig boxcox;
  /// Intervals for a new observation (latent variance plus noise variance)
  /// rather than for the latent process alone.
  bool include_noise = true;
  /// Fit on z-scored targets and map predictions back.
  bool standardize = true;
};

namespace detail {

struct Scaling {
  double center = 0.0;
  double scale = 1.0;

  static Scaling of(std::span<const double> y, bool enabled) {
    Scaling s;
    if (!enabled || y.size() < 2) {
      return s;
    }
    double m = 0.0;
    for (double v : y) {
      m += v;
    }
    m /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) {
      ss += (v - m) * (v - m);
    }
    const double sd = std::sqrt(ss / static_cast<double>(y.size() - 1));
    s.center = m;
    s.scale = sd > 0.0 ? sd : 1.0;
    return s;
  }

  std::vector<double> apply(std::span<const double> y) const {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      out[i] = (y[i] - center) / scale;
    }
    return out;
  }
};

/// Latent predictive mean and standard deviation in the units of the fitted data.
struct LatentFill {
  std::vector<double> mean;
  std::vector<double> sd;
  FillDiagnostics diagnostics;
};

inline LatentFill latent_mfgp(const NestedDesign &d, std::span<const double> query,
                              const FillConfig &cfg) {
  // LF is centred and scaled on the shared HF support, so that a shift of the
  // LF level inside a gap is carried by rho rather than by the zero-mean
  // discrepancy.
  std::vector<double> shared;
  for (auto i : d.hf_positions()) {
    shared.push_back(d.y_l[i]);
  }
  const Scaling sl = Scaling::of(shared, cfg.standardize);
  const Scaling sh = Scaling::of(d.y_h, cfg.standardize);
  NestedDesign scaled{d.x_l, sl.apply(d.y_l), d.x_h, sh.apply(d.y_h)};
  const MFGPModel model = mfgp_fit(std::move(scaled), cfg.mfgp);
  const Prediction p = mfgp_predict(model, query);
  LatentFill out;
  const double noise = cfg.include_noise ? model.hyperparams().sigma_h2 : 0.0;
  for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
    out.mean.push_back(sh.center + sh.scale * p.mean[i]);
    out.sd.push_back(sh.scale * std::sqrt(p.variance[i] + noise));
  }
  out.diagnostics.nlml = model.nlml();
  out.diagnostics.rho = model.hyperparams().rho * sh.scale / sl.scale;
  out.diagnostics.warnings = model.warnings();
  out.diagnostics.warnings.insert(out.diagnostics.warnings.end(), p.warnings.begin(),
                                  p.warnings.end());
  return out;
}

inline LatentFill latent_gp(std::span<const double> x, std::span<const double> y,
                            std::span<const double> query, const FillConfig &cfg) {
  const Scaling s = Scaling::of(y, cfg.standardize);
  const GPModel model = gp_fit({x.begin(), x.end()}, s.apply(y), cfg.gp);
  const Prediction p = gp_predict(model, query);
  LatentFill out;
  const double noise = cfg.include_noise ? model.hyperparams().noise_variance : 0.0;
  for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
    out.mean.push_back(s.center + s.scale * p.mean[i]);
    out.sd.push_back(s.scale * std::sqrt(p.variance[i] + noise));
  }
  out.diagnostics.nlml = model.nlml();
  out.diagnostics.warnings = p.warnings;
  return out;
}

/// Mean and mean +- z sd pushed through a monotone map.
inline FillResult finish(std::span<const double> query, const LatentFill &lat,
                         const std::string &model,
                         const std::function<std::vector<double>(std::span<const double>)>
                             &back) {
  FillResult r;
  r.query.assign(query.begin(), query.end());
  r.model = model;
  r.diagnostics = lat.diagnostics;
  std::vector<double> lo(lat.mean.size());
  std::vector<double> hi(lat.mean.size());
  for (std::size_t i = 0; i < lat.mean.size(); ++i) {
    lo[i] = lat.mean[i] - kZ95 * lat.sd[i];
    hi[i] = lat.mean[i] + kZ95 * lat.sd[i];
  }
  if (back) {
    r.mean = back(lat.mean);
    r.lower = back(lo);
    r.upper = back(hi);
  } else {
    r.mean = lat.mean;
    r.lower = std::move(lo);
    r.upper = std::move(hi);
  }
  return r;
}

inline Warp warp_source(std::span<const double> y, Fidelity source, const WarpConfig &cfg) {
  try {
    return build_warp(y, source, cfg);
  } catch (const DegenerateSample &e) {
    throw DegenerateSample(to_string(source) + " source: " + e.what());
  } catch (const InvalidInput &e) {
    throw InvalidInput(to_string(source) + " source: " + e.what());
  }
}

inline void append(std::vector<std::string> &to, const std::vector<std::string> &from) {
  to.insert(to.end(), from.begin(), from.end());
}

} // namespace detail

/// Two-fidelity GP on the raw responses.
inline FillResult mfgp_fill(const NestedDesign &d, std::span<const double> query,
                            const FillConfig &cfg = {}) {
  return detail::finish(query, detail::latent_mfgp(d, query, cfg), "MFGP", {});
}

/// Single-fidelity GP on the HF series.
inline FillResult gp_fill(std::span<const double> x_h, std::span<const double> y_h,
                          std::span<const double> query, const FillConfig &cfg = {}) {
  return detail::finish(query, detail::latent_gp(x_h, y_h, query, cfg), "GP", {});
}

/// Warp both sources to normal scores, fit the two-fidelity GP on the scores,
/// and map predictions back through the HF lookup table.
inline FillResult wmfgp_fill(const NestedDesign &d, std::span<const double> query,
                             const FillConfig &cfg = {}) {
  d.validate();
  const Warp wl = detail::warp_source(d.y_l, Fidelity::low, cfg.warp);
  const Warp wh = detail::warp_source(d.y_h, Fidelity::high, cfg.warp);
  const NestedDesign latent{d.x_l, wl.scores, d.x_h, wh.scores};
  auto lat = detail::latent_mfgp(latent, query, cfg);
  detail::append(lat.diagnostics.warnings, wl.warnings);
  detail::append(lat.diagnostics.warnings, wh.warnings);
  return detail::finish(query, lat, "WMFGP",
                        [&](std::span<const double> v) { return inverse_warp(wh.table, v); });
}

/// Warp the HF series, fit a single-fidelity GP on the scores, map back.
inline FillResult wgp_fill(std::span<const double> x_h, std::span<const double> y_h,
                           std::span<const double> query, const FillConfig &cfg = {}) {
  const Warp wh = detail::warp_source(y_h, Fidelity::high, cfg.warp);
  auto lat = detail::latent_gp(x_h, wh.scores, query, cfg);
  detail::append(lat.diagnostics.warnings, wh.warnings);
  return detail::finish(query, lat, "WGP",
                        [&](std::span<const double> v) { return inverse_warp(wh.table, v); });
}

struct BoxCoxResult {
  double lambda = 1.0;
  double shift = 0.0;
  std::vector<double> transformed;
};

inline double boxcox_value(double y, double lambda) {
  return lambda == 0.0 ? std::log(y) : (std::pow(y, lambda) - 1.0) / lambda;
}

/// Inverse transform. For lambda > 0, values below -1/lambda continue as the
/// odd power sign(b) |b|^(1/lambda), which keeps the map monotone and exact
/// at lambda = 1. For lambda < 0, values past -1/lambda map to a large cap.
inline double boxcox_inverse(double t, double lambda) {
  if (lambda == 0.0) {
    return std::exp(std::min(t, 700.0));
  }
  const double base = lambda * t + 1.0;
  if (lambda > 0.0) {
    return std::copysign(std::pow(std::abs(base), 1.0 / lambda), base);
  }
  return base <= 0.0 ? std::pow(1e-12, 1.0 / lambda) : std::pow(base, 1.0 / lambda);
}

/// Profile log-likelihood of the Box-Cox model at `lambda` (constants dropped).
inline double boxcox_loglik(std::span<const double> y, double lambda) {
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  double log_sum = 0.0;
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    t[i] = boxcox_value(y[i], lambda);
    mean += t[i];
    log_sum += std::log(y[i]);
  }
  mean /= n;
  double ss = 0.0;
  for (double v : t) {
    ss += (v - mean) * (v - mean);
  }
  return -0.5 * n * std::log(ss / n) + (lambda - 1.0) * log_sum;
}

/// Box-Cox with lambda chosen by grid maximum likelihood. `shift` is added to
/// every value before transforming.
inline BoxCoxResult boxcox(std::span<const double> sample, const BoxCoxConfig &cfg = {},
                           double shift = 0.0) {
  if (sample.size() < 2) {
    throw InvalidInput("Box-Cox needs at least two values");
  }
  std::vector<double> y(sample.begin(), sample.end());
  for (auto &v : y) {
    if (!std::isfinite(v)) {
      throw InvalidInput("Box-Cox sample contains non-finite values");
    }
    v += shift;
    if (!(v > 0.0)) {
      throw InvalidInput("Box-Cox needs positive values after the shift");
    }
  }
  BoxCoxResult r;
  r.shift = shift;
  if (cfg.fixed_lambda) {
    r.lambda = *cfg.fixed_lambda;
  } else {
    if (y.front() == *std::max_element(y.begin(), y.end()) &&
        y.front() == *std::min_element(y.begin(), y.end())) {
      throw DegenerateSample("Box-Cox of a constant sample is undefined");
    }
    const int steps =
        static_cast<int>(std::llround((cfg.lambda_max - cfg.lambda_min) / cfg.lambda_step));
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i) {
      // Snap to the grid so that lambda = 0 is hit exactly.
      const double lambda =
          std::round((cfg.lambda_min + i * cfg.lambda_step) / cfg.lambda_step) *
          cfg.lambda_step;
      const double ll = boxcox_loglik(y, lambda);
      if (ll > best) {
        best = ll;
        r.lambda = lambda;
      }
    }
  }
  r.transformed.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    r.transformed[i] = boxcox_value(y[i], r.lambda);
  }
  return r;
}

/// Shift that makes a sample strictly positive: max(0, -min + eps) with
/// eps a fraction of the range.
inline double positive_shift(std::span<const double> y, double fraction) {
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  if (*mn > 0.0) {
    return 0.0;
  }
  const double range = *mx - *mn;
  const double eps = range > 0.0 ? fraction * range : 1.0;
  return -*mn + eps;
}

/// Per-source Box-Cox, two-fidelity GP in the transformed space, inverse
/// Box-Cox on the mean and interval ends.
inline FillResult bcmf_fill(const NestedDesign &d, std::span<const double> query,
                            const FillConfig &cfg = {}) {
  d.validate();
  const double shift_l = positive_shift(d.y_l, cfg.boxcox.shift_fraction);
  const double shift_h = positive_shift(d.y_h, cfg.boxcox.shift_fraction);
  const BoxCoxResult bl = boxcox(d.y_l, cfg.boxcox, shift_l);
  const BoxCoxResult bh = boxcox(d.y_h, cfg.boxcox, shift_h);
  const NestedDesign t{d.x_l, bl.transformed, d.x_h, bh.transformed};
  auto lat = detail::latent_mfgp(t, query, cfg);
  FillResult r = detail::finish(query, lat, "BCMF", [&](std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = boxcox_inverse(v[i], bh.lambda) - bh.shift;
    }
    return out;
  });
  r.diagnostics.warnings.push_back("lambda_L=" + std::to_string(bl.lambda) +
                                   " lambda_H=" + std::to_string(bh.lambda));
  return r;
}

/// Moving-average nearest-neighbour imputation. `values` is an evenly spaced
/// series with NaN marking missing entries; each target index gets the mean
/// of up to `k` observed neighbours on each side.
inline FillResult simple_impute(std::span<const double> values,
                                std::span<const std::size_t> targets, std::size_t k = 24) {
  if (k == 0) {
    throw ConfigError("simple imputation needs k >= 1");
  }
  if (std::none_of(values.begin(), values.end(), [](double v) { return !std::isnan(v); })) {
    throw InvalidInput("series has no observed values");
  }
  FillResult r;
  r.model = "SI";
  for (std::size_t t : targets) {
    if (t >= values.size()) {
      throw InvalidInput("imputation target " + std::to_string(t) + " is outside the series");
    }
    std::vector<double> nb;
    for (std::size_t i = t, found = 0; i > 0 && found < k;) {
      --i;
      if (!std::isnan(values[i])) {
        nb.push_back(values[i]);
        ++found;
      }
    }
    for (std::size_t i = t + 1, found = 0; i < values.size() && found < k; ++i) {
      if (!std::isnan(values[i])) {
        nb.push_back(values[i]);
        ++found;
      }
    }
    double m = 0.0;
    for (double v : nb) {
      m += v;
    }
    m /= static_cast<double>(nb.size());
    double ss = 0.0;
    for (double v : nb) {
      ss += (v - m) * (v - m);
    }
    const double sd = nb.size() > 1 ? std::sqrt(ss / static_cast<double>(nb.size() - 1)) : 0.0;
    r.query.push_back(static_cast<double>(t));
    r.mean.push_back(m);
    r.lower.push_back(m - kZ95 * sd);
    r.upper.push_back(m + kZ95 * sd);
  }
  return r;
}

/// Mean |y_H - y_L| over the gap: the no-model benchmark.
inline double surrogate_discrepancy(std::span<const double> y_h, std::span<const double> y_l) {
  if (y_h.size() != y_l.size()) {
    throw InvalidInput("surrogate needs aligned HF and LF values");
  }
  if (y_h.empty()) {
    throw InvalidInput("surrogate needs a non-empty gap");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y_h.size(); ++i) {
    if (std::isnan(y_l[i])) {
      throw InvalidInput("surrogate needs LF observed over the gap");
    }
    acc += std::abs(y_h[i] - y_l[i]);
  }
  return acc / static_cast<double>(y_h.size());
}

} // namespace wmfgp
