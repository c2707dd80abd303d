#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wmfgp/errors.hpp"

namespace wmfgp {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile.
inline double normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

/// Linear-interpolation quantile of sorted data (type 7).
inline double sorted_quantile(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline void require_finite_sample(std::span<const double> y) {
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw InvalidInput("sample contains non-finite values");
    }
  }
}

} // namespace detail

/// Rule-of-thumb bandwidth 0.9 * min(sd, IQR / 1.34) * N^(-1/5).
/// Falls back to sd when the interquartile range is zero.
inline double estimate_bandwidth(std::span<const double> sample) {
  if (sample.size() < 2) {
    throw DegenerateSample("bandwidth needs at least two values");
  }
  detail::require_finite_sample(sample);
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  if (s.front() == s.back()) {
    throw DegenerateSample("bandwidth of a constant sample is undefined");
  }
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double v : s) {
    mean += v;
  }
  mean /= n;
  double ss = 0.0;
  for (double v : s) {
    ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = detail::sorted_quantile(s, 0.75) - detail::sorted_quantile(s, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

/// Gaussian-kernel estimate of a distribution function.
class KernelCDF {
public:
  explicit KernelCDF(std::span<const double> sample)
      : KernelCDF(sample, estimate_bandwidth(sample)) {}

  KernelCDF(std::span<const double> sample, double bandwidth)
      : sample_(sample.begin(), sample.end()), h_(bandwidth) {
    if (sample_.empty()) {
      throw DegenerateSample("kernel CDF needs a non-empty sample");
    }
    detail::require_finite_sample(sample_);
    if (!(h_ > 0.0) || !std::isfinite(h_)) {
      throw InvalidInput("bandwidth must be positive and finite");
    }
    std::sort(sample_.begin(), sample_.end());
  }

  double bandwidth() const { return h_; }
  const std::vector<double> &sample() const { return sample_; }
  double min() const { return sample_.front(); }
  double max() const { return sample_.back(); }

  /// Mean of Phi((q - s_j) / h). Kernels further than kCutoff bandwidths
  /// away contribute exactly 0 or 1.
  double operator()(double q) const {
    static constexpr double kCutoff = 9.0;
    const auto lo = std::lower_bound(sample_.begin(), sample_.end(), q - kCutoff * h_);
    const auto hi = std::upper_bound(lo, sample_.end(), q + kCutoff * h_);
    double acc = static_cast<double>(lo - sample_.begin());
    for (auto it = lo; it != hi; ++it) {
      acc += normal_cdf((q - *it) / h_);
    }
    return acc / static_cast<double>(sample_.size());
  }

private:
  std::vector<double> sample_;
  double h_;
};

inline std::vector<double> kernel_cdf_eval(const KernelCDF &cdf, std::span<const double> query) {
  std::vector<double> out;
  out.reserve(query.size());
  for (double q : query) {
    out.push_back(cdf(q));
  }
  return out;
}

enum class Fidelity { high, low };

inline std::string to_string(Fidelity f) { return f == Fidelity::high ? "HF" : "LF"; }

/// Dense (z, p) lookup table for the inverse transform.
struct WarpTable {
  std::vector<double> z_grid;
  std::vector<double> p_levels;
  Fidelity source = Fidelity::high;

  double spacing() const {
    return (z_grid.back() - z_grid.front()) / static_cast<double>(z_grid.size() - 1);
  }

  void write_csv(std::ostream &os) const {
    os << "z,p\n" << std::setprecision(17);
    for (std::size_t i = 0; i < z_grid.size(); ++i) {
      os << z_grid[i] << ',' << p_levels[i] << '\n';
    }
  }

  static WarpTable read_csv(std::istream &is, Fidelity source) {
    WarpTable t;
    t.source = source;
    std::string line;
    if (!std::getline(is, line) || line.rfind("z,p", 0) != 0) {
      throw ParseError("warp table CSV must start with a 'z,p' header");
    }
    std::size_t row = 1;
    while (std::getline(is, line)) {
      ++row;
      if (line.empty()) {
        continue;
      }
      const auto comma = line.find(',');
      try {
        if (comma == std::string::npos) {
          throw std::invalid_argument("missing comma");
        }
        t.z_grid.push_back(std::stod(line.substr(0, comma)));
        t.p_levels.push_back(std::stod(line.substr(comma + 1)));
      } catch (const std::logic_error &) {
        throw ParseError("warp table CSV row " + std::to_string(row) + " is malformed");
      }
    }
    if (t.z_grid.size() < 2) {
      throw ParseError("warp table CSV has fewer than two rows");
    }
    return t;
  }
};

struct WarpConfig {
  int grid_points = 4000;
  std::size_t min_sample = 30;
  std::size_t advisory_sample = 1000;
  double p_clamp = 1e-12;
  /// Multiplier on the rule-of-thumb bandwidth.
  double bandwidth_scale = 1.0;
};

struct Warp {
  /// Normal scores aligned with the input sample.
  std::vector<double> scores;
  WarpTable table;
  double bandwidth = 0.0;
  std::vector<std::string> warnings;
};

/// Normal-score transform of a sample and the lookup table for its inverse.
inline Warp build_warp(std::span<const double> sample, Fidelity source = Fidelity::high,
                       const WarpConfig &cfg = {}) {
  if (sample.size() < cfg.min_sample) {
    throw InvalidInput("warp needs at least " + std::to_string(cfg.min_sample) +
                       " values, got " + std::to_string(sample.size()));
  }
  if (cfg.grid_points < 2) {
    throw ConfigError("warp grid needs at least two points");
  }
  if (!(cfg.bandwidth_scale > 0.0) || !std::isfinite(cfg.bandwidth_scale)) {
    throw ConfigError("bandwidth_scale must be positive");
  }
  const KernelCDF cdf(sample, cfg.bandwidth_scale * estimate_bandwidth(sample));
  const double h = cdf.bandwidth();
  Warp w;
  w.bandwidth = h;
  if (sample.size() < cfg.advisory_sample) {
    w.warnings.push_back(to_string(source) + " warp built from " +
                         std::to_string(sample.size()) + " values; fewer than " +
                         std::to_string(cfg.advisory_sample) + " may distort the transform");
  }

  std::size_t clamped = 0;
  auto score = [&](double p) {
    if (p < cfg.p_clamp || p > 1.0 - cfg.p_clamp) {
      ++clamped;
      p = std::clamp(p, cfg.p_clamp, 1.0 - cfg.p_clamp);
    }
    return normal_quantile(p);
  };
  w.scores.reserve(sample.size());
  for (double y : sample) {
    w.scores.push_back(score(cdf(y)));
  }
  if (clamped > 0) {
    w.warnings.push_back(std::to_string(clamped) +
                         " probability levels clamped before the normal quantile");
  }

  // Anchors: distinct sample values plus the two grid ends, all on the CDF.
  const auto &sorted = cdf.sample();
  const double lo = sorted.front() - h;
  const double hi = sorted.back() + h;
  std::vector<double> az{lo};
  for (double v : sorted) {
    if (v != az.back()) {
      az.push_back(v);
    }
  }
  az.push_back(hi);
  std::vector<double> ap(az.size());
  for (std::size_t i = 0; i < az.size(); ++i) {
    ap[i] = cdf(az[i]);
  }

  const auto n = static_cast<std::size_t>(cfg.grid_points);
  auto &t = w.table;
  t.source = source;
  t.z_grid.resize(n);
  t.p_levels.resize(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = i + 1 == n ? hi
                                : lo + (hi - lo) * static_cast<double>(i) /
                                           static_cast<double>(n - 1);
    while (k + 2 < az.size() && az[k + 1] < z) {
      ++k;
    }
    const double frac = (z - az[k]) / (az[k + 1] - az[k]);
    t.z_grid[i] = z;
    t.p_levels[i] = ap[k] + std::clamp(frac, 0.0, 1.0) * (ap[k + 1] - ap[k]);
  }
  return w;
}

/// Back-transform latent values through the nearest probability level.
/// Ties go to the lowest index.
inline std::vector<double> inverse_warp(const WarpTable &table, std::span<const double> latent) {
  const auto &p = table.p_levels;
  std::vector<double> out;
  out.reserve(latent.size());
  for (double v : latent) {
    if (std::isnan(v)) {
      throw InvalidInput("latent value is NaN");
    }
    const double target = normal_cdf(v);
    auto it = std::lower_bound(p.begin(), p.end(), target);
    std::size_t idx;
    if (it == p.end()) {
      idx = p.size() - 1;
    } else if (it == p.begin()) {
      idx = 0;
    } else {
      const auto below = std::prev(it);
      idx = (target - *below) <= (*it - target) ? static_cast<std::size_t>(below - p.begin())
                                                : static_cast<std::size_t>(it - p.begin());
    }
    idx = static_cast<std::size_t>(std::lower_bound(p.begin(), p.end(), p[idx]) - p.begin());
    out.push_back(table.z_grid[idx]);
  }
  return out;
}

} // namespace wmfgp
