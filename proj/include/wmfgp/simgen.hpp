#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "wmfgp/errors.hpp"
#include "wmfgp/warp.hpp"

namespace wmfgp {

// ---------------------------------------------------------------- trend

struct Harmonic {
  double period = 24.0;
  double amplitude = 0.0;
  /// Radians; the component is amplitude * cos(2 pi t / period + phase).
  double phase = 0.0;
};

struct TrendSpec {
  double offset = 0.0;
  std::vector<Harmonic> harmonics;
  /// Polynomial drift in s = t / length: sum_k drift[k] * s^(k+1).
  std::vector<double> drift;
};

/// Parses "period:amplitude[:phase]" items separated by ';' or ','.
inline std::vector<Harmonic> parse_harmonics(const std::string &text) {
  std::vector<Harmonic> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ';')) {
    std::stringstream is(item);
    std::string sub;
    while (std::getline(is, sub, ',')) {
      sub.erase(0, sub.find_first_not_of(" \t"));
      sub.erase(sub.find_last_not_of(" \t") + 1);
      if (sub.empty()) {
        continue;
      }
      std::vector<double> parts;
      std::stringstream ps(sub);
      std::string num;
      while (std::getline(ps, num, ':')) {
        try {
          std::size_t used = 0;
          parts.push_back(std::stod(num, &used));
          if (num.find_first_not_of(" \t", used) != std::string::npos) {
            throw std::invalid_argument(num);
          }
        } catch (const std::logic_error &) {
          throw ConfigError("malformed harmonic '" + sub + "'");
        }
      }
      if (parts.size() < 2 || parts.size() > 3 || !(parts[0] > 0.0)) {
        throw ConfigError("harmonic '" + sub + "' must be period:amplitude[:phase] with period > 0");
      }
      out.push_back({parts[0], parts[1], parts.size() == 3 ? parts[2] : 0.0});
    }
  }
  return out;
}

inline std::vector<double> synth_trend(std::size_t length, const TrendSpec &spec) {
  if (length == 0) {
    throw InvalidInput("trend length must be at least 1");
  }
  for (const auto &h : spec.harmonics) {
    if (!(h.period > 0.0) || !std::isfinite(h.amplitude) || !std::isfinite(h.phase)) {
      throw ConfigError("harmonic needs a positive period and finite amplitude and phase");
    }
  }
  std::vector<double> out(length, spec.offset);
  const double n = static_cast<double>(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double tt = static_cast<double>(t);
    for (const auto &h : spec.harmonics) {
      out[t] += h.amplitude * std::cos(2.0 * std::numbers::pi * tt / h.period + h.phase);
    }
    double s = tt / n;
    double sk = s;
    for (double c : spec.drift) {
      out[t] += c * sk;
      sk *= s;
    }
  }
  return out;
}

/// Single-column CSV with a "trend" header.
inline void write_trend_csv(std::ostream &os, const std::vector<double> &trend) {
  os << "trend\n" << std::setprecision(17);
  for (double v : trend) {
    os << v << '\n';
  }
}

inline std::vector<double> read_trend_csv(std::istream &is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("trend", 0) != 0) {
    throw ConfigError("trend file must start with a 'trend' header");
  }
  std::vector<double> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") {
      continue;
    }
    try {
      out.push_back(std::stod(line));
    } catch (const std::logic_error &) {
      throw ConfigError("trend file row " + std::to_string(row) + " is not a number");
    }
  }
  if (out.empty()) {
    throw ConfigError("trend file has no values");
  }
  return out;
}

inline std::vector<double> load_trend_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open trend file " + path);
  }
  return read_trend_csv(in);
}

// ---------------------------------------------------------------- noise

struct CSNParams {
  double mu = 0.0;
  double sigma1 = 1.0;
  double gamma = 0.0;
  double nu = 2.0;
  double delta = 3.0;

  void validate() const {
    if (!(sigma1 > 0.0) || !(delta > 0.0) || !std::isfinite(mu) || !std::isfinite(gamma) ||
        !std::isfinite(nu) || !std::isfinite(sigma1) || !std::isfinite(delta)) {
      throw InvalidInput("CSN needs sigma1 > 0, delta > 0 and finite parameters");
    }
  }

  /// Acceptance probability of the Gaussian-envelope rejection sampler.
  double acceptance_rate() const {
    if (gamma == 0.0) {
      return 1.0;
    }
    return normal_cdf(-nu / std::sqrt(delta * delta + gamma * gamma * sigma1 * sigma1));
  }
};

/// Rejection sampler: x ~ N(mu, sigma1^2) accepted with probability
/// Phi((gamma (x - mu) - nu) / delta) divided by its supremum.
inline std::vector<double> sample_csn(const CSNParams &p, std::size_t n, std::uint64_t seed) {
  p.validate();
  if (n == 0) {
    throw InvalidInput("sample size must be at least 1");
  }
  if (p.acceptance_rate() < 1e-4) {
    throw ParameterPathology("CSN acceptance rate " + std::to_string(p.acceptance_rate()) +
                             " is below 1e-4");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> proposal(p.mu, p.sigma1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double sup = p.gamma == 0.0 ? normal_cdf(-p.nu / p.delta) : 1.0;
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    const double x = proposal(rng);
    const double accept = normal_cdf((p.gamma * (x - p.mu) - p.nu) / p.delta) / sup;
    if (unif(rng) < accept) {
      out.push_back(x);
    }
  }
  return out;
}

inline double weibull_mean(double scale, double shape) {
  return scale * std::tgamma(1.0 + 1.0 / shape);
}

/// Inverse-CDF draws scale * (-ln U)^(1/shape), optionally centred by the
/// analytic mean.
inline std::vector<double> sample_weibull(double scale, double shape, bool center, std::size_t n,
                                          std::uint64_t seed) {
  if (!(scale > 0.0) || !(shape > 0.0) || !std::isfinite(scale) || !std::isfinite(shape)) {
    throw InvalidInput("Weibull needs positive finite scale and shape");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double shift = center ? weibull_mean(scale, shape) : 0.0;
  std::vector<double> out(n);
  for (auto &v : out) {
    const double u = 1.0 - unif(rng); // (0, 1]
    v = scale * std::pow(-std::log(u), 1.0 / shape) - shift;
  }
  return out;
}

enum class NoiseKind { weibull, csn, normal };

inline std::string to_string(NoiseKind k) {
  switch (k) {
  case NoiseKind::weibull:
    return "weibull";
  case NoiseKind::csn:
    return "csn";
  default:
    return "normal";
  }
}

inline NoiseKind parse_noise_kind(const std::string &s) {
  if (s == "weibull") {
    return NoiseKind::weibull;
  }
  if (s == "csn") {
    return NoiseKind::csn;
  }
  if (s == "normal") {
    return NoiseKind::normal;
  }
  throw ConfigError("unknown noise distribution '" + s + "' (weibull, csn, normal)");
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::normal;
  double scale = 1.0;
  double shape = 1.0;
  bool center = false;
  CSNParams csn;
  double mean = 0.0;
  double sd = 1.0;

  std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
    switch (kind) {
    case NoiseKind::weibull:
      return sample_weibull(scale, shape, center, n, seed);
    case NoiseKind::csn:
      return sample_csn(csn, n, seed);
    default: {
      if (!(sd >= 0.0)) {
        throw InvalidInput("normal noise needs sd >= 0");
      }
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> nd(0.0, 1.0);
      std::vector<double> out(n);
      for (auto &v : out) {
        v = mean + sd * nd(rng);
      }
      return out;
    }
    }
  }
};

struct SeriesPair {
  std::vector<double> y_l;
  std::vector<double> y_h;
};

/// y_L = T + w_L, y_H = T + w_H.
inline SeriesPair build_pair(std::span<const double> trend, std::span<const double> w_l,
                             std::span<const double> w_h) {
  if (trend.size() != w_l.size() || trend.size() != w_h.size()) {
    throw InvalidInput("trend and noise series differ in length");
  }
  SeriesPair p{std::vector<double>(trend.size()), std::vector<double>(trend.size())};
  for (std::size_t i = 0; i < trend.size(); ++i) {
    p.y_l[i] = trend[i] + w_l[i];
    p.y_h[i] = trend[i] + w_h[i];
  }
  return p;
}

// ---------------------------------------------------------------- masks

/// Exactly round(n * fraction) observed entries at uniformly random positions.
inline std::vector<bool> random_missingness_mask(std::size_t n, double hf_fraction,
                                                 std::uint64_t seed) {
  if (!(hf_fraction > 0.0) || hf_fraction > 1.0) {
    throw ConfigError("HF fraction must lie in (0, 1]");
  }
  const auto keep = static_cast<std::size_t>(std::llround(static_cast<double>(n) * hf_fraction));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<bool> observed(n, false);
  for (std::size_t i = 0; i < keep; ++i) {
    observed[idx[i]] = true;
  }
  return observed;
}

struct GapMask {
  std::vector<bool> observed;
  std::size_t start = 0;
  std::size_t length = 0;
};

/// One contiguous missing run of `gap_length` at a uniformly random start.
inline GapMask structural_gap_mask(std::size_t n, std::size_t gap_length, std::uint64_t seed) {
  if (gap_length == 0 || gap_length >= n) {
    throw ConfigError("gap length " + std::to_string(gap_length) +
                      " must be positive and shorter than the series (" + std::to_string(n) +
                      ")");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - gap_length);
  GapMask m;
  m.start = pick(rng);
  m.length = gap_length;
  m.observed.assign(n, true);
  std::fill(m.observed.begin() + static_cast<std::ptrdiff_t>(m.start),
            m.observed.begin() + static_cast<std::ptrdiff_t>(m.start + gap_length), false);
  return m;
}

// ---------------------------------------------------------------- scenarios

enum class SkewLevel { low, high };

inline std::string to_string(SkewLevel s) { return s == SkewLevel::low ? "low" : "high"; }

/// Noise pair for the published skewness scenarios. CSN uses nu = 2 and
/// delta = 3 for both errors; Weibull w_H is centred and w_L is not.
inline std::pair<NoiseSpec, NoiseSpec> scenario_noise(NoiseKind kind, SkewLevel level) {
  NoiseSpec wl;
  NoiseSpec wh;
  wl.kind = wh.kind = kind;
  if (kind == NoiseKind::weibull) {
    wl.scale = 2.0;
    wl.shape = level == SkewLevel::high ? 0.8 : 2.3;
    wl.center = false;
    wh.scale = 0.5;
    wh.shape = level == SkewLevel::high ? 0.8 : 2.0;
    wh.center = true;
  } else if (kind == NoiseKind::csn) {
    wh.csn = {-0.25, level == SkewLevel::high ? 0.8 : 0.04, level == SkewLevel::high ? 50.0 : 4.0,
              2.0, 3.0};
    wl.csn = {-0.5, level == SkewLevel::high ? 2.4 : 0.8, level == SkewLevel::high ? 50.0 : 4.0,
              2.0, 3.0};
  } else {
    wl.sd = 1.0;
    wh.sd = 0.3;
  }
  return {wl, wh};
}

/// Wind-like default: 5 m/s level with daily, synoptic and weekly cycles.
inline TrendSpec default_trend() {
  return {5.0, {{24.0, 1.2, 0.0}, {72.0, 1.5, 0.0}, {168.0, 1.0, 0.0}}, {}};
}

struct ScenarioConfig {
  NoiseKind distribution = NoiseKind::weibull;
  SkewLevel skew = SkewLevel::high;
  NoiseSpec w_l;
  NoiseSpec w_h;
  std::size_t n_l = 500;
  double hf_fraction = 0.1;
  std::size_t replications = 50;
  std::uint64_t seed = 1;
  TrendSpec trend = default_trend();
  /// Draw fresh harmonic phases per replication.
  bool random_phase = true;
  /// Overrides the harmonic trend when non-empty.
  std::string trend_file;
  /// Structural experiment settings.
  std::vector<std::size_t> gap_lengths{24, 96, 192};
  std::size_t context_hours = 168;
  /// Optimizer effort per fit.
  int starts = 8;
  int local_searches = 1;
  /// Worker threads (0 = hardware concurrency).
  unsigned threads = 0;

  void validate() const {
    if (!(hf_fraction > 0.0) || hf_fraction > 1.0) {
      throw ConfigError("hf_fraction must lie in (0, 1]");
    }
    if (replications < 1) {
      throw ConfigError("replications must be at least 1");
    }
    if (n_l < 2) {
      throw ConfigError("n_l must be at least 2");
    }
    if (starts < 1 || local_searches < 1) {
      throw ConfigError("starts and local_searches must be at least 1");
    }
    for (auto g : gap_lengths) {
      if (g == 0) {
        throw ConfigError("gap lengths must be positive");
      }
    }
  }

  static ScenarioConfig defaults(NoiseKind kind, SkewLevel level) {
    ScenarioConfig c;
    c.distribution = kind;
    c.skew = level;
    std::tie(c.w_l, c.w_h) = scenario_noise(kind, level);
    return c;
  }
};

namespace detail {

template <class T>
T get_or(const boost::property_tree::ptree &pt, const std::string &key, T fallback) {
  if (!pt.get_child_optional(key)) {
    return fallback;
  }
  try {
    return pt.get<T>(key);
  } catch (const boost::property_tree::ptree_error &) {
    throw ConfigError("config key '" + key + "' has an invalid value");
  }
}

inline void read_noise(const boost::property_tree::ptree &pt, const std::string &section,
                       NoiseSpec &n) {
  const auto kind = get_or<std::string>(pt, section + ".distribution", "");
  if (!kind.empty()) {
    n.kind = parse_noise_kind(kind);
  }
  n.scale = get_or(pt, section + ".scale", n.scale);
  n.shape = get_or(pt, section + ".shape", n.shape);
  n.center = get_or(pt, section + ".center", n.center);
  n.csn.mu = get_or(pt, section + ".mu", n.csn.mu);
  n.csn.sigma1 = get_or(pt, section + ".sigma1", n.csn.sigma1);
  n.csn.gamma = get_or(pt, section + ".gamma", n.csn.gamma);
  n.csn.nu = get_or(pt, section + ".nu", n.csn.nu);
  n.csn.delta = get_or(pt, section + ".delta", n.csn.delta);
  n.mean = get_or(pt, section + ".mean", n.mean);
  n.sd = get_or(pt, section + ".sd", n.sd);
}

inline std::vector<std::size_t> parse_sizes(const std::string &text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const long v = std::stol(item);
      if (v <= 0) {
        throw std::invalid_argument(item);
      }
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error &) {
      throw ConfigError("invalid length '" + item + "' in list");
    }
  }
  return out;
}

} // namespace detail

/// Reads an INI-style key-value scenario. Top-level keys: distribution,
/// skew, n_l, hf_fraction, replications, seed, gap_lengths, context_hours,
/// starts, local_searches, threads. Sections [w_l] and [w_h] override noise
/// parameters; [trend] takes offset, harmonics, drift, random_phase, file.
inline ScenarioConfig parse_scenario(std::istream &is) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  const NoiseKind kind = parse_noise_kind(detail::get_or<std::string>(pt, "distribution", "weibull"));
  const auto skew = detail::get_or<std::string>(pt, "skew", "high");
  if (skew != "low" && skew != "high") {
    throw ConfigError("skew must be 'low' or 'high'");
  }
  ScenarioConfig c = ScenarioConfig::defaults(kind, skew == "low" ? SkewLevel::low : SkewLevel::high);
  const long n_l = detail::get_or<long>(pt, "n_l", static_cast<long>(c.n_l));
  const long reps = detail::get_or<long>(pt, "replications", static_cast<long>(c.replications));
  if (n_l < 2 || reps < 1) {
    throw ConfigError("n_l must be >= 2 and replications >= 1");
  }
  c.n_l = static_cast<std::size_t>(n_l);
  c.replications = static_cast<std::size_t>(reps);
  c.hf_fraction = detail::get_or(pt, "hf_fraction", c.hf_fraction);
  c.seed = detail::get_or<std::uint64_t>(pt, "seed", c.seed);
  const auto gaps = detail::get_or<std::string>(pt, "gap_lengths", "");
  if (!gaps.empty()) {
    c.gap_lengths = detail::parse_sizes(gaps);
  }
  c.context_hours = detail::get_or<std::size_t>(pt, "context_hours", c.context_hours);
  c.starts = detail::get_or(pt, "starts", c.starts);
  c.local_searches = detail::get_or(pt, "local_searches", c.local_searches);
  c.threads = detail::get_or(pt, "threads", c.threads);
  detail::read_noise(pt, "w_l", c.w_l);
  detail::read_noise(pt, "w_h", c.w_h);
  c.trend.offset = detail::get_or(pt, "trend.offset", c.trend.offset);
  const auto harmonics = detail::get_or<std::string>(pt, "trend.harmonics", "");
  if (!harmonics.empty()) {
    c.trend.harmonics = parse_harmonics(harmonics);
  }
  const auto drift = detail::get_or<std::string>(pt, "trend.drift", "");
  if (!drift.empty()) {
    c.trend.drift.clear();
    std::stringstream ss(drift);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        c.trend.drift.push_back(std::stod(item));
      } catch (const std::logic_error &) {
        throw ConfigError("invalid drift coefficient '" + item + "'");
      }
    }
  }
  c.random_phase = detail::get_or(pt, "trend.random_phase", c.random_phase);
  c.trend_file = detail::get_or<std::string>(pt, "trend.file", "");
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  return parse_scenario(in);
}

/// Key-value echo of a scenario, readable by `parse_scenario`.
inline void write_scenario(std::ostream &os, const ScenarioConfig &c) {
  os << std::setprecision(17);
  os << "distribution = " << to_string(c.distribution) << '\n'
     << "skew = " << to_string(c.skew) << '\n'
     << "n_l = " << c.n_l << '\n'
     << "hf_fraction = " << c.hf_fraction << '\n'
     << "replications = " << c.replications << '\n'
     << "seed = " << c.seed << '\n'
     << "gap_lengths = ";
  for (std::size_t i = 0; i < c.gap_lengths.size(); ++i) {
    os << (i ? "," : "") << c.gap_lengths[i];
  }
  os << '\n'
     << "context_hours = " << c.context_hours << '\n'
     << "starts = " << c.starts << '\n'
     << "local_searches = " << c.local_searches << '\n'
     << "threads = " << c.threads << '\n';
  for (const auto &[name, n] : {std::pair{"w_l", c.w_l}, std::pair{"w_h", c.w_h}}) {
    os << '[' << name << "]\n"
       << "distribution = " << to_string(n.kind) << '\n'
       << "scale = " << n.scale << "\nshape = " << n.shape
       << "\ncenter = " << (n.center ? "true" : "false") << '\n'
       << "mu = " << n.csn.mu << "\nsigma1 = " << n.csn.sigma1 << "\ngamma = " << n.csn.gamma
       << "\nnu = " << n.csn.nu << "\ndelta = " << n.csn.delta << '\n'
       << "mean = " << n.mean << "\nsd = " << n.sd << '\n';
  }
  os << "[trend]\noffset = " << c.trend.offset << "\nharmonics = ";
  for (std::size_t i = 0; i < c.trend.harmonics.size(); ++i) {
    const auto &h = c.trend.harmonics[i];
    os << (i ? ";" : "") << h.period << ':' << h.amplitude << ':' << h.phase;
  }
  os << "\ndrift = ";
  for (std::size_t i = 0; i < c.trend.drift.size(); ++i) {
    os << (i ? "," : "") << c.trend.drift[i];
  }
  os << "\nrandom_phase = " << (c.random_phase ? "true" : "false") << '\n';
  if (!c.trend_file.empty()) {
    os << "file = " << c.trend_file << '\n';
  }
}

} // namespace wmfgp
