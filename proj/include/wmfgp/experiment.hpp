#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "wmfgp/metrics.hpp"
#include "wmfgp/pipelines.hpp"
#include "wmfgp/simgen.hpp"

namespace wmfgp {

/// splitmix64 mix of (base, a, b); decorrelates per-replication streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// One model scored on one replication.
struct ReplicationRow {
  std::string experiment;
  std::size_t gap = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::string model;
  bool ok = false;
  std::string error;
  PointMetrics metrics;
  std::size_t covered = 0;
  std::size_t n_points = 0;
  double surrogate = std::numeric_limits<double>::quiet_NaN();
  double error_reduction = std::numeric_limits<double>::quiet_NaN();
};

struct SummaryRow {
  std::string experiment;
  std::size_t gap = 0;
  std::string model;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double median_mae = std::numeric_limits<double>::quiet_NaN();
  double sd_mae = std::numeric_limits<double>::quiet_NaN();
  double median_bias = std::numeric_limits<double>::quiet_NaN();
  double median_variance = std::numeric_limits<double>::quiet_NaN();
  /// Pooled over replications.
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double median_surrogate = std::numeric_limits<double>::quiet_NaN();
  double median_error_reduction = std::numeric_limits<double>::quiet_NaN();
  /// Fraction of replications where the model MAE is below the surrogate.
  double beats_surrogate = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
  std::vector<ReplicationRow> rows;
  std::vector<SummaryRow> summary;

  const SummaryRow *find(const std::string &model, std::size_t gap = 0) const {
    for (const auto &s : summary) {
      if (s.model == model && s.gap == gap) {
        return &s;
      }
    }
    return nullptr;
  }

  void write_replications_csv(std::ostream &os) const {
    os << "experiment,gap,rep,seed,model,status,mae,bias,variance,coverage,n_points,"
          "surrogate,error_reduction,error\n"
       << std::setprecision(10);
    for (const auto &r : rows) {
      os << r.experiment << ',' << r.gap << ',' << r.rep << ',' << r.seed << ',' << r.model
         << ',' << (r.ok ? "ok" : "failed") << ',';
      if (r.ok) {
        os << r.metrics.mae << ',' << r.metrics.bias << ',' << r.metrics.variance << ',';
        if (r.n_points > 0 && r.covered <= r.n_points) {
          os << static_cast<double>(r.covered) / static_cast<double>(r.n_points);
        }
        os << ',' << r.n_points << ',';
        if (!std::isnan(r.surrogate)) {
          os << r.surrogate;
        }
        os << ',';
        if (!std::isnan(r.error_reduction)) {
          os << r.error_reduction;
        }
      } else {
        os << ",,,,,,";
      }
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << ',' << msg << '\n';
    }
  }

  void write_summary_csv(std::ostream &os) const {
    os << "experiment,gap,model,n_ok,n_failed,median_mae,sd_mae,median_bias,median_variance,"
          "coverage,median_surrogate,median_error_reduction,beats_surrogate\n"
       << std::setprecision(10);
    auto opt = [&](double v) -> std::ostream & {
      if (!std::isnan(v)) {
        os << v;
      }
      return os;
    };
    for (const auto &s : summary) {
      os << s.experiment << ',' << s.gap << ',' << s.model << ',' << s.n_ok << ','
         << s.n_failed << ',';
      opt(s.median_mae) << ',';
      opt(s.sd_mae) << ',';
      opt(s.median_bias) << ',';
      opt(s.median_variance) << ',';
      opt(s.coverage) << ',';
      opt(s.median_surrogate) << ',';
      opt(s.median_error_reduction) << ',';
      opt(s.beats_surrogate) << '\n';
    }
  }
};

/// Medians and sds per (experiment, gap, model), in first-seen order.
inline std::vector<SummaryRow> summarize(const std::vector<ReplicationRow> &rows) {
  std::vector<SummaryRow> out;
  std::map<std::tuple<std::string, std::size_t, std::string>, std::size_t> index;
  struct Acc {
    std::vector<double> mae, bias, var, surrogate, reduction;
    std::size_t covered = 0, points = 0, wins = 0, compared = 0;
  };
  std::vector<Acc> acc;
  for (const auto &r : rows) {
    const auto key = std::make_tuple(r.experiment, r.gap, r.model);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      SummaryRow s;
      s.experiment = r.experiment;
      s.gap = r.gap;
      s.model = r.model;
      out.push_back(s);
      acc.emplace_back();
    }
    auto &s = out[it->second];
    auto &a = acc[it->second];
    if (!r.ok) {
      ++s.n_failed;
      continue;
    }
    ++s.n_ok;
    a.mae.push_back(r.metrics.mae);
    a.bias.push_back(r.metrics.bias);
    a.var.push_back(r.metrics.variance);
    a.covered += r.covered;
    a.points += r.n_points;
    if (!std::isnan(r.surrogate)) {
      a.surrogate.push_back(r.surrogate);
      ++a.compared;
      a.wins += r.metrics.mae < r.surrogate ? 1 : 0;
    }
    if (!std::isnan(r.error_reduction)) {
      a.reduction.push_back(r.error_reduction);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto &s = out[i];
    const auto &a = acc[i];
    s.median_mae = median(a.mae);
    s.sd_mae = sample_sd(a.mae);
    s.median_bias = median(a.bias);
    s.median_variance = median(a.var);
    if (a.points > 0) {
      s.coverage = static_cast<double>(a.covered) / static_cast<double>(a.points);
    }
    s.median_surrogate = median(a.surrogate);
    s.median_error_reduction = median(a.reduction);
    if (a.compared > 0) {
      s.beats_surrogate = static_cast<double>(a.wins) / static_cast<double>(a.compared);
    }
  }
  return out;
}

/// Runs `job(i)` for i in [0, n) on `threads` workers. Results must be
/// written to per-index slots; the order of execution is unspecified.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)> &job) {
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      job(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        job(i);
      }
    });
  }
  for (auto &th : pool) {
    th.join();
  }
}

namespace detail {

inline FillConfig fill_config(const ScenarioConfig &c, std::uint64_t seed) {
  FillConfig f;
  f.mfgp.optimizer.starts = c.starts;
  f.mfgp.optimizer.local_searches = c.local_searches;
  f.mfgp.optimizer.seed = seed;
  f.gp.optimizer = f.mfgp.optimizer;
  return f;
}

inline std::vector<double> scenario_trend(const ScenarioConfig &c, std::size_t n,
                                          std::uint64_t seed) {
  if (!c.trend_file.empty()) {
    auto t = load_trend_file(c.trend_file);
    if (t.size() < n) {
      throw ConfigError("trend file has " + std::to_string(t.size()) + " values, need " +
                        std::to_string(n));
    }
    t.resize(n);
    return t;
  }
  TrendSpec spec = c.trend;
  if (c.random_phase) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    for (auto &h : spec.harmonics) {
      h.phase = ph(rng);
    }
  }
  return synth_trend(n, spec);
}

inline ReplicationRow score(const ReplicationRow &base, const std::string &model,
                            const std::vector<double> &truth,
                            const std::function<FillResult()> &fill) {
  ReplicationRow r = base;
  r.model = model;
  try {
    const FillResult f = fill();
    r.metrics = eval_point_metrics(truth, f.mean);
    r.n_points = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
      r.covered += f.lower[i] <= truth[i] && truth[i] <= f.upper[i] ? 1 : 0;
    }
    if (!std::isfinite(r.metrics.mae)) {
      throw NumericalFailure("non-finite predictions", {});
    }
    r.ok = true;
  } catch (const Error &e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

} // namespace detail

inline const std::vector<std::string> &random_models() {
  static const std::vector<std::string> m{"GP", "WGP", "MFGP", "WMFGP", "BCMF"};
  return m;
}

/// One replication of the randomized-missingness design: LF fully observed,
/// HF observed at round(n_l * hf_fraction) random positions and scored on the
/// rest against the noisy HF values.
inline std::vector<ReplicationRow> run_random_replication(const ScenarioConfig &c,
                                                          std::size_t rep) {
  const std::uint64_t seed = derive_seed(c.seed, rep);
  const std::size_t n = c.n_l;
  const auto trend = detail::scenario_trend(c, n, derive_seed(seed, 1));
  const auto w_l = c.w_l.sample(n, derive_seed(seed, 2));
  const auto w_h = c.w_h.sample(n, derive_seed(seed, 3));
  const auto pair = build_pair(trend, w_l, w_h);
  const auto mask = random_missingness_mask(n, c.hf_fraction, derive_seed(seed, 4));
  NestedDesign d;
  std::vector<double> query, truth;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    d.x_l.push_back(x);
    d.y_l.push_back(pair.y_l[i]);
    if (mask[i]) {
      d.x_h.push_back(x);
      d.y_h.push_back(pair.y_h[i]);
    } else {
      query.push_back(x);
      truth.push_back(pair.y_h[i]);
    }
  }
  ReplicationRow base;
  base.experiment = "random";
  base.rep = rep;
  base.seed = seed;
  std::vector<ReplicationRow> out;
  if (query.empty()) {
    base.error = "no held-out HF points";
    for (const auto &m : random_models()) {
      base.model = m;
      out.push_back(base);
    }
    return out;
  }
  const FillConfig f = detail::fill_config(c, derive_seed(seed, 5));
  out.push_back(detail::score(base, "GP", truth, [&] { return gp_fill(d.x_h, d.y_h, query, f); }));
  out.push_back(
      detail::score(base, "WGP", truth, [&] { return wgp_fill(d.x_h, d.y_h, query, f); }));
  out.push_back(detail::score(base, "MFGP", truth, [&] { return mfgp_fill(d, query, f); }));
  out.push_back(detail::score(base, "WMFGP", truth, [&] { return wmfgp_fill(d, query, f); }));
  out.push_back(detail::score(base, "BCMF", truth, [&] { return bcmf_fill(d, query, f); }));
  return out;
}

/// Replications run in parallel; rows are ordered by replication then model,
/// so reports are identical for any thread count.
inline ExperimentReport run_random_experiment(const ScenarioConfig &c) {
  c.validate();
  std::vector<std::vector<ReplicationRow>> per(c.replications);
  parallel_for(c.replications, c.threads,
               [&](std::size_t r) { per[r] = run_random_replication(c, r); });
  ExperimentReport rep;
  for (auto &v : per) {
    rep.rows.insert(rep.rows.end(), v.begin(), v.end());
  }
  rep.summary = summarize(rep.rows);
  return rep;
}

// ---------------------------------------------------------------- structural

/// Synthetic station pair for the structural-gap experiment. Both series
/// are Weibull marginals of correlated latent Gaussian processes: a shared
/// daily cycle and AR(1) component, plus station-specific AR(1) parts.
struct StationPairSpec {
  std::size_t length = 8760;
  double daily_amplitude = 0.6;
  double shared_ar = 0.9;
  double shared_sd = 1.0;
  /// Number of AR(1) filter passes; more passes give smoother paths.
  int shared_passes = 2;
  double local_ar = 0.3;
  double hf_local_sd = 0.15;
  double lf_local_sd = 0.25;
  double hf_scale = 5.0;
  double hf_shape = 1.5;
  double lf_scale = 3.5;
  double lf_shape = 2.5;
  /// Location of the LF marginal (three-parameter Weibull).
  double lf_offset = 1.0;
};

/// Reads the optional [station_pair] section of a scenario file; absent keys
/// keep their defaults.
inline StationPairSpec parse_station_pair(std::istream &is) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  StationPairSpec s;
  const std::string p = "station_pair.";
  s.length = detail::get_or(pt, p + "length", s.length);
  s.daily_amplitude = detail::get_or(pt, p + "daily_amplitude", s.daily_amplitude);
  s.shared_ar = detail::get_or(pt, p + "shared_ar", s.shared_ar);
  s.shared_sd = detail::get_or(pt, p + "shared_sd", s.shared_sd);
  s.shared_passes = detail::get_or(pt, p + "shared_passes", s.shared_passes);
  s.local_ar = detail::get_or(pt, p + "local_ar", s.local_ar);
  s.hf_local_sd = detail::get_or(pt, p + "hf_local_sd", s.hf_local_sd);
  s.lf_local_sd = detail::get_or(pt, p + "lf_local_sd", s.lf_local_sd);
  s.hf_scale = detail::get_or(pt, p + "hf_scale", s.hf_scale);
  s.hf_shape = detail::get_or(pt, p + "hf_shape", s.hf_shape);
  s.lf_scale = detail::get_or(pt, p + "lf_scale", s.lf_scale);
  s.lf_shape = detail::get_or(pt, p + "lf_shape", s.lf_shape);
  s.lf_offset = detail::get_or(pt, p + "lf_offset", s.lf_offset);
  if (s.shared_passes < 1 || s.hf_scale <= 0.0 || s.hf_shape <= 0.0 || s.lf_scale <= 0.0 ||
      s.lf_shape <= 0.0 || s.shared_sd <= 0.0 || s.hf_local_sd < 0.0 || s.lf_local_sd < 0.0) {
    throw ConfigError("invalid [station_pair] parameters");
  }
  return s;
}

inline void write_station_pair(std::ostream &os, const StationPairSpec &s) {
  os << std::setprecision(17) << "[station_pair]\n"
     << "length = " << s.length << "\ndaily_amplitude = " << s.daily_amplitude
     << "\nshared_ar = " << s.shared_ar << "\nshared_sd = " << s.shared_sd
     << "\nshared_passes = " << s.shared_passes << "\nlocal_ar = " << s.local_ar
     << "\nhf_local_sd = " << s.hf_local_sd << "\nlf_local_sd = " << s.lf_local_sd
     << "\nhf_scale = " << s.hf_scale << "\nhf_shape = " << s.hf_shape
     << "\nlf_scale = " << s.lf_scale << "\nlf_shape = " << s.lf_shape
     << "\nlf_offset = " << s.lf_offset << '\n';
}

inline SeriesPair synth_station_pair(const StationPairSpec &s, std::uint64_t seed) {
  if (s.length < 2 || !(std::abs(s.shared_ar) < 1.0) || !(std::abs(s.local_ar) < 1.0)) {
    throw ConfigError("station pair needs length >= 2 and |ar| < 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  const double phase = ph(rng);
  auto ar = [&](double phi, double sd) {
    std::vector<double> v(s.length);
    const double innov = sd * std::sqrt(1.0 - phi * phi);
    v[0] = sd * nd(rng);
    for (std::size_t t = 1; t < s.length; ++t) {
      v[t] = phi * v[t - 1] + innov * nd(rng);
    }
    return v;
  };
  // Shared weather signal: AR(1) noise passed through further AR(1) filters,
  // which smooths the paths, then rescaled to shared_sd.
  auto shared = ar(s.shared_ar, 1.0);
  for (int pass = 1; pass < s.shared_passes; ++pass) {
    for (std::size_t t = 1; t < s.length; ++t) {
      shared[t] = s.shared_ar * shared[t - 1] + (1.0 - s.shared_ar) * shared[t];
    }
  }
  {
    double m = 0.0;
    for (double v : shared) {
      m += v;
    }
    m /= static_cast<double>(s.length);
    double ss = 0.0;
    for (double v : shared) {
      ss += (v - m) * (v - m);
    }
    const double k = s.shared_sd / std::sqrt(ss / static_cast<double>(s.length));
    for (auto &v : shared) {
      v = (v - m) * k;
    }
  }
  const auto eh = ar(s.local_ar, s.hf_local_sd);
  const auto el = ar(s.local_ar, s.lf_local_sd);
  const double cyc_var = 0.5 * s.daily_amplitude * s.daily_amplitude;
  const double sd_h =
      std::sqrt(cyc_var + s.shared_sd * s.shared_sd + s.hf_local_sd * s.hf_local_sd);
  const double sd_l =
      std::sqrt(cyc_var + s.shared_sd * s.shared_sd + s.lf_local_sd * s.lf_local_sd);
  auto weibull_q = [](double z, double scale, double shape) {
    const double upper = std::max(0.5 * std::erfc(z / std::numbers::sqrt2), 1e-300);
    return scale * std::pow(-std::log(upper), 1.0 / shape);
  };
  SeriesPair p{std::vector<double>(s.length), std::vector<double>(s.length)};
  for (std::size_t t = 0; t < s.length; ++t) {
    const double cyc =
        s.daily_amplitude * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0 + phase);
    p.y_h[t] = weibull_q((cyc + shared[t] + eh[t]) / sd_h, s.hf_scale, s.hf_shape);
    p.y_l[t] = s.lf_offset + weibull_q((cyc + shared[t] + el[t]) / sd_l, s.lf_scale, s.lf_shape);
  }
  return p;
}

inline const std::vector<std::string> &structural_models() {
  static const std::vector<std::string> m{"GP", "MFGP", "WMFGP", "SI"};
  return m;
}

namespace detail {

/// Gap placement, window, fits and scoring on one fully observed pair.
inline std::vector<ReplicationRow> structural_on_pair(const ScenarioConfig &c,
                                                      const SeriesPair &pair, std::size_t gap,
                                                      std::size_t rep, std::uint64_t seed) {
  const std::size_t length = pair.y_h.size();
  const GapMask mask = structural_gap_mask(length, gap, derive_seed(seed, 2));
  const std::size_t lo = mask.start > c.context_hours ? mask.start - c.context_hours : 0;
  const std::size_t hi = std::min(length, mask.start + gap + c.context_hours);
  NestedDesign d;
  std::vector<double> query, truth, lf_gap, series;
  std::vector<std::size_t> targets;
  for (std::size_t i = lo; i < hi; ++i) {
    const double x = static_cast<double>(i - lo);
    d.x_l.push_back(x);
    d.y_l.push_back(pair.y_l[i]);
    if (mask.observed[i]) {
      d.x_h.push_back(x);
      d.y_h.push_back(pair.y_h[i]);
      series.push_back(pair.y_h[i]);
    } else {
      query.push_back(x);
      truth.push_back(pair.y_h[i]);
      lf_gap.push_back(pair.y_l[i]);
      targets.push_back(i - lo);
      series.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  ReplicationRow base;
  base.experiment = "structural";
  base.gap = gap;
  base.rep = rep;
  base.seed = seed;
  base.surrogate = surrogate_discrepancy(truth, lf_gap);
  const FillConfig f = detail::fill_config(c, derive_seed(seed, 3));
  std::vector<ReplicationRow> out;
  out.push_back(detail::score(base, "GP", truth, [&] { return gp_fill(d.x_h, d.y_h, query, f); }));
  out.push_back(detail::score(base, "MFGP", truth, [&] { return mfgp_fill(d, query, f); }));
  out.push_back(detail::score(base, "WMFGP", truth, [&] { return wmfgp_fill(d, query, f); }));
  out.push_back(detail::score(base, "SI", truth, [&] { return simple_impute(series, targets); }));
  // LF read as the HF value; it has no interval, so it stays out of coverage.
  ReplicationRow sur = base;
  sur.model = "Surrogate";
  sur.metrics = eval_point_metrics(truth, lf_gap);
  sur.ok = true;
  out.push_back(sur);
  for (auto &r : out) {
    if (r.ok) {
      try {
        r.error_reduction = error_reduction(r.metrics.mae, r.surrogate);
      } catch (const UndefinedReduction &) {
      }
    }
  }
  return out;
}

} // namespace detail

/// One structural-gap replication on a synthetic pair: a contiguous HF gap
/// inside a window of `context_hours` on each side, LF observed throughout.
inline std::vector<ReplicationRow> run_structural_replication(const ScenarioConfig &c,
                                                              const StationPairSpec &spec,
                                                              std::size_t gap,
                                                              std::size_t rep) {
  const std::uint64_t seed = derive_seed(c.seed, gap, rep + 1);
  return detail::structural_on_pair(c, synth_station_pair(spec, derive_seed(seed, 1)), gap, rep,
                                    seed);
}

inline ExperimentReport run_structural_experiment(const ScenarioConfig &c,
                                                  const StationPairSpec &spec = {}) {
  c.validate();
  for (auto g : c.gap_lengths) {
    if (g >= spec.length) {
      throw ConfigError("gap length " + std::to_string(g) + " exceeds the series length");
    }
  }
  const std::size_t per_gap = c.replications;
  const std::size_t total = per_gap * c.gap_lengths.size();
  std::vector<std::vector<ReplicationRow>> per(total);
  parallel_for(total, c.threads, [&](std::size_t k) {
    per[k] = run_structural_replication(c, spec, c.gap_lengths[k / per_gap], k % per_gap);
  });
  ExperimentReport rep;
  for (auto &v : per) {
    rep.rows.insert(rep.rows.end(), v.begin(), v.end());
  }
  rep.summary = summarize(rep.rows);
  return rep;
}

/// Same design on a pool of observed station pairs; each replication draws
/// one pair uniformly. Pairs with any missing value are dropped up front.
inline ExperimentReport run_structural_experiment(const ScenarioConfig &c,
                                                  const std::vector<SeriesPair> &pool) {
  c.validate();
  std::vector<const SeriesPair *> usable;
  for (const auto &p : pool) {
    if (p.y_h.size() != p.y_l.size()) {
      throw ConfigError("station pair series differ in length");
    }
    const auto missing = [](double v) { return std::isnan(v); };
    if (std::none_of(p.y_h.begin(), p.y_h.end(), missing) &&
        std::none_of(p.y_l.begin(), p.y_l.end(), missing)) {
      usable.push_back(&p);
    }
  }
  if (usable.empty()) {
    throw ConfigError("no gap-free station pair in the pool");
  }
  for (auto g : c.gap_lengths) {
    for (const auto *p : usable) {
      if (g >= p->y_h.size()) {
        throw ConfigError("gap length " + std::to_string(g) + " exceeds a pool series length");
      }
    }
  }
  const std::size_t per_gap = c.replications;
  const std::size_t total = per_gap * c.gap_lengths.size();
  std::vector<std::vector<ReplicationRow>> per(total);
  parallel_for(total, c.threads, [&](std::size_t k) {
    const std::size_t gap = c.gap_lengths[k / per_gap];
    const std::size_t r = k % per_gap;
    const std::uint64_t seed = derive_seed(c.seed, gap, r + 1);
    const std::size_t pick = derive_seed(seed, 1) % usable.size();
    per[k] = detail::structural_on_pair(c, *usable[pick], gap, r, seed);
  });
  ExperimentReport rep;
  for (auto &v : per) {
    rep.rows.insert(rep.rows.end(), v.begin(), v.end());
  }
  rep.summary = summarize(rep.rows);
  return rep;
}

} // namespace wmfgp
