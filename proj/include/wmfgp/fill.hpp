#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmfgp/errors.hpp"
#include "wmfgp/ingest.hpp"
#include "wmfgp/pipelines.hpp"

namespace wmfgp {

inline const std::vector<std::string> &fill_models() {
  static const std::vector<std::string> m{"GP", "WGP", "MFGP", "WMFGP", "BCMF", "SI"};
  return m;
}

/// Case-insensitive model tag lookup; returns the canonical tag.
inline std::string parse_model_tag(const std::string &tag) {
  std::string up = tag;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  for (const auto &m : fill_models()) {
    if (m == up) {
      return m;
    }
  }
  throw ConfigError("unknown model '" + tag + "' (GP, WGP, MFGP, WMFGP, BCMF, SI)");
}

/// An explicit gap to fill instead of auto-detection.
struct GapSpec {
  Timestamp start = 0;
  std::size_t length = 0;
};

struct FillOptions {
  std::string model = "WMFGP";
  bool force_structural = false;
  GapThresholds thresholds;
  /// Hours of context on each side of a gap used for fitting.
  std::size_t context_hours = 168;
  /// Neighbours per side for SI.
  std::size_t si_neighbours = 24;
  /// Empty means auto-detect on the HF series.
  std::vector<GapSpec> gaps;
  FillConfig fill;
};

struct GapOutcome {
  Gap gap;
  bool filled = false;
  std::string reason;
};

struct FillCommandResult {
  std::string station_id;
  std::vector<GapOutcome> outcomes;
  /// One per filled gap; query holds timestamps.
  std::vector<FillResult> fills;
  std::vector<std::string> warnings;

  std::size_t filled_rows() const {
    std::size_t n = 0;
    for (const auto &f : fills) {
      n += f.size();
    }
    return n;
  }

  void write_csv(std::ostream &os) const {
    os << "timestamp,mean,lower,upper,model\n";
    for (const auto &f : fills) {
      f.write_csv(os, false, [](double t) { return format_timestamp(static_cast<Timestamp>(t)); });
    }
  }

  void write_outcomes_csv(std::ostream &os) const {
    os << "start,length_hours,class,status,reason\n";
    for (const auto &o : outcomes) {
      std::string why = o.reason;
      std::replace(why.begin(), why.end(), ',', ';');
      os << format_timestamp(o.gap.start_time) << ',' << o.gap.length << ','
         << to_string(o.gap.cls) << ',' << (o.filled ? "filled" : "skipped") << ',' << why
         << '\n';
    }
  }
};

namespace detail {

inline TimeSeries on_hourly_grid(const TimeSeries &s) {
  return s.is_hourly_grid() ? s : hourly_aggregate(s);
}

inline FillResult fill_window(const std::string &model, const NestedDesign &d,
                              const std::vector<double> &hf_window,
                              const std::vector<double> &query, const FillOptions &o) {
  if (model == "GP") {
    return gp_fill(d.x_h, d.y_h, query, o.fill);
  }
  if (model == "WGP") {
    return wgp_fill(d.x_h, d.y_h, query, o.fill);
  }
  if (model == "MFGP") {
    return mfgp_fill(d, query, o.fill);
  }
  if (model == "WMFGP") {
    return wmfgp_fill(d, query, o.fill);
  }
  if (model == "BCMF") {
    return bcmf_fill(d, query, o.fill);
  }
  std::vector<std::size_t> targets;
  for (double q : query) {
    targets.push_back(static_cast<std::size_t>(q));
  }
  return simple_impute(hf_window, targets, o.si_neighbours);
}

} // namespace detail

/// Fills HF gaps using the LF series aligned by timestamp. Target-class gaps
/// are filled; short gaps are left alone; structural gaps are skipped with a
/// warning unless forced. A gap is skipped when LF is missing anywhere in it.
inline FillCommandResult fill_command(const TimeSeries &hf_raw, const TimeSeries &lf_raw,
                                      const FillOptions &opt = {}) {
  const std::string model = parse_model_tag(opt.model);
  const TimeSeries hf = detail::on_hourly_grid(hf_raw);
  const TimeSeries lf = detail::on_hourly_grid(lf_raw);
  if (hf.size() == 0) {
    throw InvalidInput("HF series is empty");
  }
  std::unordered_map<Timestamp, double> lf_at;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    lf_at.emplace(lf.timestamps[i], lf.values[i]);
  }
  std::vector<double> lf_on_hf(hf.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < hf.size(); ++i) {
    if (auto it = lf_at.find(hf.timestamps[i]); it != lf_at.end()) {
      lf_on_hf[i] = it->second;
    }
  }

  std::vector<Gap> gaps;
  if (opt.gaps.empty()) {
    gaps = detect_and_classify_gaps(hf, opt.thresholds).gaps;
  } else {
    for (const auto &g : opt.gaps) {
      if (g.length == 0 || (g.start - hf.timestamps.front()) % kHour != 0 ||
          g.start < hf.timestamps.front() ||
          static_cast<std::size_t>((g.start - hf.timestamps.front()) / kHour) + g.length >
              hf.size()) {
        throw ConfigError("gap at " + format_timestamp(g.start) + " is off the HF grid");
      }
      const auto start = static_cast<std::size_t>((g.start - hf.timestamps.front()) / kHour);
      gaps.push_back({start, g.start, g.length, opt.thresholds.classify(g.length)});
    }
  }

  FillCommandResult out;
  out.station_id = hf.station_id;
  for (const auto &g : gaps) {
    GapOutcome o{g, false, {}};
    const std::string where = format_timestamp(g.start_time) + " (" +
                              std::to_string(g.length) + " h)";
    if (g.cls == GapClass::short_gap) {
      o.reason = "short gap";
      out.outcomes.push_back(o);
      continue;
    }
    if (g.cls == GapClass::structural) {
      if (!opt.force_structural) {
        o.reason = "structural gap; use the force flag to fill";
        out.warnings.push_back("skipped structural gap at " + where);
        out.outcomes.push_back(o);
        continue;
      }
      out.warnings.push_back("structural gap at " + where +
                             " filled on request; statistical fill alone is risky here");
    }
    const std::size_t end = g.start + g.length;
    if (std::any_of(lf_on_hf.begin() + static_cast<std::ptrdiff_t>(g.start),
                    lf_on_hf.begin() + static_cast<std::ptrdiff_t>(end),
                    [](double v) { return std::isnan(v); })) {
      o.reason = "LF missing over the gap";
      out.warnings.push_back("skipped gap at " + where + ": LF missing over the gap");
      out.outcomes.push_back(o);
      continue;
    }
    const std::size_t lo = g.start > opt.context_hours ? g.start - opt.context_hours : 0;
    const std::size_t hi = std::min(hf.size(), end + opt.context_hours);
    NestedDesign d;
    std::vector<double> query, hf_window;
    for (std::size_t i = lo; i < hi; ++i) {
      const double x = static_cast<double>(i - lo);
      const bool has_l = !std::isnan(lf_on_hf[i]);
      const bool has_h = !std::isnan(hf.values[i]);
      if (has_l) {
        d.x_l.push_back(x);
        d.y_l.push_back(lf_on_hf[i]);
      }
      // HF points without LF would break nesting; they still feed SI.
      if (has_h && has_l) {
        d.x_h.push_back(x);
        d.y_h.push_back(hf.values[i]);
      }
      hf_window.push_back(hf.values[i]);
      if (i >= g.start && i < end) {
        query.push_back(x);
      }
    }
    if (d.n_h() < 3) {
      o.reason = "fewer than 3 HF observations in the context window";
      out.warnings.push_back("skipped gap at " + where + ": " + o.reason);
      out.outcomes.push_back(o);
      continue;
    }
    try {
      FillResult f = detail::fill_window(model, d, hf_window, query, opt);
      for (auto &q : f.query) {
        q = static_cast<double>(hf.timestamps[lo + static_cast<std::size_t>(q)]);
      }
      for (const auto &w : f.diagnostics.warnings) {
        out.warnings.push_back(where + ": " + w);
      }
      out.fills.push_back(std::move(f));
      o.filled = true;
    } catch (const Error &e) {
      o.reason = std::string("fit failed: ") + e.what();
      out.warnings.push_back("skipped gap at " + where + ": " + o.reason);
    }
    out.outcomes.push_back(o);
  }
  return out;
}

} // namespace wmfgp
