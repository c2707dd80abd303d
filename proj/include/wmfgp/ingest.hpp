#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wmfgp/errors.hpp"

namespace wmfgp {

inline constexpr std::int64_t kHour = 3600;

/// Seconds since 1970-01-01T00:00:00Z.
using Timestamp = std::int64_t;

/// Accepts YYYY-MM-DD[T ]HH:MM[:SS][Z]. Returns nullopt when malformed.
inline std::optional<Timestamp> parse_timestamp(const std::string &text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int used = 0;
  const int got = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi,
                              &used);
  if (got < 6 || (sep != 'T' && sep != ' ')) {
    return std::nullopt;
  }
  std::string rest = text.substr(static_cast<std::size_t>(used));
  if (!rest.empty() && rest[0] == ':') {
    int more = 0;
    if (std::sscanf(rest.c_str(), ":%2d%n", &s, &more) != 1) {
      return std::nullopt;
    }
    rest = rest.substr(static_cast<std::size_t>(more));
  }
  if (rest == "Z") {
    rest.clear();
  }
  if (!rest.empty() || h > 23 || mi > 59 || s > 59) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) {
    return std::nullopt;
  }
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + s;
}

inline std::string format_timestamp(Timestamp t) {
  const auto days = static_cast<std::int64_t>(std::floor(static_cast<double>(t) / 86400.0));
  const std::int64_t secs = t - days * 86400;
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{static_cast<int>(days)}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

/// Values are NaN where missing.
struct TimeSeries {
  std::string station_id;
  std::vector<Timestamp> timestamps;
  std::vector<double> values;
  std::string unit = "m/s";

  std::size_t size() const { return timestamps.size(); }

  bool is_hourly_grid() const {
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
      if (timestamps[i] - timestamps[i - 1] != kHour) {
        return false;
      }
    }
    return timestamps.empty() || timestamps.front() % kHour == 0;
  }

  void write_csv(std::ostream &os) const {
    os << "timestamp,value,station_id\n" << std::setprecision(10);
    for (std::size_t i = 0; i < size(); ++i) {
      os << format_timestamp(timestamps[i]) << ',';
      if (std::isnan(values[i])) {
        os << "NA";
      } else {
        os << values[i];
      }
      os << ',' << station_id << '\n';
    }
  }
};

struct CsvSchema {
  std::string timestamp_column = "timestamp";
  std::string value_column = "value";
  /// Optional; when absent from the header every row belongs to one series.
  std::string station_column = "station_id";
  /// Keep only rows for this station when set.
  std::string station_filter;
  std::vector<std::string> missing_tokens{"NA", "NaN", "nan", ""};
};

struct RejectedRow {
  std::size_t row = 0;
  std::string reason;
  std::string text;
};

struct LoadResult {
  TimeSeries series;
  std::vector<RejectedRow> rejects;

  void write_rejects_csv(std::ostream &os) const {
    os << "row,reason,text\n";
    for (const auto &r : rejects) {
      std::string t = r.text;
      std::replace(t.begin(), t.end(), ',', ';');
      os << r.row << ',' << r.reason << ',' << t << '\n';
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

} // namespace detail

/// Rows numbered from 1 at the header. Unparseable rows go to the rejects
/// list; duplicate or decreasing timestamps are errors naming the row.
inline LoadResult read_series_csv(std::istream &is, const CsvSchema &schema = {}) {
  std::string line;
  if (!std::getline(is, line)) {
    throw ParseError("series file is empty");
  }
  const auto header = detail::split_csv_line(line);
  auto find = [&](const std::string &name) -> std::optional<std::size_t> {
    const auto f = std::find(header.begin(), header.end(), name);
    if (f == header.end()) {
      return std::nullopt;
    }
    return static_cast<std::size_t>(f - header.begin());
  };
  const auto ct = find(schema.timestamp_column);
  const auto cv = find(schema.value_column);
  if (!ct || !cv) {
    throw ParseError("series file needs columns '" + schema.timestamp_column + "' and '" +
                     schema.value_column + "'");
  }
  const auto cs = find(schema.station_column);
  LoadResult out;
  std::size_t row = 1;
  std::size_t last_row = 0;
  bool have_station = false;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto f = detail::split_csv_line(line);
    if (f.size() <= std::max(*ct, *cv) || (cs && f.size() <= *cs)) {
      out.rejects.push_back({row, "too few fields", line});
      continue;
    }
    const std::string station = cs ? f[*cs] : std::string();
    if (!schema.station_filter.empty() && station != schema.station_filter) {
      continue;
    }
    const auto t = parse_timestamp(f[*ct]);
    if (!t) {
      out.rejects.push_back({row, "bad timestamp", line});
      continue;
    }
    double v = std::numeric_limits<double>::quiet_NaN();
    const std::string &vs = f[*cv];
    if (std::find(schema.missing_tokens.begin(), schema.missing_tokens.end(), vs) ==
        schema.missing_tokens.end()) {
      try {
        std::size_t used = 0;
        v = std::stod(vs, &used);
        if (used != vs.size() || !std::isfinite(v)) {
          throw std::invalid_argument(vs);
        }
      } catch (const std::logic_error &) {
        out.rejects.push_back({row, "bad value", line});
        continue;
      }
    }
    if (!have_station) {
      out.series.station_id = station;
      have_station = true;
    } else if (station != out.series.station_id) {
      throw ParseError("row " + std::to_string(row) + " belongs to station '" + station +
                       "' but the file already holds '" + out.series.station_id +
                       "'; set a station filter");
    }
    if (!out.series.timestamps.empty()) {
      const Timestamp prev = out.series.timestamps.back();
      if (*t == prev) {
        throw DuplicateTimestamp("row " + std::to_string(row) + " repeats timestamp " +
                                 f[*ct] + " from row " + std::to_string(last_row));
      }
      if (*t < prev) {
        throw NonMonotoneTimestamp("row " + std::to_string(row) + " timestamp " + f[*ct] +
                                   " is earlier than row " + std::to_string(last_row));
      }
    }
    out.series.timestamps.push_back(*t);
    out.series.values.push_back(v);
    last_row = row;
  }
  return out;
}

inline LoadResult load_series_csv(const std::string &path, const CsvSchema &schema = {}) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open series file " + path);
  }
  return read_series_csv(in, schema);
}

/// Means over [h, h + 1) on a gap-free hourly grid from the first to the last
/// hour; hours without observed values are missing.
inline TimeSeries hourly_aggregate(const TimeSeries &raw) {
  TimeSeries out;
  out.station_id = raw.station_id;
  out.unit = raw.unit;
  if (raw.timestamps.empty()) {
    return out;
  }
  auto floor_hour = [](Timestamp t) {
    return static_cast<Timestamp>(std::floor(static_cast<double>(t) / kHour)) * kHour;
  };
  const Timestamp first = floor_hour(raw.timestamps.front());
  const Timestamp last = floor_hour(raw.timestamps.back());
  const auto n = static_cast<std::size_t>((last - first) / kHour + 1);
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> cnt(n, 0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::isnan(raw.values[i])) {
      continue;
    }
    const auto b = static_cast<std::size_t>((floor_hour(raw.timestamps[i]) - first) / kHour);
    sum[b] += raw.values[i];
    ++cnt[b];
  }
  for (std::size_t b = 0; b < n; ++b) {
    out.timestamps.push_back(first + static_cast<Timestamp>(b) * kHour);
    out.values.push_back(cnt[b] ? sum[b] / static_cast<double>(cnt[b])
                                : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

enum class GapClass { short_gap, target, structural };

inline std::string to_string(GapClass c) {
  switch (c) {
  case GapClass::short_gap:
    return "short";
  case GapClass::target:
    return "target";
  default:
    return "structural";
  }
}

struct GapThresholds {
  /// Gaps shorter than this are short.
  std::size_t target_min = 15;
  /// Gaps longer than this are structural.
  std::size_t target_max = 192;

  GapClass classify(std::size_t length) const {
    if (length < target_min) {
      return GapClass::short_gap;
    }
    return length <= target_max ? GapClass::target : GapClass::structural;
  }
};

struct Gap {
  /// Index of the first missing hour.
  std::size_t start = 0;
  Timestamp start_time = 0;
  std::size_t length = 0;
  GapClass cls = GapClass::short_gap;
};

struct GapReport {
  std::vector<Gap> gaps;
  GapThresholds thresholds;

  /// Gap count per length.
  std::map<std::size_t, std::size_t> histogram() const {
    std::map<std::size_t, std::size_t> h;
    for (const auto &g : gaps) {
      ++h[g.length];
    }
    return h;
  }

  void write_gaps_csv(std::ostream &os) const {
    os << "start,length_hours,class\n";
    for (const auto &g : gaps) {
      os << format_timestamp(g.start_time) << ',' << g.length << ',' << to_string(g.cls) << '\n';
    }
  }

  void write_histogram_csv(std::ostream &os) const {
    os << "length_hours,class,count\n";
    for (const auto &[len, n] : histogram()) {
      os << len << ',' << to_string(thresholds.classify(len)) << ',' << n << '\n';
    }
  }
};

/// Maximal runs of missing values on an hourly series.
inline GapReport detect_and_classify_gaps(const TimeSeries &s, const GapThresholds &th = {}) {
  if (!s.is_hourly_grid()) {
    throw InvalidInput("gap detection needs an hourly series; aggregate first");
  }
  GapReport r;
  r.thresholds = th;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isnan(s.values[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isnan(s.values[j])) {
      ++j;
    }
    r.gaps.push_back({i, s.timestamps[i], j - i, th.classify(j - i)});
    i = j;
  }
  return r;
}

} // namespace wmfgp
