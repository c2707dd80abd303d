#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wmfgp/errors.hpp"

namespace wmfgp {

struct Station {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
  /// Metres.
  double alt = 0.0;
};

using Point3 = std::array<double, 3>;

struct Clustering {
  std::size_t k = 0;
  /// Cluster index per station, aligned with the input order.
  std::vector<std::size_t> assignment;
  /// Centroids in standardized coordinates.
  std::vector<Point3> centroids;
  std::vector<std::string> ids;
  std::size_t min_size = 0;
  std::size_t max_size = 0;
  /// Within-cluster sum of squared standardized distances.
  double objective = 0.0;
  /// Objective after each accepted iteration of the winning restart.
  std::vector<double> trace;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(k, 0);
    for (auto a : assignment) {
      ++s[a];
    }
    return s;
  }

  std::vector<std::size_t> members(std::size_t cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] == cluster) {
        out.push_back(i);
      }
    }
    return out;
  }

  void write_csv(std::ostream &os) const {
    os << "id,cluster\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      os << ids[i] << ',' << assignment[i] << '\n';
    }
  }
};

struct KMeansConfig {
  int restarts = 10;
  int max_iterations = 100;
};

/// Per-coordinate z-scores; a constant coordinate maps to zero.
inline std::vector<Point3> standardize(const std::vector<Station> &stations) {
  const double n = static_cast<double>(stations.size());
  std::vector<Point3> raw;
  raw.reserve(stations.size());
  for (const auto &s : stations) {
    if (!std::isfinite(s.lon) || !std::isfinite(s.lat) || !std::isfinite(s.alt)) {
      throw InvalidInput("station " + s.id + " has non-finite coordinates");
    }
    raw.push_back({s.lon, s.lat, s.alt});
  }
  for (std::size_t d = 0; d < 3; ++d) {
    double m = 0.0;
    for (const auto &p : raw) {
      m += p[d];
    }
    m /= n;
    double ss = 0.0;
    for (const auto &p : raw) {
      ss += (p[d] - m) * (p[d] - m);
    }
    const double sd = std::sqrt(ss / n);
    for (auto &p : raw) {
      p[d] = sd > 0.0 ? (p[d] - m) / sd : 0.0;
    }
  }
  return raw;
}

namespace detail {

inline double sqdist(const Point3 &a, const Point3 &b) {
  double s = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    s += (a[d] - b[d]) * (a[d] - b[d]);
  }
  return s;
}

/// k-means++ seeding.
inline std::vector<Point3> seed_centroids(const std::vector<Point3> &pts, std::size_t k,
                                          std::mt19937_64 &rng) {
  std::vector<Point3> c;
  std::uniform_int_distribution<std::size_t> first(0, pts.size() - 1);
  c.push_back(pts[first(rng)]);
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  while (c.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d2[i] = std::min(d2[i], sqdist(pts[i], c.back()));
      total += d2[i];
    }
    if (!(total > 0.0)) {
      c.push_back(pts[first(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    std::size_t pick = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      r -= d2[i];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    c.push_back(pts[pick]);
  }
  return c;
}

/// Capacity-limited greedy assignment by ascending distance, then repair of
/// clusters below `min_size` by moving the cheapest points from clusters
/// that can spare them.
inline std::vector<std::size_t> bounded_assign(const std::vector<Point3> &pts,
                                               const std::vector<Point3> &cent,
                                               std::size_t min_size, std::size_t max_size) {
  const std::size_t n = pts.size();
  const std::size_t k = cent.size();
  struct Pair {
    double d;
    std::size_t i;
    std::size_t c;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      pairs.push_back({sqdist(pts[i], cent[c]), i, c});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair &a, const Pair &b) {
    return a.d != b.d ? a.d < b.d : (a.i != b.i ? a.i < b.i : a.c < b.c);
  });
  std::vector<std::size_t> assign(n, k);
  std::vector<std::size_t> size(k, 0);
  for (const auto &p : pairs) {
    if (assign[p.i] == k && size[p.c] < max_size) {
      assign[p.i] = p.c;
      ++size[p.c];
    }
  }
  for (;;) {
    std::size_t needy = k;
    for (std::size_t c = 0; c < k; ++c) {
      if (size[c] < min_size) {
        needy = c;
        break;
      }
    }
    if (needy == k) {
      break;
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t move = n;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t from = assign[i];
      if (from == needy || size[from] <= min_size) {
        continue;
      }
      const double cost = sqdist(pts[i], cent[needy]) - sqdist(pts[i], cent[from]);
      if (cost < best) {
        best = cost;
        move = i;
      }
    }
    if (move == n) {
      throw ConfigError("cluster size bounds cannot be met");
    }
    --size[assign[move]];
    assign[move] = needy;
    ++size[needy];
  }
  return assign;
}

inline std::vector<Point3> centroids_of(const std::vector<Point3> &pts,
                                        const std::vector<std::size_t> &assign, std::size_t k) {
  std::vector<Point3> c(k, Point3{0.0, 0.0, 0.0});
  std::vector<double> cnt(k, 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      c[assign[i]][d] += pts[i][d];
    }
    cnt[assign[i]] += 1.0;
  }
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t d = 0; d < 3; ++d) {
      c[j][d] /= cnt[j];
    }
  }
  return c;
}

inline double wcss(const std::vector<Point3> &pts, const std::vector<std::size_t> &assign,
                   const std::vector<Point3> &cent) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s += sqdist(pts[i], cent[assign[i]]);
  }
  return s;
}

} // namespace detail

/// k-means on z-scored (lon, lat, alt) with every cluster size held in
/// [min_size, max_size]. Each restart alternates bounded assignment and
/// centroid updates and stops when the objective no longer decreases; the
/// best restart is returned.
inline Clustering constrained_kmeans(const std::vector<Station> &stations, std::size_t k,
                                     std::size_t min_size, std::size_t max_size,
                                     std::uint64_t seed, const KMeansConfig &cfg = {}) {
  const std::size_t n = stations.size();
  if (k < 1 || min_size > max_size || k * min_size > n || k * max_size < n) {
    throw ConfigError("infeasible clustering: k=" + std::to_string(k) + ", bounds [" +
                      std::to_string(min_size) + ", " + std::to_string(max_size) + "] for " +
                      std::to_string(n) + " stations");
  }
  if (cfg.restarts < 1 || cfg.max_iterations < 1) {
    throw ConfigError("restarts and max_iterations must be at least 1");
  }
  const auto pts = standardize(stations);
  std::mt19937_64 rng(seed);
  Clustering best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    auto cent = detail::seed_centroids(pts, k, rng);
    auto assign = detail::bounded_assign(pts, cent, min_size, max_size);
    cent = detail::centroids_of(pts, assign, k);
    double obj = detail::wcss(pts, assign, cent);
    std::vector<double> trace{obj};
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const auto next = detail::bounded_assign(pts, cent, min_size, max_size);
      if (next == assign) {
        break;
      }
      const auto next_cent = detail::centroids_of(pts, next, k);
      const double next_obj = detail::wcss(pts, next, next_cent);
      if (!(next_obj < obj)) {
        break;
      }
      assign = next;
      cent = next_cent;
      obj = next_obj;
      trace.push_back(obj);
    }
    if (obj < best.objective) {
      best.assignment = assign;
      best.centroids = cent;
      best.objective = obj;
      best.trace = trace;
    }
  }
  best.k = k;
  best.min_size = min_size;
  best.max_size = max_size;
  for (const auto &s : stations) {
    best.ids.push_back(s.id);
  }
  return best;
}

/// Mean silhouette on standardized coordinates; 0 for k = 1.
inline double average_silhouette(const std::vector<Station> &stations, const Clustering &c) {
  if (c.k < 2) {
    return 0.0;
  }
  const auto pts = standardize(stations);
  const auto sizes = c.sizes();
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> sum(c.k, 0.0);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i != j) {
        sum[c.assignment[j]] += std::sqrt(detail::sqdist(pts[i], pts[j]));
      }
    }
    const std::size_t own = c.assignment[i];
    if (sizes[own] < 2) {
      continue;
    }
    const double a = sum[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < c.k; ++q) {
      if (q != own && sizes[q] > 0) {
        b = std::min(b, sum[q] / static_cast<double>(sizes[q]));
      }
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(pts.size());
}

struct ElbowRow {
  std::size_t k = 0;
  double wcss = 0.0;
  double silhouette = 0.0;
};

/// Objective and silhouette over a range of k for choosing k by hand;
/// infeasible k are skipped.
inline std::vector<ElbowRow> elbow_report(const std::vector<Station> &stations, std::size_t k_min,
                                          std::size_t k_max, std::size_t min_size,
                                          std::size_t max_size, std::uint64_t seed) {
  std::vector<ElbowRow> out;
  for (std::size_t k = std::max<std::size_t>(1, k_min); k <= k_max; ++k) {
    if (k * min_size > stations.size() || k * max_size < stations.size()) {
      continue;
    }
    const auto c = constrained_kmeans(stations, k, min_size, max_size, seed);
    out.push_back({k, c.objective, average_silhouette(stations, c)});
  }
  return out;
}

inline void write_elbow_csv(std::ostream &os, const std::vector<ElbowRow> &rows) {
  os << "k,wcss,silhouette\n" << std::setprecision(10);
  for (const auto &r : rows) {
    os << r.k << ',' << r.wcss << ',' << r.silhouette << '\n';
  }
}

/// A uniformly random other member of the target's cluster.
inline std::string pair_stations(const Clustering &c, const std::string &target,
                                 std::uint64_t seed) {
  const auto it = std::find(c.ids.begin(), c.ids.end(), target);
  if (it == c.ids.end()) {
    throw LookupError("station '" + target + "' is not in the clustering");
  }
  const auto self = static_cast<std::size_t>(it - c.ids.begin());
  std::vector<std::size_t> others;
  for (auto m : c.members(c.assignment[self])) {
    if (m != self) {
      others.push_back(m);
    }
  }
  if (others.empty()) {
    throw PairingError("station '" + target + "' is alone in its cluster");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
  return c.ids[others[pick(rng)]];
}

/// Header id,lon,lat,alt; column order is taken from the header.
inline std::vector<Station> read_stations_csv(std::istream &is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw ParseError("station file is empty");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      cols.push_back(c);
    }
  }
  auto col = [&](const std::string &name) {
    const auto f = std::find(cols.begin(), cols.end(), name);
    if (f == cols.end()) {
      throw ParseError("station file lacks column '" + name + "'");
    }
    return static_cast<std::size_t>(f - cols.begin());
  };
  const std::size_t ci = col("id"), cx = col("lon"), cy = col("lat"), cz = col("alt");
  std::vector<Station> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      f.push_back(c);
    }
    if (f.size() < cols.size()) {
      throw ParseError("station file row " + std::to_string(row) + " has too few fields");
    }
    try {
      out.push_back({f[ci], std::stod(f[cx]), std::stod(f[cy]), std::stod(f[cz])});
    } catch (const std::logic_error &) {
      throw ParseError("station file row " + std::to_string(row) + " has a bad coordinate");
    }
  }
  return out;
}

inline std::vector<Station> load_stations_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open station file " + path);
  }
  return read_stations_csv(in);
}

/// Synthetic station network: `n` stations scattered around a few valley
/// centres with altitudes tied to the centre.
inline std::vector<Station> synthetic_stations(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lon(7.0, 13.5);
  std::uniform_real_distribution<double> lat(44.0, 47.0);
  std::uniform_real_distribution<double> alt(0.0, 2500.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const std::size_t centres = std::max<std::size_t>(1, n / 4);
  std::vector<Station> centre;
  for (std::size_t i = 0; i < centres; ++i) {
    centre.push_back({"", lon(rng), lat(rng), alt(rng)});
  }
  std::vector<Station> out;
  std::uniform_int_distribution<std::size_t> pick(0, centres - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto &c = centre[pick(rng)];
    std::ostringstream id;
    id << "S" << std::setw(3) << std::setfill('0') << i;
    out.push_back({id.str(), c.lon + 0.1 * jitter(rng), c.lat + 0.1 * jitter(rng),
                   std::max(0.0, c.alt + 150.0 * jitter(rng))});
  }
  return out;
}

} // namespace wmfgp
