// Command-line entry points: synthetic experiments, gap filling on real
// series, station clustering and gap reports.
//
// Exit codes: 0 success, 1 other library error, 2 bad config or input,
// 3 hard numerical failure (a model failed in every replication, or a fit
// failed outright).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "wmfgp/cluster.hpp"
#include "wmfgp/experiment.hpp"
#include "wmfgp/fill.hpp"
#include "wmfgp/ingest.hpp"
#include "wmfgp/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace wmfgp;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
  std::size_t reps = 0;
  unsigned threads = 0;
  bool threads_set = false;
};

class HardNumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path &p) {
  std::ofstream f(p);
  if (!f) {
    throw ConfigError("cannot write " + p.string());
  }
  return f;
}

void write_manifest(const fs::path &dir, const std::string &command, const json &body) {
  json m;
  m["tool"] = "wmfgp";
  m["version"] = kVersion;
  m["command"] = command;
  for (auto it = body.begin(); it != body.end(); ++it) {
    m[it.key()] = it.value();
  }
  open_out(dir / "manifest.json") << m.dump(2) << '\n';
}

ScenarioConfig scenario_from(const Common &c) {
  ScenarioConfig s = c.config.empty()
                         ? ScenarioConfig::defaults(NoiseKind::weibull, SkewLevel::high)
                         : load_scenario(c.config);
  if (c.seed_set) {
    s.seed = c.seed;
  }
  if (c.reps > 0) {
    s.replications = c.reps;
  }
  if (c.threads_set) {
    s.threads = c.threads;
  }
  s.validate();
  return s;
}

std::string scenario_echo(const ScenarioConfig &s) {
  std::ostringstream os;
  write_scenario(os, s);
  return os.str();
}

void check_hard_failures(const ExperimentReport &r) {
  for (const auto &s : r.summary) {
    if (s.n_ok == 0 && s.n_failed > 0) {
      throw HardNumericalFailure("model " + s.model + " failed in every replication" +
                                 (s.gap ? " at gap " + std::to_string(s.gap) : std::string()));
    }
  }
}

void write_report(const fs::path &dir, const ExperimentReport &r) {
  auto rows = open_out(dir / "replications.csv");
  r.write_replications_csv(rows);
  auto sum = open_out(dir / "summary.csv");
  r.write_summary_csv(sum);
}

json replication_seeds(const ExperimentReport &r) {
  json seeds = json::array();
  std::size_t last_rep = static_cast<std::size_t>(-1), last_gap = static_cast<std::size_t>(-1);
  for (const auto &row : r.rows) {
    if (row.rep != last_rep || row.gap != last_gap) {
      seeds.push_back({{"gap", row.gap}, {"rep", row.rep}, {"seed", row.seed}});
      last_rep = row.rep;
      last_gap = row.gap;
    }
  }
  return seeds;
}

void print_summary(const ExperimentReport &r) {
  for (const auto &s : r.summary) {
    std::cerr << s.experiment << " gap=" << s.gap << ' ' << s.model << " median_mae=" << s.median_mae
              << " coverage=" << s.coverage << " failed=" << s.n_failed << '\n';
  }
}

int run_simulate_random(const Common &c) {
  const ScenarioConfig s = scenario_from(c);
  fs::create_directories(c.out);
  const auto report = run_random_experiment(s);
  write_report(c.out, report);
  write_manifest(c.out, "simulate-random",
                 {{"master_seed", s.seed},
                  {"config", scenario_echo(s)},
                  {"replication_seeds", replication_seeds(report)},
                  {"outputs", {"replications.csv", "summary.csv"}}});
  print_summary(report);
  check_hard_failures(report);
  return 0;
}

/// Loads a pool entry "HF.csv,LF.csv" onto one common hourly grid.
SeriesPair load_pool_pair(const std::string &spec) {
  const auto comma = spec.find(',');
  if (comma == std::string::npos) {
    throw ConfigError("--pair expects HF.csv,LF.csv; got '" + spec + "'");
  }
  const TimeSeries hf = hourly_aggregate(load_series_csv(spec.substr(0, comma)).series);
  const TimeSeries lf = hourly_aggregate(load_series_csv(spec.substr(comma + 1)).series);
  std::unordered_map<Timestamp, double> at;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    at.emplace(lf.timestamps[i], lf.values[i]);
  }
  SeriesPair p;
  for (std::size_t i = 0; i < hf.size(); ++i) {
    const auto it = at.find(hf.timestamps[i]);
    p.y_h.push_back(hf.values[i]);
    p.y_l.push_back(it == at.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
  }
  return p;
}

int run_simulate_structural(const Common &c, const std::vector<std::string> &pairs) {
  const ScenarioConfig s = scenario_from(c);
  StationPairSpec spec;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    spec = parse_station_pair(in);
  }
  fs::create_directories(c.out);
  ExperimentReport report;
  json mode;
  if (pairs.empty()) {
    report = run_structural_experiment(s, spec);
    std::ostringstream os;
    write_station_pair(os, spec);
    mode = {{"pairs", "synthetic"}, {"station_pair", os.str()}};
  } else {
    std::vector<SeriesPair> pool;
    for (const auto &p : pairs) {
      pool.push_back(load_pool_pair(p));
    }
    report = run_structural_experiment(s, pool);
    mode = {{"pairs", "pool"}, {"pool", pairs}};
  }
  write_report(c.out, report);
  write_manifest(c.out, "simulate-structural",
                 {{"master_seed", s.seed},
                  {"config", scenario_echo(s)},
                  {"mode", mode},
                  {"replication_seeds", replication_seeds(report)},
                  {"outputs", {"replications.csv", "summary.csv"}}});
  print_summary(report);
  check_hard_failures(report);
  return 0;
}

struct FillArgs {
  std::string hf, lf, model = "WMFGP";
  std::vector<std::string> gaps;
  std::size_t context = 168;
  bool force = false;
};

int run_fill(const Common &c, const FillArgs &a) {
  FillOptions o;
  o.model = a.model;
  o.force_structural = a.force;
  o.context_hours = a.context;
  const std::uint64_t seed = c.seed_set ? c.seed : 1;
  o.fill.mfgp.optimizer.seed = seed;
  o.fill.gp.optimizer.seed = seed;
  for (const auto &g : a.gaps) {
    const auto comma = g.find(',');
    const auto start = parse_timestamp(g.substr(0, comma));
    if (comma == std::string::npos || !start) {
      throw ConfigError("--gap expects START,HOURS with an ISO-8601 start; got '" + g + "'");
    }
    try {
      o.gaps.push_back({*start, static_cast<std::size_t>(std::stoul(g.substr(comma + 1)))});
    } catch (const std::logic_error &) {
      throw ConfigError("--gap length is not a number: '" + g + "'");
    }
  }
  const auto hf = load_series_csv(a.hf);
  const auto lf = load_series_csv(a.lf);
  fs::create_directories(c.out);
  const auto r = fill_command(hf.series, lf.series, o);
  auto fill = open_out(fs::path(c.out) / "fill.csv");
  r.write_csv(fill);
  auto outcomes = open_out(fs::path(c.out) / "gaps.csv");
  r.write_outcomes_csv(outcomes);
  auto rej = open_out(fs::path(c.out) / "rejects.csv");
  {
    LoadResult both = hf;
    both.rejects.insert(both.rejects.end(), lf.rejects.begin(), lf.rejects.end());
    both.write_rejects_csv(rej);
  }
  for (const auto &w : r.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
  std::size_t hard = 0;
  for (const auto &oc : r.outcomes) {
    hard += !oc.filled && oc.reason.rfind("fit failed", 0) == 0 ? 1 : 0;
  }
  write_manifest(c.out, "fill",
                 {{"seed", seed},
                  {"hf", a.hf},
                  {"lf", a.lf},
                  {"model", parse_model_tag(a.model)},
                  {"context_hours", a.context},
                  {"force_structural", a.force},
                  {"gaps_requested", a.gaps},
                  {"filled_rows", r.filled_rows()},
                  {"rejected_rows", hf.rejects.size() + lf.rejects.size()},
                  {"warnings", r.warnings},
                  {"outputs", {"fill.csv", "gaps.csv", "rejects.csv"}}});
  std::cerr << "filled " << r.filled_rows() << " rows in " << r.fills.size() << " gaps\n";
  if (hard > 0) {
    throw HardNumericalFailure(std::to_string(hard) + " gap fit(s) failed");
  }
  return 0;
}

struct ClusterArgs {
  std::string stations;
  std::size_t synthetic = 0;
  std::size_t k = 26, min_size = 3, max_size = 6;
  std::size_t k_min = 0, k_max = 0;
  std::vector<std::string> targets;
};

int run_cluster(const Common &c, const ClusterArgs &a) {
  if (a.stations.empty() == (a.synthetic == 0)) {
    throw ConfigError("give exactly one of --stations or --synthetic");
  }
  const std::uint64_t seed = c.seed_set ? c.seed : 1;
  const auto st = a.stations.empty() ? synthetic_stations(a.synthetic, seed)
                                     : load_stations_csv(a.stations);
  fs::create_directories(c.out);
  const auto cl = constrained_kmeans(st, a.k, a.min_size, a.max_size, seed);
  auto f = open_out(fs::path(c.out) / "clusters.csv");
  cl.write_csv(f);
  json outputs = {"clusters.csv"};
  if (a.k_max > 0) {
    const auto rows = elbow_report(st, a.k_min ? a.k_min : 1, a.k_max, a.min_size, a.max_size, seed);
    auto e = open_out(fs::path(c.out) / "elbow.csv");
    write_elbow_csv(e, rows);
    outputs.push_back("elbow.csv");
  }
  if (!a.targets.empty()) {
    auto p = open_out(fs::path(c.out) / "pairs.csv");
    p << "target,surrogate\n";
    for (std::size_t i = 0; i < a.targets.size(); ++i) {
      p << a.targets[i] << ',' << pair_stations(cl, a.targets[i], derive_seed(seed, i)) << '\n';
    }
    outputs.push_back("pairs.csv");
  }
  const auto sizes = cl.sizes();
  write_manifest(c.out, "cluster",
                 {{"seed", seed},
                  {"stations", a.stations.empty() ? "synthetic:" + std::to_string(a.synthetic)
                                                  : a.stations},
                  {"k", a.k},
                  {"min_size", a.min_size},
                  {"max_size", a.max_size},
                  {"objective", cl.objective},
                  {"sizes", sizes},
                  {"outputs", outputs}});
  std::cerr << "k=" << a.k << " objective=" << cl.objective << " mean size="
            << static_cast<double>(st.size()) / static_cast<double>(a.k) << '\n';
  return 0;
}

struct GapArgs {
  std::string series, station;
};

int run_report_gaps(const Common &c, const GapArgs &a) {
  CsvSchema schema;
  schema.station_filter = a.station;
  const auto loaded = load_series_csv(a.series, schema);
  const auto hourly = hourly_aggregate(loaded.series);
  const auto rep = detect_and_classify_gaps(hourly);
  fs::create_directories(c.out);
  auto g = open_out(fs::path(c.out) / "gaps.csv");
  rep.write_gaps_csv(g);
  auto h = open_out(fs::path(c.out) / "histogram.csv");
  rep.write_histogram_csv(h);
  auto r = open_out(fs::path(c.out) / "rejects.csv");
  loaded.write_rejects_csv(r);
  auto s = open_out(fs::path(c.out) / "hourly.csv");
  hourly.write_csv(s);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto &gap : rep.gaps) {
    ++counts[static_cast<int>(gap.cls)];
  }
  write_manifest(c.out, "report-gaps",
                 {{"series", a.series},
                  {"station", loaded.series.station_id},
                  {"hours", hourly.size()},
                  {"rejected_rows", loaded.rejects.size()},
                  {"gaps", {{"short", counts[0]}, {"target", counts[1]}, {"structural", counts[2]}}},
                  {"outputs", {"gaps.csv", "histogram.csv", "rejects.csv", "hourly.csv"}}});
  std::cerr << rep.gaps.size() << " gaps: " << counts[0] << " short, " << counts[1]
            << " target, " << counts[2] << " structural\n";
  return 0;
}

void add_common(CLI::App *sub, Common &c, bool with_config, bool with_reps) {
  if (with_config) {
    sub->add_option("--config", c.config, "Scenario file (INI)")->check(CLI::ExistingFile);
  }
  sub->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t &v) { c.seed = v, c.seed_set = true; }, "Master seed");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  if (with_reps) {
    sub->add_option("--reps", c.reps, "Replications (per gap length for structural runs)")
        ->check(CLI::PositiveNumber);
    sub->add_option_function<unsigned>(
        "--threads", [&c](const unsigned &v) { c.threads = v, c.threads_set = true; },
        "Worker threads; 0 uses every core");
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Warped multifidelity Gaussian process gap filling"};
  app.set_version_flag("--version", std::string("wmfgp ") + kVersion);
  app.require_subcommand(1);

  Common common;
  auto *rnd = app.add_subcommand("simulate-random", "Randomized-missingness experiment");
  add_common(rnd, common, true, true);

  std::vector<std::string> pairs;
  auto *str = app.add_subcommand("simulate-structural", "Structural-gap experiment");
  add_common(str, common, true, true);
  str->add_option("--pair", pairs, "Observed station pair HF.csv,LF.csv; repeatable");

  FillArgs fa;
  auto *fill = app.add_subcommand("fill", "Fill HF gaps from an LF series");
  add_common(fill, common, false, false);
  fill->add_option("--hf", fa.hf, "HF series CSV")->required()->check(CLI::ExistingFile);
  fill->add_option("--lf", fa.lf, "LF series CSV")->required()->check(CLI::ExistingFile);
  fill->add_option("--model", fa.model, "GP, WGP, MFGP, WMFGP, BCMF or SI")->capture_default_str();
  fill->add_option("--gap", fa.gaps, "Explicit gap START,HOURS; repeatable (default: detect)");
  fill->add_option("--context", fa.context, "Context hours on each side")->capture_default_str();
  fill->add_flag("--force-structural", fa.force, "Also fill gaps longer than 192 h");

  ClusterArgs ca;
  auto *clu = app.add_subcommand("cluster", "Constrained k-means over stations and pairing");
  add_common(clu, common, false, false);
  clu->add_option("--stations", ca.stations, "Station CSV (id,lon,lat,alt)")
      ->check(CLI::ExistingFile);
  clu->add_option("--synthetic", ca.synthetic, "Use N synthetic stations instead");
  clu->add_option("--k", ca.k, "Cluster count")->capture_default_str();
  clu->add_option("--min-size", ca.min_size, "Minimum cluster size")->capture_default_str();
  clu->add_option("--max-size", ca.max_size, "Maximum cluster size")->capture_default_str();
  clu->add_option("--elbow-min", ca.k_min, "Smallest k in the elbow report");
  clu->add_option("--elbow-max", ca.k_max, "Largest k in the elbow report (0 skips it)");
  clu->add_option("--target", ca.targets, "Station to pair; repeatable");

  GapArgs ga;
  auto *gap = app.add_subcommand("report-gaps", "Hourly aggregation and gap classification");
  add_common(gap, common, false, false);
  gap->add_option("--series", ga.series, "Series CSV (timestamp,value,station_id)")
      ->required()
      ->check(CLI::ExistingFile);
  gap->add_option("--station", ga.station, "Keep only this station id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  try {
    if (*rnd) {
      rc = run_simulate_random(common);
    } else if (*str) {
      rc = run_simulate_structural(common, pairs);
    } else if (*fill) {
      rc = run_fill(common, fa);
    } else if (*clu) {
      rc = run_cluster(common, ca);
    } else if (*gap) {
      rc = run_report_gaps(common, ga);
    }
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError &e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const HardNumericalFailure &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const NumericalFailure &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const FitFailure &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "done in " << secs << " s\n";
  return rc;
}
