#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "partx/app/config.hpp"
#include "partx/app/external.hpp"
#include "partx/app/io.hpp"
#include "partx/bench.hpp"
#include "partx/core.hpp"

namespace partx::app {

inline constexpr const char* kToolVersion = "1.0.0";

using ObjectiveFn = std::function<double(const Point&)>;

inline ObjectiveFn make_objective(const RunConfig& cfg) {
  if (!cfg.command.empty()) return ExternalObjective(cfg.command);
  return bench::find_problem(cfg.problem)->objective;
}

struct Replication {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  RunReport report;
};

/// Runs macro-replications with seeds seed+0 .. seed+reps-1 on at most `jobs`
/// threads. Results come back in index order whatever the scheduling.
inline std::vector<Replication> run_replications(const PartXConfig& base, const Hyperbox& domain,
                                                 const ObjectiveFn& objective, std::size_t jobs) {
  const std::size_t reps = base.macro_reps;
  std::vector<Replication> out(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < reps;) {
      PartXConfig cfg = base;
      cfg.seed = base.seed + i;
      out[i].index = i;
      out[i].seed = cfg.seed;
      ObjectiveFn f = objective;
      out[i].report = part_x(f, domain, cfg);
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, reps));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  return out;
}

struct SummaryRow {
  std::string metric;
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
};

/// Mean and standard error (sample sd / sqrt(n); 0 for a single value).
inline SummaryRow summarize(std::string metric, const std::vector<double>& xs) {
  SummaryRow row{std::move(metric), 0.0, 0.0, xs.size()};
  if (xs.empty()) return row;
  for (double x : xs) row.mean += x;
  row.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - row.mean) * (x - row.mean);
    row.std_err = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return row;
}

inline std::string quantile_metric_name(double q) { return "quantile_volume_" + format_double(q); }

/// Rows: hyperbox volume, one quantile volume per configured level,
/// falsification rate (share of replications that saw a negative value) and
/// minimum robustness.
inline std::vector<SummaryRow> summary_rows(const std::vector<Replication>& reps) {
  std::vector<SummaryRow> rows;
  std::vector<double> hyper, rate, min_rob;
  std::map<double, std::vector<double>> quant;
  for (const auto& r : reps) {
    hyper.push_back(r.report.volumes.hyperbox_volume);
    for (const auto& [q, v] : r.report.volumes.quantile_volume) quant[q].push_back(v);
    rate.push_back(r.report.min_value < 0.0 ? 1.0 : 0.0);
    min_rob.push_back(r.report.min_value);
  }
  rows.push_back(summarize("hyperbox_volume", hyper));
  for (const auto& [q, vs] : quant) rows.push_back(summarize(quantile_metric_name(q), vs));
  rows.push_back(summarize("falsification_rate", rate));
  rows.push_back(summarize("min_robustness", min_rob));
  return rows;
}

inline constexpr const char* kSummaryHeader = "metric,mean,std_err,n";
inline constexpr const char* kReplicationsHeader =
    "replication,seed,evaluations,iterations,aborted,hyperbox_volume,violating_volume,min_robustness";

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << kSummaryHeader << '\n';
  for (const auto& r : rows)
    os << r.metric << ',' << format_double(r.mean) << ',' << format_double(r.std_err) << ',' << r.n << '\n';
}

inline void write_replications_csv(std::ostream& os, const std::vector<Replication>& reps) {
  std::vector<double> levels;
  if (!reps.empty())
    for (const auto& [q, v] : reps.front().report.volumes.quantile_volume) levels.push_back(q);
  os << kReplicationsHeader;
  for (double q : levels) os << ',' << quantile_metric_name(q);
  os << '\n';
  for (const auto& r : reps) {
    const auto& rep = r.report;
    os << r.index << ',' << r.seed << ',' << rep.evaluations << ',' << rep.iterations.size() << ','
       << (rep.aborted ? 1 : 0) << ',' << format_double(rep.volumes.hyperbox_volume) << ','
       << format_double(rep.volumes.violating_volume) << ',' << format_double(rep.min_value);
    for (double q : levels) os << ',' << format_double(rep.volumes.quantile_volume.at(q));
    os << '\n';
  }
}

inline nlohmann::json diagnostics_json(const ConfidenceDiagnostics& d) {
  auto keyed = [](const std::map<int, double>& m) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, v] : m) o[std::to_string(k)] = v;
    return o;
  };
  return {{"level_alpha", d.level_alpha},
          {"gamma_plus", keyed(d.gamma_plus)},
          {"gamma_minus", keyed(d.gamma_minus)},
          {"eta_plus", keyed(d.eta_plus)},
          {"eta_minus", keyed(d.eta_minus)},
          {"eta_plus_product", d.eta_plus_product},
          {"eta_minus_product", d.eta_minus_product},
          {"joint_bound", d.joint_bound},
          {"satisfying_bound", d.satisfying_bound},
          {"violating_bound", d.violating_bound}};
}

inline nlohmann::json manifest_json(const RunConfig& cfg, const std::string& mode,
                                    const std::vector<Replication>& reps) {
  nlohmann::json m;
  m["tool"] = "partx";
  m["version"] = kToolVersion;
  m["mode"] = mode;
  m["config"] = to_json(cfg);
  m["domain"] = to_json(resolve_domain(cfg));
  auto& list = m["replications"] = nlohmann::json::array();
  for (const auto& r : reps) {
    nlohmann::json e = {{"index", r.index},
                        {"seed", r.seed},
                        {"evaluations", r.report.evaluations},
                        {"aborted", r.report.aborted},
                        {"diagnostics", diagnostics_json(r.report.diagnostics)}};
    if (r.report.aborted) e["error"] = r.report.error;
    list.push_back(std::move(e));
  }
  return m;
}

inline void write_file(const std::filesystem::path& p, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  body(os);
  if (!os) throw std::runtime_error("write failed for '" + p.string() + "'");
}

/// Writes leaves_<i>.csv and samples_<i>.csv per replication, then
/// replications.csv, summary.csv and manifest.json.
inline void write_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& mode,
                          const std::vector<Replication>& reps) {
  std::filesystem::create_directories(dir);
  const std::size_t dim = resolve_domain(cfg).dim();
  for (const auto& r : reps) {
    const std::string tag = std::to_string(r.index);
    write_file(dir / ("leaves_" + tag + ".csv"), [&](std::ostream& os) { write_leaves_csv(os, *r.report.tree); });
    write_file(dir / ("samples_" + tag + ".csv"),
               [&](std::ostream& os) { write_samples_csv(os, r.report.samples, dim); });
  }
  write_file(dir / "replications.csv", [&](std::ostream& os) { write_replications_csv(os, reps); });
  write_file(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, summary_rows(reps)); });
  write_file(dir / "manifest.json",
             [&](std::ostream& os) { os << manifest_json(cfg, mode, reps).dump(2) << '\n'; });
}

}  // namespace partx::app
