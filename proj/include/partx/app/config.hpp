#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "partx/bench.hpp"
#include "partx/core.hpp"
#include "partx/errors.hpp"
#include "partx/hyperbox.hpp"

namespace partx::app {

using nlohmann::json;

/// Everything a `run` or `evaluate` invocation needs. Exactly one objective
/// source: a registered benchmark name or an external command.
struct RunConfig {
  std::string problem;                  // benchmark name, empty when `command` is set
  std::vector<std::string> command;     // argv of the external objective
  std::optional<Hyperbox> domain;       // required with `command`, optional override otherwise
  PartXConfig partx;
  std::string output_dir = "partx_out";
  std::size_t jobs = 1;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigInvalid("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigInvalid("config: unknown key '" + where + key + "'");
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigInvalid("config: bad value for '" + where + key + "'");
  }
}

inline void read_count(const json& obj, const char* key, std::size_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigInvalid("config: '" + where + key + "' must be a non-negative integer");
  out = v.get<std::size_t>();
}

inline void read_gp(const json& obj, GpFitOptions& gp) {
  const std::string w = "partx.gp.";
  reject_unknown(obj, {"restarts", "max_evaluations_per_start", "log10_theta_min", "log10_theta_max"}, w);
  read_field(obj, "restarts", gp.restarts, w);
  read_field(obj, "max_evaluations_per_start", gp.max_evaluations_per_start, w);
  read_field(obj, "log10_theta_min", gp.log10_theta_min, w);
  read_field(obj, "log10_theta_max", gp.log10_theta_max, w);
  if (gp.restarts < 1 || gp.max_evaluations_per_start < 1 || !(gp.log10_theta_min < gp.log10_theta_max))
    throw ConfigInvalid("config: invalid 'partx.gp' settings");
}

inline void read_partx(const json& obj, PartXConfig& c) {
  const std::string w = "partx.";
  reject_unknown(obj,
                 {"n0", "n_bo", "n_c", "budget", "mc_reps", "mc_draws", "cuts", "delta_c", "delta_v", "alpha",
                  "epsilon", "seed", "macro_reps", "quantile_levels", "volume_mc_count", "metric_mc_per_dim",
                  "max_fit_points", "gp"},
                 w);
  read_count(obj, "n0", c.n0, w);
  read_count(obj, "n_bo", c.n_bo, w);
  read_count(obj, "n_c", c.n_c, w);
  read_count(obj, "budget", c.budget, w);
  read_count(obj, "mc_reps", c.mc_reps, w);
  read_count(obj, "mc_draws", c.mc_draws, w);
  read_count(obj, "cuts", c.cuts, w);
  read_field(obj, "delta_c", c.delta_c, w);
  read_field(obj, "delta_v", c.delta_v, w);
  read_field(obj, "alpha", c.alpha, w);
  read_field(obj, "epsilon", c.epsilon, w);
  if (obj.contains("seed")) {
    const auto& v = obj.at("seed");
    if (!v.is_number_unsigned())
      throw ConfigInvalid("config: 'partx.seed' must be a non-negative integer");
    c.seed = v.get<std::uint64_t>();
  }
  read_count(obj, "macro_reps", c.macro_reps, w);
  read_field(obj, "quantile_levels", c.quantile_levels, w);
  read_count(obj, "volume_mc_count", c.volume_mc_count, w);
  read_count(obj, "metric_mc_per_dim", c.metric_mc_per_dim, w);
  read_count(obj, "max_fit_points", c.max_fit_points, w);
  if (obj.contains("gp")) read_gp(obj.at("gp"), c.gp);
}

inline Hyperbox read_domain(const json& obj) {
  reject_unknown(obj, {"lower", "upper"}, "domain.");
  std::vector<double> lo, hi;
  read_field(obj, "lower", lo, "domain.");
  read_field(obj, "upper", hi, "domain.");
  try {
    return Hyperbox(lo, hi);
  } catch (const Error& e) {
    throw ConfigInvalid(std::string("config: invalid domain: ") + e.what());
  }
}

}  // namespace detail

/// Top-level keys: problem, command, domain{lower,upper}, partx{...}, output_dir, jobs.
/// Unknown keys anywhere are rejected.
inline RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  detail::reject_unknown(doc, {"problem", "command", "domain", "partx", "output_dir", "jobs"}, "");
  detail::read_field(doc, "problem", cfg.problem, "");
  if (doc.contains("command")) {
    const auto& c = doc.at("command");
    if (c.is_string()) cfg.command = {"/bin/sh", "-c", c.get<std::string>()};
    else detail::read_field(doc, "command", cfg.command, "");
    if (cfg.command.empty()) throw ConfigInvalid("config: 'command' must not be empty");
  }
  if (doc.contains("domain")) cfg.domain = detail::read_domain(doc.at("domain"));
  if (doc.contains("partx")) detail::read_partx(doc.at("partx"), cfg.partx);
  detail::read_field(doc, "output_dir", cfg.output_dir, "");
  detail::read_count(doc, "jobs", cfg.jobs, "");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigInvalid(std::string("config: parse error: ") + e.what());
  }
  return parse_config(doc);
}

/// Checks the objective source and domain. Called after command-line overrides.
inline void validate(const RunConfig& cfg, bool need_objective) {
  if (!cfg.problem.empty() && !cfg.command.empty())
    throw ConfigInvalid("config: give either 'problem' or 'command', not both");
  if (need_objective && cfg.problem.empty() && cfg.command.empty())
    throw ConfigInvalid("config: no objective; set 'problem' or 'command'");
  if (!cfg.problem.empty() && !bench::find_problem(cfg.problem))
    throw ConfigInvalid("config: unknown problem '" + cfg.problem + "'");
  if (cfg.problem.empty() && !cfg.domain) throw ConfigInvalid("config: 'domain' is required");
  if (cfg.jobs < 1) throw ConfigInvalid("config: 'jobs' must be >= 1");
  cfg.partx.validate();
}

/// The search domain: explicit override, else the benchmark's own.
inline Hyperbox resolve_domain(const RunConfig& cfg) {
  if (cfg.domain) return *cfg.domain;
  return bench::find_problem(cfg.problem)->domain;
}

inline json to_json(const Hyperbox& b) {
  return {{"lower", to_std(b.lower())}, {"upper", to_std(b.upper())}};
}

/// Full config echo with every default filled in.
inline json to_json(const RunConfig& cfg) {
  const auto& c = cfg.partx;
  json j;
  if (!cfg.problem.empty()) j["problem"] = cfg.problem;
  if (!cfg.command.empty()) j["command"] = cfg.command;
  if (cfg.domain) j["domain"] = to_json(*cfg.domain);
  j["partx"] = {{"n0", c.n0},
                {"n_bo", c.n_bo},
                {"n_c", c.n_c},
                {"budget", c.budget},
                {"mc_reps", c.mc_reps},
                {"mc_draws", c.mc_draws},
                {"cuts", c.cuts},
                {"delta_c", c.delta_c},
                {"delta_v", c.delta_v},
                {"alpha", c.alpha},
                {"epsilon", c.epsilon},
                {"seed", c.seed},
                {"macro_reps", c.macro_reps},
                {"quantile_levels", c.quantile_levels},
                {"volume_mc_count", c.volume_mc_count},
                {"metric_mc_per_dim", c.metric_mc_per_dim},
                {"max_fit_points", c.max_fit_points},
                {"gp",
                 {{"restarts", c.gp.restarts},
                  {"max_evaluations_per_start", c.gp.max_evaluations_per_start},
                  {"log10_theta_min", c.gp.log10_theta_min},
                  {"log10_theta_max", c.gp.log10_theta_max}}}};
  j["output_dir"] = cfg.output_dir;
  j["jobs"] = cfg.jobs;
  return j;
}

}  // namespace partx::app
