// partx command-line front end: run, evaluate, oracle.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "partx/app/config.hpp"
#include "partx/app/io.hpp"
#include "partx/app/runner.hpp"
#include "partx/bench.hpp"
#include "partx/core.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitEvaluation = 3;

struct Overrides {
  std::string config_path;
  std::string problem;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> macro_reps;
  std::string out;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--problem", o.problem, "benchmark name (rosenbrock, goldstein_price, himmelblau)");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--macro-reps", o.macro_reps, "number of macro-replications");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--jobs", o.jobs, "worker threads for macro-replications");
}

partx::app::RunConfig resolve(const Overrides& o) {
  partx::app::RunConfig cfg;
  if (!o.config_path.empty()) cfg = partx::app::load_config(o.config_path);
  if (!o.problem.empty()) {
    cfg.problem = o.problem;
    cfg.command.clear();
  }
  if (o.seed) cfg.partx.seed = *o.seed;
  if (o.macro_reps) cfg.partx.macro_reps = *o.macro_reps;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  return cfg;
}

void print_summary(const std::vector<partx::app::Replication>& reps) {
  for (const auto& row : partx::app::summary_rows(reps))
    std::printf("%-24s mean=%-14.6g std_err=%-12.4g n=%zu\n", row.metric.c_str(), row.mean, row.std_err, row.n);
}

int cmd_run(const Overrides& o) {
  auto cfg = resolve(o);
  partx::app::validate(cfg, true);
  const auto domain = partx::app::resolve_domain(cfg);
  auto reps = partx::app::run_replications(cfg.partx, domain, partx::app::make_objective(cfg), cfg.jobs);
  partx::app::write_outputs(cfg.output_dir, cfg, "run", reps);
  print_summary(reps);
  for (const auto& r : reps)
    if (r.report.aborted) {
      std::fprintf(stderr, "replication %zu aborted: %s\n", r.index, r.report.error.c_str());
      return kExitEvaluation;
    }
  return 0;
}

int cmd_evaluate(const Overrides& o, const std::string& samples_path) {
  auto cfg = resolve(o);
  partx::app::validate(cfg, false);
  const auto domain = partx::app::resolve_domain(cfg);
  std::ifstream in(samples_path);
  if (!in) throw partx::ConfigInvalid("cannot open samples file '" + samples_path + "'");
  const auto samples = partx::app::read_samples_csv(in, domain.dim());
  std::vector<partx::app::Replication> reps(1);
  reps[0].seed = cfg.partx.seed;
  reps[0].report = partx::evaluate_samples(samples, domain, cfg.partx);
  partx::app::write_outputs(cfg.output_dir, cfg, "evaluate", reps);
  print_summary(reps);
  return 0;
}

int cmd_oracle(const Overrides& o, std::size_t count) {
  auto cfg = resolve(o);
  if (cfg.problem.empty()) throw partx::ConfigInvalid("oracle needs --problem");
  const auto problem = partx::bench::find_problem(cfg.problem);
  if (!problem) throw partx::ConfigInvalid("unknown problem '" + cfg.problem + "'");
  partx::Rng rng(cfg.partx.seed);
  const auto est = partx::bench::mc_volume_oracle(*problem, count, rng);
  std::printf("problem=%s samples=%zu negatives=%zu volume=%s std_err=%s\n", problem->name.c_str(), est.samples,
              est.negatives, partx::app::format_double(est.estimate).c_str(),
              partx::app::format_double(est.standard_error).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // External objectives may exit without reading their input.
  std::signal(SIGPIPE, SIG_IGN);

  CLI::App app{"Adaptive partitioning falsification-volume estimator"};
  app.require_subcommand(1);
  Overrides o;
  std::string samples_path;
  std::size_t oracle_count = 1000000;

  auto* run = app.add_subcommand("run", "run seeded macro-replications on a benchmark or external objective");
  add_common(run, o);
  auto* evaluate = app.add_subcommand("evaluate", "partition an existing sample file without new evaluations");
  add_common(evaluate, o);
  evaluate->add_option("--samples", samples_path, "CSV of x_0..x_{d-1},value rows")->required();
  auto* oracle = app.add_subcommand("oracle", "plain Monte Carlo estimate of a benchmark's negative volume");
  add_common(oracle, o);
  oracle->add_option("--samples", oracle_count, "number of uniform draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(o);
    if (*evaluate) return cmd_evaluate(o, samples_path);
    return cmd_oracle(o, oracle_count);
  } catch (const partx::ConfigInvalid& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const partx::EvaluationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEvaluation;
  } catch (const partx::PointOutsideDomain& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const partx::MalformedRow& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
