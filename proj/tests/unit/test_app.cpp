#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "partx/app/config.hpp"
#include "partx/app/external.hpp"
#include "partx/app/io.hpp"
#include "partx/app/runner.hpp"

using namespace partx;
using namespace partx::app;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("partx_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PARTX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

PartXConfig small_config() {
  PartXConfig c;
  c.budget = 60;
  c.n_c = 10;
  c.volume_mc_count = 200;
  return c;
}

}  // namespace

TEST(Io, DoubleRoundTrip) {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform(-60, 60)));
    double back = 0;
    ASSERT_TRUE(parse_double(format_double(v), back));
    ASSERT_EQ(back, v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  double x;
  EXPECT_TRUE(parse_double(" +2.5 ", x));
  EXPECT_EQ(x, 2.5);
  EXPECT_FALSE(parse_double("2.5x", x));
  EXPECT_FALSE(parse_double("", x));
}

TEST(Io, Headers) {
  EXPECT_EQ(leaf_csv_header(2),
            "lower_0,lower_1,upper_0,upper_1,label,level,birth_iteration,sample_count,q_min_mean,q_max_mean");
  EXPECT_EQ(samples_csv_header(3), "x_0,x_1,x_2,value");
  EXPECT_EQ(std::string(kSummaryHeader), "metric,mean,std_err,n");
  EXPECT_EQ(split_csv_line("a,,b"), (std::vector<std::string>{"a", "", "b"}));
}

TEST(Io, SamplesRoundTrip) {
  SampleBatch s;
  s.add(Point::Constant(2, 0.1), -3.25);
  s.add(Point::Constant(2, -0.7), 1e-9);
  std::stringstream ss;
  write_samples_csv(ss, s, 2);
  EXPECT_EQ(first_line(ss.str()), "x_0,x_1,value");
  const auto back = read_samples_csv(ss, 2);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.values[0], -3.25);
  EXPECT_EQ(back.points[1][1], -0.7);

  std::stringstream bad("0.1,0.2,1\n0.1,oops,2\n");
  try {
    read_samples_csv(bad, 2);
    FAIL();
  } catch (const MalformedRow& e) {
    EXPECT_EQ(e.row(), 1u);  // data rows count from 0
  }
}

TEST(Config, DefaultsAndUnknownKeys) {
  const auto c = parse_config(nlohmann::json::parse(R"({"problem":"himmelblau"})"));
  EXPECT_EQ(c.partx.n0, 10u);
  EXPECT_EQ(c.partx.budget, 5000u);
  EXPECT_EQ(c.partx.delta_v, 0.001);
  EXPECT_EQ(c.jobs, 1u);
  EXPECT_NO_THROW(validate(c, true));
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"probelm":"x"})")), ConfigInvalid);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"partx":{"nO":3}})")), ConfigInvalid);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"partx":{"seed":-1}})")), ConfigInvalid);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"domain":{"lower":[1],"upper":[0]}})")), ConfigInvalid);
  EXPECT_THROW(validate(parse_config(nlohmann::json::parse(R"({"problem":"nope"})")), true), ConfigInvalid);
  EXPECT_THROW(validate(parse_config(nlohmann::json::parse(R"({"command":"true"})")), true), ConfigInvalid);
}

TEST(Config, EchoParsesBack) {
  auto c = parse_config(nlohmann::json::parse(
      R"({"command":["echo","1"],"domain":{"lower":[0,0],"upper":[1,2]},"partx":{"cuts":3,"seed":9}})"));
  const auto again = parse_config(to_json(c));
  EXPECT_EQ(again.command, c.command);
  EXPECT_EQ(again.partx.cuts, 3u);
  EXPECT_EQ(again.partx.seed, 9u);
  EXPECT_EQ(again.domain->upper(1), 2.0);
}

TEST(External, ReadsValueFromChild) {
  ExternalObjective f({"/bin/sh", "-c", "IFS=, read a b; echo \"$a + 2 * $b\" | awk -F'[+*]' '{print $1 + $2 * $3}'"});
  Point x(2);
  x << 1.5, -0.25;
  EXPECT_DOUBLE_EQ(f(x), 1.0);
}

TEST(External, FailuresBecomeEvaluationErrors) {
  Point x = Point::Zero(2);
  EXPECT_THROW(ExternalObjective({"/bin/sh", "-c", "exit 4"})(x), EvaluationError);
  EXPECT_THROW(ExternalObjective({"/bin/sh", "-c", "echo banana"})(x), EvaluationError);
  EXPECT_THROW(ExternalObjective({"/nonexistent/objective"})(x), EvaluationError);
}

TEST(Runner, ParallelMatchesSerial) {
  auto cfg = small_config();
  cfg.macro_reps = 3;
  cfg.seed = 11;
  const auto p = bench::goldstein_price();
  const auto a = run_replications(cfg, p.domain, p.objective, 1);
  const auto b = run_replications(cfg, p.domain, p.objective, 3);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].seed, 11u + i);
    EXPECT_EQ(b[i].seed, a[i].seed);
    EXPECT_EQ(a[i].report.samples.values, b[i].report.samples.values);
    EXPECT_EQ(a[i].report.volumes.hyperbox_volume, b[i].report.volumes.hyperbox_volume);
  }
  std::stringstream sa, sb;
  write_summary_csv(sa, summary_rows(a));
  write_summary_csv(sb, summary_rows(b));
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Runner, SummaryStatistics) {
  const auto r = summarize("m", {1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_NEAR(r.std_err, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(summarize("m", {7.0}).std_err, 0.0);
  EXPECT_EQ(quantile_metric_name(0.95), "quantile_volume_0.95");
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("exit");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("run --problem nope --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("bogus"), 2);

  std::ofstream(dir / "bad.json") << R"({"problem":"himmelblau","partx":{"budget":3}})";
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string() + " --out " + dir.string()), 2);

  std::ofstream(dir / "fail.json")
      << R"({"command":"exit 1","domain":{"lower":[0,0],"upper":[1,1]},"partx":{"budget":20}})";
  EXPECT_EQ(run_cli("run --config " + (dir / "fail.json").string() + " --out " + (dir / "f").string()), 3);
  EXPECT_TRUE(fs::exists(dir / "f" / "manifest.json"));

  std::ofstream(dir / "outside.csv") << "9,9,1\n";
  EXPECT_EQ(run_cli("evaluate --problem goldstein_price --samples " + (dir / "outside.csv").string() + " --out " +
                    (dir / "o").string()),
            2);
  fs::remove_all(dir);
}

TEST(Cli, RepeatRunsAreByteIdentical) {
  const auto dir = scratch_dir("repeat");
  std::ofstream(dir / "cfg.json")
      << R"({"problem":"goldstein_price","partx":{"budget":60,"n_c":10,"macro_reps":2,"seed":4}})";
  const std::string base = "run --config " + (dir / "cfg.json").string() + " --jobs 2 --out ";
  ASSERT_EQ(run_cli(base + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli(base + (dir / "b").string()), 0);
  for (const char* f : {"summary.csv", "replications.csv", "leaves_0.csv", "samples_1.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  // The manifest echoes the output directory and nothing else differs.
  auto ma = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  auto mb = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
  ma["config"].erase("output_dir");
  mb["config"].erase("output_dir");
  EXPECT_EQ(ma, mb);
  EXPECT_EQ(first_line(slurp(dir / "a" / "summary.csv")), "metric,mean,std_err,n");
  EXPECT_EQ(first_line(slurp(dir / "a" / "replications.csv")).rfind(kReplicationsHeader, 0), 0u);
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["mode"], "run");
  EXPECT_EQ(manifest["replications"].size(), 2u);
  EXPECT_EQ(manifest["replications"][1]["seed"], 5);
  fs::remove_all(dir);
}

TEST(Cli, EvaluateEmptySampleFile) {
  const auto dir = scratch_dir("empty");
  std::ofstream(dir / "empty.csv") << "x_0,x_1,value\n";
  ASSERT_EQ(run_cli("evaluate --problem goldstein_price --samples " + (dir / "empty.csv").string() + " --out " +
                    (dir / "o").string()),
            0);
  const auto summary = slurp(dir / "o" / "summary.csv");
  EXPECT_NE(summary.find("hyperbox_volume,4,0,1"), std::string::npos) << summary;
  fs::remove_all(dir);
}

TEST(Cli, ConstantPositiveExternalObjective) {
  const auto dir = scratch_dir("const");
  std::ofstream(dir / "cfg.json")
      << R"({"command":["/bin/sh","-c","cat >/dev/null; echo 1"],"domain":{"lower":[0,0],"upper":[1,1]},)"
      << R"("partx":{"budget":10,"macro_reps":2}})";
  ASSERT_EQ(run_cli("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "o").string()), 0);
  const auto summary = slurp(dir / "o" / "summary.csv");
  EXPECT_NE(summary.find("falsification_rate,0,0,2"), std::string::npos) << summary;
  std::ifstream reps(dir / "o" / "replications.csv");
  std::string line;
  std::getline(reps, line);
  int rows = 0;
  while (std::getline(reps, line)) {
    const auto f = split_csv_line(line);
    EXPECT_EQ(f[2], "10");  // evaluations
    EXPECT_EQ(f[6], "0");   // violating volume
    ++rows;
  }
  EXPECT_EQ(rows, 2);
  fs::remove_all(dir);
}
