#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "partx/errors.hpp"
#include "partx/hyperbox.hpp"
#include "partx/random.hpp"

namespace partx::bench {

/// sum_{i<d} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2, shifted down by 20.
inline double rosenbrock_shifted(const Point& x) {
  if (x.size() < 2) throw DimensionTooSmall("rosenbrock_shifted: need d >= 2");
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    s += 100.0 * a * a + b * b;
  }
  return s - 20.0;
}

inline double goldstein_price_shifted(double x, double y) {
  const double a = x + y + 1.0;
  const double b = 2.0 * x - 3.0 * y;
  const double f1 = 1.0 + a * a * (19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y + 3.0 * y * y);
  const double f2 =
      30.0 + b * b * (18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y + 27.0 * y * y);
  return f1 * f2 - 50.0;
}

inline double himmelblau_shifted(double x, double y) {
  const double a = x * x + y - 11.0;
  const double b = x + y * y - 7.0;
  return a * a + b * b - 40.0;
}

struct BenchmarkProblem {
  std::string name;
  Hyperbox domain;
  std::function<double(const Point&)> objective;
  /// Published uniform Monte-Carlo estimate of the negative volume.
  std::optional<double> reference_negative_volume;
  std::string reference_note;
};

inline BenchmarkProblem rosenbrock(std::size_t dim = 2) {
  return {"rosenbrock", Hyperbox::cube(dim, -1.0, 1.0),
          [](const Point& x) { return rosenbrock_shifted(x); },
          dim == 2 ? std::optional<double>(1.626) : std::nullopt,
          "uniform Monte-Carlo row of the reference results table (d = 2)"};
}

inline BenchmarkProblem goldstein_price() {
  return {"goldstein_price", Hyperbox::cube(2, -1.0, 1.0),
          [](const Point& x) { return goldstein_price_shifted(x[0], x[1]); }, 0.302,
          "uniform Monte-Carlo row of the reference results table"};
}

inline BenchmarkProblem himmelblau() {
  return {"himmelblau", Hyperbox::cube(2, -5.0, 5.0),
          [](const Point& x) { return himmelblau_shifted(x[0], x[1]); }, 17.030,
          "uniform Monte-Carlo row of the reference results table; that row used few samples "
          "and a 2e7-sample estimate gives 17.650"};
}

inline std::vector<std::string> problem_names() { return {"rosenbrock", "goldstein_price", "himmelblau"}; }

inline std::optional<BenchmarkProblem> find_problem(const std::string& name) {
  if (name == "rosenbrock") return rosenbrock();
  if (name == "goldstein_price") return goldstein_price();
  if (name == "himmelblau") return himmelblau();
  return std::nullopt;
}

struct VolumeEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t negatives = 0;
  std::size_t samples = 0;
};

/// v(S) * fraction of uniform samples with objective < 0, with binomial standard error.
template <typename Objective>
VolumeEstimate mc_volume_oracle(const Hyperbox& domain, Objective&& objective,
                                std::size_t sample_count, Rng& rng) {
  if (sample_count == 0) throw ConfigInvalid("mc_volume_oracle: sample_count must be positive");
  std::size_t neg = 0;
  Point x(static_cast<Eigen::Index>(domain.dim()));
  for (std::size_t i = 0; i < sample_count; ++i) {
    for (std::size_t l = 0; l < domain.dim(); ++l)
      x[static_cast<Eigen::Index>(l)] = rng.uniform(domain.lower(l), domain.upper(l));
    if (objective(x) < 0.0) ++neg;
  }
  const double n = static_cast<double>(sample_count);
  const double p = static_cast<double>(neg) / n;
  const double v = domain.volume();
  return {v * p, v * std::sqrt(p * (1.0 - p) / n), neg, sample_count};
}

inline VolumeEstimate mc_volume_oracle(const BenchmarkProblem& problem, std::size_t sample_count,
                                       Rng& rng) {
  return mc_volume_oracle(problem.domain, problem.objective, sample_count, rng);
}

}  // namespace partx::bench
