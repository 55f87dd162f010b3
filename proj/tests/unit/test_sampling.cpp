#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "partx/bench.hpp"
#include "partx/sampling.hpp"

using namespace partx;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), p.data());
  return p;
}

// A GP whose predictions are constant: two equal observations at the box corners.
GaussianProcess constant_gp(double c, const Hyperbox& box) {
  TrainingSet t{{box.lower(), box.upper()}, {c, c}};
  return GaussianProcess::fit(t, box);
}

}  // namespace

TEST(LatinHypercube, SinglePointInsideBox) {
  Rng rng(1);
  const auto box = Hyperbox::cube(3, 0.0, 1.0);
  const auto pts = latin_hypercube(box, 1, rng);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_TRUE(box.contains(pts[0]));
}

TEST(LatinHypercube, FourStrataInOneDimension) {
  Rng rng(2);
  const auto pts = latin_hypercube(Hyperbox::cube(1, 0.0, 1.0), 4, rng);
  std::set<int> strata;
  for (const auto& p : pts) strata.insert(static_cast<int>(std::floor(p[0] * 4)));
  EXPECT_EQ(strata, (std::set<int>{0, 1, 2, 3}));
}

TEST(LatinHypercube, EveryAxisProjectionCoversAllStrata) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Hyperbox box(std::vector<double>{-5.0, 2.0}, std::vector<double>{5.0, 3.0});
    const std::size_t n = 10;
    const auto pts = latin_hypercube(box, n, rng);
    ASSERT_EQ(pts.size(), n);
    for (std::size_t l = 0; l < 2; ++l) {
      std::vector<int> hits(n, 0);
      for (const auto& p : pts) {
        EXPECT_TRUE(box.contains(p));
        const double u = (p[static_cast<Eigen::Index>(l)] - box.lower(l)) / box.side(l);
        ++hits[std::min<std::size_t>(n - 1, static_cast<std::size_t>(u * n))];
      }
      for (int h : hits) EXPECT_EQ(h, 1);
    }
  }
}

TEST(LatinHypercube, DeterministicGivenSeed) {
  Rng a(42), b(42);
  const auto box = Hyperbox::cube(2, 0, 1);
  EXPECT_EQ(latin_hypercube(box, 7, a), latin_hypercube(box, 7, b));
}

TEST(LatinHypercube, EmptyBoxRejected) {
  EXPECT_THROW(Hyperbox(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 1.0}), EmptyBox);
}

TEST(ExpectedImprovement, SpotValues) {
  EXPECT_NEAR(expected_improvement(Prediction{2.0, 1.0}, 2.0), 0.3989423, 1e-6);
  EXPECT_LT(expected_improvement(Prediction{12.0, 1e-4}, 2.0), 1e-12);
  EXPECT_EQ(expected_improvement(Prediction{2.0, 0.0}, 1.0), 0.0);
  // Closed form against direct numerical integration of E[max(f* - Y, 0)].
  const double mean = 0.3, sd = 0.8, fs = 0.1;
  double integral = 0.0;
  const int steps = 200000;
  const double lo = mean - 12 * sd, h = (fs - lo) / steps;
  for (int i = 0; i < steps; ++i) {
    const double y = lo + (i + 0.5) * h;
    integral += (fs - y) * normal_pdf((y - mean) / sd) / sd * h;
  }
  EXPECT_NEAR(expected_improvement(Prediction{mean, sd * sd}, fs), integral, 1e-7);
}

TEST(ExpectedImprovement, NonnegativeAndZeroAtTrainingPoints) {
  const auto prob = bench::himmelblau();
  Rng rng(5);
  SampleBatch s;
  for (auto& x : latin_hypercube(prob.domain, 15, rng)) s.add(x, prob.objective(x));
  auto gp = GaussianProcess::fit(s.training(), prob.domain);
  const double fs = *std::min_element(s.values.begin(), s.values.end());
  for (int i = 0; i < 2000; ++i) EXPECT_GE(expected_improvement(gp, uniform_point(prob.domain, rng), fs), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.values[i] >= fs) {
      // The jitter leaves a residual sd of about tau * sqrt(jitter) at data sites.
      const auto p = gp.predict(s.points[i]);
      EXPECT_LT(std::sqrt(p.variance), 1e-3 * std::sqrt(gp.tau2()));
      EXPECT_LE(expected_improvement(gp, s.points[i], fs),
                std::max(fs - p.mean, 0.0) + 0.3990 * std::sqrt(p.variance) + 1e-12);
    }
}

TEST(ExpectedImprovement, MaximizerStaysInBoxAndBeatsCandidates) {
  const auto prob = bench::goldstein_price();
  Rng rng(9);
  SampleBatch s;
  for (auto& x : latin_hypercube(prob.domain, 12, rng)) s.add(x, prob.objective(x));
  auto gp = GaussianProcess::fit(s.training(), prob.domain);
  const double fs = *std::min_element(s.values.begin(), s.values.end());
  Rng r1(3);
  const Point x = maximize_expected_improvement(gp, prob.domain, fs, r1);
  EXPECT_TRUE(prob.domain.contains(x));
  Rng r2(3);
  double best = 0.0;
  for (const auto& c : latin_hypercube(prob.domain, 200, r2)) best = std::max(best, expected_improvement(gp, c, fs));
  EXPECT_GE(expected_improvement(gp, x, fs), best);
}

TEST(SampleBo, EvaluationCountIsExact) {
  const auto box = Hyperbox::cube(2, 0.0, 1.0);
  for (std::size_t existing : {0u, 2u, 3u, 7u}) {
    for (std::size_t n_bo : {0u, 1u, 4u}) {
      const std::size_t n0 = 5;
      Rng rng(existing * 10 + n_bo);
      SampleBatch pre;
      for (auto& x : latin_hypercube(box, existing, rng)) pre.add(x, x.sum() - 1.0);
      std::size_t calls = 0;
      auto f = [&](const Point& x) {
        ++calls;
        return std::sin(4 * x[0]) + x[1] - 0.5;
      };
      auto res = sample_bo(box, f, pre, n0, n_bo, rng);
      const std::size_t expect = (existing < n0 ? n0 - existing : 0) + n_bo;
      EXPECT_EQ(calls, expect);
      EXPECT_EQ(res.evaluations, expect);
      EXPECT_EQ(res.samples.size(), existing + expect);
      for (const auto& p : res.samples.points) EXPECT_TRUE(box.contains(p));
    }
  }
}

TEST(SampleBo, NoNewEvaluationsWhenInitializedAndNoBo) {
  const auto box = Hyperbox::cube(1, 0.0, 1.0);
  Rng rng(1);
  SampleBatch pre;
  for (auto& x : latin_hypercube(box, 4, rng)) pre.add(x, x[0]);
  std::size_t calls = 0;
  auto f = [&](const Point& x) {
    ++calls;
    return x[0];
  };
  auto res = sample_bo(box, f, pre, 3, 0, rng);
  EXPECT_EQ(calls, 0u);
  EXPECT_EQ(res.model->size(), 4u);
}

TEST(SampleBo, ThreePlusTwoIsFive) {
  std::size_t calls = 0;
  auto f = [&](const Point& x) {
    ++calls;
    return x.squaredNorm();
  };
  Rng rng(0);
  sample_bo(Hyperbox::cube(2, -1, 1), f, {}, 3, 2, rng);
  EXPECT_EQ(calls, 5u);
}

TEST(SampleBo, IncumbentNoWorseThanInitialDesign) {
  const Hyperbox box(std::vector<double>{2.5, 1.5}, std::vector<double>{3.5, 2.5});
  auto f = [](const Point& x) { return bench::himmelblau_shifted(x[0], x[1]); };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    auto res = sample_bo(box, f, {}, 10, 10, rng);
    const double lhs_best = *std::min_element(res.samples.values.begin(), res.samples.values.begin() + 10);
    EXPECT_LE(res.best_value, lhs_best);
    EXPECT_EQ(res.best_value, *std::min_element(res.samples.values.begin(), res.samples.values.end()));
  }
}

TEST(SampleBo, ObjectiveFailureCarriesPoint) {
  auto f = [](const Point& x) -> double {
    if (x[0] > -2.0) throw std::runtime_error("boom");
    return 0.0;
  };
  Rng rng(0);
  try {
    sample_bo(Hyperbox::cube(1, 0, 1), f, {}, 3, 1, rng);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    ASSERT_EQ(e.point().size(), 1u);
    EXPECT_GE(e.point()[0], 0.0);
  }
  auto nan = [](const Point&) { return std::nan(""); };
  EXPECT_THROW(sample_bo(Hyperbox::cube(1, 0, 1), nan, {}, 3, 1, rng), EvaluationError);
}

TEST(ClassifiedMassMetric, ConstantFields) {
  const auto box = Hyperbox::cube(2, 0, 1);
  Rng rng(1);
  EXPECT_NEAR(classified_mass_metric(constant_gp(10.0, box), box, 200, rng), 0.0, 1e-12);
  EXPECT_NEAR(classified_mass_metric(constant_gp(-10.0, box), box, 200, rng), 1.0, 1e-12);
}

TEST(ClassifiedMassMetric, ZeroMeanUnitVarianceIsHalf) {
  // Far from the data the GP reverts to mean mu = 0 with variance ~ tau2.
  TrainingSet t{{pt({0.0}), pt({0.001}), pt({0.002})}, {-1.0, 1.0, 0.0}};
  GpFitOptions opt;
  opt.fixed_theta = Eigen::VectorXd::Constant(1, 1e3);
  auto gp = GaussianProcess::fit(t, Hyperbox::cube(1, 0.0, 0.002), opt);
  const Hyperbox far(std::vector<double>{10.0}, std::vector<double>{20.0});
  Rng rng(4);
  const double m = classified_mass_metric(gp, far, 1000, rng);
  EXPECT_NEAR(m, normal_cdf(-gp.mu() / std::sqrt(gp.tau2() * (1 + 1 / gp.one_rinv_one()))), 1e-9);
  EXPECT_NEAR(m, 0.5, 0.05);
}

TEST(ClassifiedMassMetric, InUnitIntervalAndMonotoneInMeanShift) {
  const auto prob = bench::himmelblau();
  Rng rng(11);
  SampleBatch s;
  for (auto& x : latin_hypercube(prob.domain, 20, rng)) s.add(x, prob.objective(x));
  std::vector<Point> pts;
  for (int i = 0; i < 300; ++i) pts.push_back(uniform_point(prob.domain, rng));
  double prev = -1.0;
  for (double shift : {40.0, 20.0, 0.0, -20.0, -40.0, -80.0}) {
    SampleBatch t = s;
    for (auto& v : t.values) v += shift;
    GpFitOptions opt;
    opt.fixed_theta = Eigen::VectorXd::Constant(2, 5.0);
    auto gp = GaussianProcess::fit(t.training(), prob.domain, opt);
    const double m = classified_mass_metric(gp, pts);
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
    EXPECT_GE(m, prev - 1e-12);
    prev = m;
  }
}

TEST(ProportionalAllocation, Examples) {
  EXPECT_EQ(proportional_allocation(std::vector<double>{1, 1}, 4), (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(proportional_allocation(std::vector<double>{3, 1}, 4), (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(proportional_allocation(std::vector<double>{1, 1, 1}, 4), (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(proportional_allocation(std::vector<double>{0, 0, 0}, 5), (std::vector<std::size_t>{2, 2, 1}));
  EXPECT_EQ(proportional_allocation(std::vector<double>{0, 0}, 0), (std::vector<std::size_t>{0, 0}));
  EXPECT_THROW(proportional_allocation(std::vector<double>{1, -1}, 3), InvalidProbability);
}

TEST(ProportionalAllocation, FuzzedSumsAreExact) {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.index(30);
    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform() * std::pow(10.0, rng.uniform(-6, 6));
    const std::size_t total = rng.index(5000);
    const auto a = proportional_allocation(w, total);
    EXPECT_EQ(std::accumulate(a.begin(), a.end(), std::size_t{0}), total);
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n && sum > 0; ++i)
      EXPECT_LE(std::fabs(static_cast<double>(a[i]) - total * w[i] / sum), 1.0 + 1e-9);
  }
}
