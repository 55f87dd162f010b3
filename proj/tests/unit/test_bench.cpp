#include <gtest/gtest.h>

#include <cmath>

#include "partx/bench.hpp"

using namespace partx;
using namespace partx::bench;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), p.data());
  return p;
}

// Second evaluation path, written from the textbook definitions with pow().
double gp_ref(double x, double y) {
  const double t1 = 1 + std::pow(x + y + 1, 2) *
                            (19 - 14 * x + 3 * std::pow(x, 2) - 14 * y + 6 * x * y + 3 * std::pow(y, 2));
  const double t2 = 30 + std::pow(2 * x - 3 * y, 2) *
                             (18 - 32 * x + 12 * std::pow(x, 2) + 48 * y - 36 * x * y + 27 * std::pow(y, 2));
  return t1 * t2 - 50;
}
double hb_ref(double x, double y) { return std::pow(x * x + y - 11, 2) + std::pow(x + y * y - 7, 2) - 40; }
double rb_ref(const Point& x) {
  double s = -20;
  for (Eigen::Index i = 0; i < x.size() - 1; ++i)
    s += 100 * std::pow(x[i + 1] - std::pow(x[i], 2), 2) + std::pow(1 - x[i], 2);
  return s;
}

bool rel_close(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

}  // namespace

TEST(Rosenbrock, SpotValues) {
  EXPECT_EQ(rosenbrock_shifted(pt({1, 1})), -20.0);
  EXPECT_EQ(rosenbrock_shifted(pt({0, 0})), -19.0);
  EXPECT_EQ(rosenbrock_shifted(pt({-1, 1})), -16.0);
  EXPECT_EQ(rosenbrock_shifted(pt({1, 1, 1, 1})), -20.0);
  EXPECT_THROW(rosenbrock_shifted(pt({1})), DimensionTooSmall);
}

TEST(GoldsteinPrice, SpotValues) {
  EXPECT_EQ(goldstein_price_shifted(0, -1), -47.0);
  // (1 + 1*19) * (30 + 0) - 50: the second factor vanishes on 2x = 3y.
  EXPECT_EQ(goldstein_price_shifted(0, 0), 550.0);
  EXPECT_EQ(goldstein_price_shifted(1, 1), 28.0 * 67 - 50);  // (1 + 9*3) * (30 + 1*37)
  for (double x : {-1.0, 1.0})
    for (double y : {-1.0, 1.0}) EXPECT_TRUE(rel_close(goldstein_price_shifted(x, y), gp_ref(x, y), 1e-12));
}

TEST(Himmelblau, SpotValues) {
  EXPECT_EQ(himmelblau_shifted(3, 2), -40.0);
  EXPECT_NEAR(himmelblau_shifted(-2.805118, 3.131312), -40.0, 1e-3);
  EXPECT_EQ(himmelblau_shifted(0, 0), 130.0);
}

TEST(Benchmarks, AgreeWithSecondImplementation) {
  Rng rng(2718);
  for (int i = 0; i < 1000000; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    ASSERT_TRUE(rel_close(rosenbrock_shifted(pt({a, b})), rb_ref(pt({a, b})), 1e-9));
    ASSERT_TRUE(rel_close(goldstein_price_shifted(a, b), gp_ref(a, b), 1e-9));
    const double c = 5 * a, d = 5 * b;
    ASSERT_TRUE(rel_close(himmelblau_shifted(c, d), hb_ref(c, d), 1e-9));
  }
}

TEST(Benchmarks, Registry) {
  for (const auto& n : problem_names()) {
    auto p = find_problem(n);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->name, n);
    EXPECT_EQ(p->domain.dim(), 2u);
  }
  EXPECT_FALSE(find_problem("nope"));
  EXPECT_DOUBLE_EQ(himmelblau().domain.volume(), 100.0);
  EXPECT_DOUBLE_EQ(goldstein_price().domain.volume(), 4.0);
}

TEST(MonteCarloOracle, BoundedAndShrinkingError) {
  const auto p = goldstein_price();
  Rng r1(1), r2(2);
  const auto a = mc_volume_oracle(p, 10000, r1);
  const auto b = mc_volume_oracle(p, 160000, r2);
  for (const auto& e : {a, b}) {
    EXPECT_GE(e.estimate, 0.0);
    EXPECT_LE(e.estimate, p.domain.volume());
  }
  EXPECT_NEAR(a.standard_error / b.standard_error, 4.0, 0.4);
  EXPECT_EQ(b.samples, 160000u);
  EXPECT_THROW(mc_volume_oracle(p, 0, r1), ConfigInvalid);
}

TEST(MonteCarloOracle, ExtremesAreExact) {
  Rng rng(0);
  const auto box = Hyperbox::cube(2, 0, 2);
  EXPECT_EQ(mc_volume_oracle(box, [](const Point&) { return -1.0; }, 100, rng).estimate, 4.0);
  EXPECT_EQ(mc_volume_oracle(box, [](const Point&) { return 1.0; }, 100, rng).estimate, 0.0);
  const auto half = mc_volume_oracle(box, [](const Point& x) { return x[0] - 1.0; }, 200000, rng);
  EXPECT_NEAR(half.estimate, 2.0, 4 * half.standard_error);
}
