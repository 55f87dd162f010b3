#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "partx/errors.hpp"
#include "partx/gp.hpp"
#include "partx/hyperbox.hpp"
#include "partx/normal.hpp"
#include "partx/random.hpp"

namespace partx {

/// Evaluated points of one subregion.
struct SampleBatch {
  std::vector<Point> points;
  std::vector<double> values;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  void add(Point x, double y) {
    points.push_back(std::move(x));
    values.push_back(y);
  }

  TrainingSet training() const { return {points, values}; }
};

/// One point per stratum in every dimension, strata shuffled independently.
inline std::vector<Point> latin_hypercube(const Hyperbox& box, std::size_t count, Rng& rng) {
  if (count == 0) return {};
  const std::size_t d = box.dim();
  std::vector<Point> out(count, Point(static_cast<Eigen::Index>(d)));
  std::vector<std::size_t> perm(count);
  for (std::size_t l = 0; l < d; ++l) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = count - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    const double lo = box.lower(l), width = box.side(l) / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double u = rng.uniform();
      double v = lo + width * (static_cast<double>(perm[i]) + u);
      out[i][static_cast<Eigen::Index>(l)] = std::min(v, box.upper(l));
    }
  }
  return out;
}

inline Point uniform_point(const Hyperbox& box, Rng& rng) {
  Point x(static_cast<Eigen::Index>(box.dim()));
  for (std::size_t l = 0; l < box.dim(); ++l)
    x[static_cast<Eigen::Index>(l)] = rng.uniform(box.lower(l), box.upper(l));
  return x;
}

/// Closed-form EI for minimization: (f* - y) Phi(z) + s phi(z), z = (f* - y)/s.
inline double expected_improvement(const Prediction& p, double f_star) {
  if (!(p.variance > 0.0)) return 0.0;
  const double s = std::sqrt(p.variance);
  const double diff = f_star - p.mean;
  const double z = diff / s;
  return std::max(diff * normal_cdf(z) + s * normal_pdf(z), 0.0);
}

inline double expected_improvement(const GaussianProcess& gp, const Point& x, double f_star) {
  return expected_improvement(gp.predict(x), f_star);
}

/// Scores EI on 100*d Latin-hypercube candidates, then polishes the winner with
/// a compass search (at most `refine_steps` moves) confined to the box.
inline Point maximize_expected_improvement(const GaussianProcess& gp, const Hyperbox& box,
                                           double f_star, Rng& rng, int refine_steps = 50) {
  const std::size_t d = box.dim();
  const auto candidates = latin_hypercube(box, 100 * d, rng);
  std::size_t best = 0;
  double best_ei = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double ei = expected_improvement(gp, candidates[i], f_star);
    if (ei > best_ei) {
      best_ei = ei;
      best = i;
    }
  }
  Point x = candidates[best];
  if (best_ei <= 0.0) return x;
  double step = 0.1;
  for (int it = 0; it < refine_steps && step > 1e-6; ++it) {
    Point move = x;
    double move_ei = best_ei;
    for (std::size_t l = 0; l < d; ++l) {
      for (double sign : {-1.0, 1.0}) {
        Point y = x;
        const auto i = static_cast<Eigen::Index>(l);
        y[i] = std::clamp(y[i] + sign * step * box.side(l), box.lower(l), box.upper(l));
        const double ei = expected_improvement(gp, y, f_star);
        if (ei > move_ei) {
          move_ei = ei;
          move = std::move(y);
        }
      }
    }
    if (move_ei > best_ei) {
      x = std::move(move);
      best_ei = move_ei;
    } else {
      step *= 0.5;
    }
  }
  return x;
}

/// Calls the objective, turning any failure or non-finite output into EvaluationError.
template <typename Objective>
double evaluate_objective(Objective& objective, const Point& x) {
  double y;
  try {
    y = static_cast<double>(objective(x));
  } catch (const EvaluationError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationError(std::string("objective failed: ") + e.what(), to_std(x));
  }
  if (!std::isfinite(y)) throw EvaluationError("objective returned a non-finite value", to_std(x));
  return y;
}

struct SampleBoResult {
  SampleBatch samples;
  std::shared_ptr<const GaussianProcess> model;
  Point best_point;
  double best_value = 0.0;
  std::size_t evaluations = 0;
};

/// Sequential subregion sampling: tops the region up to n0 points with a
/// Latin hypercube, then adds n_bo Expected-Improvement maximizers, refitting
/// the surrogate after every evaluation. Exactly max(n0 - |existing|, 0) + n_bo
/// objective calls are made.
template <typename Objective>
SampleBoResult sample_bo(const Hyperbox& box, Objective&& objective, SampleBatch existing,
                         std::size_t n0, std::size_t n_bo, Rng& rng,
                         const GpFitOptions& fit_options = {}) {
  SampleBoResult res;
  res.samples = std::move(existing);
  if (res.samples.size() < n0) {
    for (auto& x : latin_hypercube(box, n0 - res.samples.size(), rng)) {
      const double y = evaluate_objective(objective, x);
      res.samples.add(std::move(x), y);
      ++res.evaluations;
    }
  }

  auto incumbent = [&res] {
    const auto it = std::min_element(res.samples.values.begin(), res.samples.values.end());
    return static_cast<std::size_t>(it - res.samples.values.begin());
  };

  auto gp = GaussianProcess::fit(res.samples.training(), box, fit_options);
  GpFitOptions refit = fit_options;
  for (std::size_t t = 0; t < n_bo; ++t) {
    const double f_star = res.samples.values[incumbent()];
    Point x = maximize_expected_improvement(gp, box, f_star, rng);
    const double y = evaluate_objective(objective, x);
    res.samples.add(std::move(x), y);
    ++res.evaluations;
    refit.warm_start = gp.theta();
    // Intermediate refits only polish the previous theta; the final fit restarts fully.
    refit.restarts = (t + 1 == n_bo) ? fit_options.restarts : 0;
    gp = GaussianProcess::fit(res.samples.training(), box, refit);
  }
  const std::size_t b = incumbent();
  res.best_point = res.samples.points[b];
  res.best_value = res.samples.values[b];
  res.model = std::make_shared<const GaussianProcess>(std::move(gp));
  return res;
}

/// Mean over the given points of P(Y(x) < 0) under the surrogate; the
/// zero-variance limit is the indicator mean < 0.
inline double classified_mass_metric(const GaussianProcess& gp, std::span<const Point> points) {
  if (points.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& x : points) {
    const Prediction p = gp.predict(x);
    if (p.variance > 0.0)
      acc += normal_cdf(-p.mean / std::sqrt(p.variance));
    else
      acc += p.mean < 0.0 ? 1.0 : 0.0;
  }
  return acc / static_cast<double>(points.size());
}

inline double classified_mass_metric(const GaussianProcess& gp, const Hyperbox& box,
                                     std::size_t mc_count, Rng& rng) {
  std::vector<Point> pts;
  pts.reserve(mc_count);
  for (std::size_t i = 0; i < mc_count; ++i) pts.push_back(uniform_point(box, rng));
  return classified_mass_metric(gp, pts);
}

/// Largest-remainder rounding of total * w_i / sum(w); ties go to the lowest
/// index. All-zero weights fall back to an equal split.
inline std::vector<std::size_t> proportional_allocation(std::span<const double> weights,
                                                        std::size_t total) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out(n, 0);
  if (n == 0 || total == 0) return out;
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw InvalidProbability("proportional_allocation: weights must be finite and nonnegative");
    sum += w;
  }
  std::vector<double> share(n);
  for (std::size_t i = 0; i < n; ++i)
    share[i] = sum > 0.0 ? static_cast<double>(total) * weights[i] / sum
                         : static_cast<double>(total) / static_cast<double>(n);
  std::size_t assigned = 0;
  std::vector<double> remainder(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::size_t>(std::floor(share[i]));
    remainder[i] = share[i] - static_cast<double>(out[i]);
    assigned += out[i];
  }
  // Rounding can overshoot by a unit when shares are computed in floating point.
  while (assigned > total) {
    const auto it = std::max_element(out.begin(), out.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % n, ++assigned) ++out[order[k]];
  return out;
}

}  // namespace partx
