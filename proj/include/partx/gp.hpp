#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "partx/errors.hpp"
#include "partx/hyperbox.hpp"
#include "partx/normal.hpp"

namespace partx {

/// Noiseless observations of the objective.
struct TrainingSet {
  std::vector<Point> points;
  std::vector<double> values;

  std::size_t size() const noexcept { return points.size(); }
};

/// Drops exact duplicate inputs, keeping the first occurrence.
inline TrainingSet deduplicated(const TrainingSet& in) {
  TrainingSet out;
  out.points.reserve(in.size());
  out.values.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const bool seen = std::any_of(out.points.begin(), out.points.end(),
                                  [&](const Point& p) { return p == in.points[i]; });
    if (!seen) {
      out.points.push_back(in.points[i]);
      out.values.push_back(in.values[i]);
    }
  }
  return out;
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct GpFitOptions {
  /// Correlation parameters in unit-cube coordinates; skips the likelihood search.
  std::optional<Eigen::VectorXd> fixed_theta;
  /// Extra starting point (theta, unit-cube coordinates) for the local searches.
  std::optional<Eigen::VectorXd> warm_start;
  /// Number of coarse-grid starting points refined by local search.
  int restarts = 5;
  /// Objective evaluations allowed per local search.
  int max_evaluations_per_start = 80;
  double log10_theta_min = -3.0;
  double log10_theta_max = 3.0;
};

namespace detail {

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-6;

/// Per-dimension squared differences, packed as the strict lower triangle.
struct PairwiseDistances {
  Eigen::Index n = 0;
  Eigen::MatrixXd sq;  // (n(n-1)/2) x d

  explicit PairwiseDistances(const Eigen::MatrixXd& x) : n(x.rows()), sq(n * (n - 1) / 2, x.cols()) {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j, ++k) sq.row(k) = (x.row(i) - x.row(j)).array().square();
  }
};

inline Eigen::MatrixXd correlation_matrix(const PairwiseDistances& dist, const Eigen::VectorXd& theta) {
  const Eigen::Index n = dist.n;
  const Eigen::VectorXd q = (-(dist.sq * theta)).array().exp();
  Eigen::MatrixXd r(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j, ++k) r(i, j) = r(j, i) = q[k];
  }
  return r;
}

inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& theta) {
  return correlation_matrix(PairwiseDistances(x), theta);
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

/// Cholesky with deterministic jitter escalation 1e-10, 1e-9, ..., 1e-6.
inline std::optional<Factorization> factorize(const Eigen::MatrixXd& r) {
  for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
    Eigen::MatrixXd a = r;
    a.diagonal().array() += jitter;
    Factorization f{Eigen::LLT<Eigen::MatrixXd>(a), jitter};
    if (f.llt.info() == Eigen::Success) return f;
  }
  return std::nullopt;
}

struct ProfileFit {
  Factorization factor;
  Eigen::VectorXd rinv_one;
  Eigen::VectorXd rinv_resid;
  double one_rinv_one = 0.0;
  double mu = 0.0;
  double tau2 = 0.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();
};

/// Closed-form MLE of mu and tau^2 for fixed theta, plus the concentrated
/// log-likelihood -(n ln tau^2 + ln|R|)/2.
inline std::optional<ProfileFit> profile(const PairwiseDistances& dist, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& theta) {
  auto factor = factorize(correlation_matrix(dist, theta));
  if (!factor) return std::nullopt;
  ProfileFit p{std::move(*factor), {}, {}, 0.0, 0.0, 0.0, 0.0};
  const Eigen::Index n = dist.n;
  p.rinv_one = p.factor.llt.solve(Eigen::VectorXd::Ones(n));
  const Eigen::VectorXd rinv_y = p.factor.llt.solve(y);
  p.one_rinv_one = p.rinv_one.sum();
  p.mu = rinv_y.sum() / p.one_rinv_one;
  const Eigen::VectorXd resid = y.array() - p.mu;
  p.rinv_resid = rinv_y - p.mu * p.rinv_one;
  p.tau2 = std::max(resid.dot(p.rinv_resid) / static_cast<double>(n), 0.0);
  const auto& l = p.factor.llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(l(i, i));
  p.log_likelihood =
      -0.5 * (static_cast<double>(n) * std::log(std::max(p.tau2, 1e-300)) + logdet);
  return p;
}

/// Bounded Nelder-Mead (maximization); points outside the box are clamped.
template <typename F>
std::pair<Eigen::VectorXd, double> nelder_mead_max(F&& f, Eigen::VectorXd start, double lo,
                                                   double hi, double step, int max_evals) {
  const Eigen::Index d = start.size();
  auto clamp = [&](Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = std::clamp(v[i], lo, hi);
    return v;
  };
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& v) {
    ++evals;
    return f(v);
  };
  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(clamp(start));
  values.push_back(eval(simplex[0]));
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd v = simplex[0];
    v[i] += (v[i] + step <= hi) ? step : -step;
    simplex.push_back(clamp(v));
    values.push_back(eval(simplex.back()));
  }
  std::vector<std::size_t> order(simplex.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    const std::size_t best = order.front(), worst = order.back(),
                      second = order[order.size() - 2];
    double size = 0.0;
    for (const auto& v : simplex) size = std::max(size, (v - simplex[best]).cwiseAbs().maxCoeff());
    if (size < 1e-3 && std::fabs(values[best] - values[worst]) <= 1e-7 * (1.0 + std::fabs(values[best])))
      break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < simplex.size(); ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= static_cast<double>(d);
    const Eigen::VectorXd refl = clamp(centroid + (centroid - simplex[worst]));
    const double f_refl = eval(refl);
    if (f_refl > values[best]) {
      const Eigen::VectorXd exp = clamp(centroid + 2.0 * (centroid - simplex[worst]));
      const double f_exp = eval(exp);
      if (f_exp > f_refl) {
        simplex[worst] = exp;
        values[worst] = f_exp;
      } else {
        simplex[worst] = refl;
        values[worst] = f_refl;
      }
    } else if (f_refl > values[second]) {
      simplex[worst] = refl;
      values[worst] = f_refl;
    } else {
      const bool outside = f_refl > values[worst];
      const Eigen::VectorXd con = outside ? clamp(centroid + 0.5 * (refl - centroid))
                                          : clamp(centroid + 0.5 * (simplex[worst] - centroid));
      const double f_con = eval(con);
      if (f_con > std::max(values[worst], outside ? f_refl : values[worst])) {
        simplex[worst] = con;
        values[worst] = f_con;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == best) continue;
          simplex[i] = clamp(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
          values[i] = eval(simplex[i]);
        }
      }
    }
  }
  const auto it = std::max_element(values.begin(), values.end());
  return {simplex[static_cast<std::size_t>(it - values.begin())], *it};
}

}  // namespace detail

/// Ordinary-kriging surrogate with a separable Gaussian correlation
///   R_ij = prod_l exp(-theta_l (x_il - x_jl)^2),
/// constant mean mu and process variance tau^2 estimated by maximum likelihood.
/// Inputs are mapped to the unit cube of `frame` before any kernel evaluation,
/// so theta is expressed in unit-cube coordinates. Immutable once fitted.
class GaussianProcess {
 public:
  static GaussianProcess fit(const TrainingSet& training, const Hyperbox& frame,
                             const GpFitOptions& options = {}) {
    if (training.points.size() != training.values.size())
      throw DimensionMismatch("GaussianProcess::fit: points and values differ in length");
    TrainingSet data = deduplicated(training);
    if (data.size() < 2)
      throw DimensionMismatch("GaussianProcess::fit: need at least 2 distinct points");
    const std::size_t d = frame.dim();
    for (const auto& p : data.points)
      if (static_cast<std::size_t>(p.size()) != d)
        throw DimensionMismatch("GaussianProcess::fit: point dimension differs from frame");

    GaussianProcess gp;
    gp.frame_ = frame;
    const auto n = static_cast<Eigen::Index>(data.size());
    gp.x_.resize(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < n; ++i)
      gp.x_.row(i) = frame.to_unit(data.points[static_cast<std::size_t>(i)]).transpose();
    gp.y_ = Eigen::Map<const Eigen::VectorXd>(data.values.data(), n);
    gp.training_ = std::move(data);

    const double spread = gp.y_.maxCoeff() - gp.y_.minCoeff();
    const detail::PairwiseDistances dist(gp.x_);
    Eigen::VectorXd theta;
    if (options.fixed_theta) {
      theta = *options.fixed_theta;
      if (static_cast<std::size_t>(theta.size()) != d)
        throw DimensionMismatch("GaussianProcess::fit: fixed theta has wrong dimension");
    } else if (spread == 0.0) {
      // Degenerate design: the likelihood is unbounded, any theta interpolates.
      theta = options.warm_start ? *options.warm_start
                                 : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
    } else {
      theta = search_theta(dist, gp.y_, options);
    }

    auto prof = detail::profile(dist, gp.y_, theta);
    if (!prof) throw FactorizationFailure("GaussianProcess::fit: correlation matrix not positive definite");
    gp.theta_ = theta;
    gp.mu_ = prof->mu;
    gp.tau2_ = spread == 0.0 ? 0.0 : prof->tau2;
    gp.one_rinv_one_ = prof->one_rinv_one;
    gp.rinv_one_ = std::move(prof->rinv_one);
    gp.rinv_resid_ = std::move(prof->rinv_resid);
    gp.jitter_ = prof->factor.jitter;
    gp.log_likelihood_ = prof->log_likelihood;
    gp.llt_ = std::move(prof->factor.llt);
    return gp;
  }

  /// Fits in the bounding box of the inputs (sides of zero extent are widened to 1).
  static GaussianProcess fit(const TrainingSet& training, const GpFitOptions& options = {}) {
    if (training.points.empty()) throw DimensionMismatch("GaussianProcess::fit: empty training set");
    const Eigen::Index d = training.points.front().size();
    Point lo = training.points.front(), hi = lo;
    for (const auto& p : training.points) {
      if (p.size() != d) throw DimensionMismatch("GaussianProcess::fit: ragged training points");
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    for (Eigen::Index l = 0; l < d; ++l)
      if (!(hi[l] > lo[l])) {
        lo[l] -= 0.5;
        hi[l] += 0.5;
      }
    return fit(training, Hyperbox(lo, hi), options);
  }

  Prediction predict(const Point& x) const {
    if (static_cast<std::size_t>(x.size()) != frame_.dim())
      throw DimensionMismatch("GaussianProcess::predict: wrong input dimension");
    const Eigen::VectorXd u = frame_.to_unit(x);
    const Eigen::Index n = x_.rows();
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i)
      r[i] = std::exp(-((x_.row(i).transpose() - u).array().square() * theta_.array()).sum());
    Prediction p;
    p.mean = mu_ + r.dot(rinv_resid_);
    if (tau2_ > 0.0) {
      const Eigen::VectorXd v = llt_.matrixL().solve(r);
      const double g = 1.0 - rinv_one_.dot(r);
      p.variance = std::max(tau2_ * (1.0 - v.squaredNorm() + g * g / one_rinv_one_), 0.0);
    }
    return p;
  }

  /// Pointwise predictive quantile mean + Phi^{-1}(level) * sd.
  double quantile(const Point& x, double level) const {
    if (!(level > 0.0 && level < 1.0)) throw InvalidLevel("quantile: level must lie in (0,1)");
    const Prediction p = predict(x);
    if (level == 0.5 || p.variance == 0.0) return p.mean;
    return p.mean + normal_quantile(level) * std::sqrt(p.variance);
  }

  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  double mu() const noexcept { return mu_; }
  double tau2() const noexcept { return tau2_; }
  double jitter() const noexcept { return jitter_; }
  double log_likelihood() const noexcept { return log_likelihood_; }
  double one_rinv_one() const noexcept { return one_rinv_one_; }
  const Hyperbox& frame() const noexcept { return frame_; }
  const TrainingSet& training() const noexcept { return training_; }
  std::size_t size() const noexcept { return training_.size(); }
  std::size_t dim() const noexcept { return frame_.dim(); }

 private:
  GaussianProcess() = default;

  static Eigen::VectorXd search_theta(const detail::PairwiseDistances& dist,
                                      const Eigen::VectorXd& y, const GpFitOptions& options) {
    const Eigen::Index d = dist.sq.cols();
    const double lo = options.log10_theta_min, hi = options.log10_theta_max;
    auto objective = [&](const Eigen::VectorXd& log_theta) {
      Eigen::VectorXd theta(d);
      for (Eigen::Index i = 0; i < d; ++i) theta[i] = std::pow(10.0, log_theta[i]);
      auto p = detail::profile(dist, y, theta);
      return p ? p->log_likelihood : -std::numeric_limits<double>::infinity();
    };

    std::vector<Eigen::VectorXd> starts;
    if (options.warm_start) starts.push_back(options.warm_start->array().log10().matrix());
    if (options.restarts > 0) {
      // Coarse log-grid: full tensor grid for small d, isotropic diagonal otherwise.
      std::vector<Eigen::VectorXd> grid;
      const std::vector<double> levels = {-2.0, -1.0, 0.0, 1.0, 2.0};
      if (std::pow(5.0, static_cast<double>(d)) <= 243.0) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
        while (true) {
          Eigen::VectorXd v(d);
          for (Eigen::Index i = 0; i < d; ++i) v[i] = levels[idx[static_cast<std::size_t>(i)]];
          grid.push_back(v);
          std::size_t k = 0;
          while (k < idx.size() && ++idx[k] == levels.size()) idx[k++] = 0;
          if (k == idx.size()) break;
        }
      } else {
        for (double v = lo; v <= hi + 1e-12; v += 1.0) grid.push_back(Eigen::VectorXd::Constant(d, v));
      }
      std::vector<double> scores(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) scores[i] = objective(grid[i]);
      std::vector<std::size_t> order(grid.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
      for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(options.restarts); ++i)
        starts.push_back(grid[order[i]]);
    }
    if (starts.empty()) starts.push_back(Eigen::VectorXd::Zero(d));

    Eigen::VectorXd best = starts.front();
    double best_value = -std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
      auto [arg, value] = detail::nelder_mead_max(objective, s, lo, hi, 0.5,
                                                  options.max_evaluations_per_start);
      if (value > best_value) {
        best_value = value;
        best = arg;
      }
    }
    Eigen::VectorXd theta(d);
    for (Eigen::Index i = 0; i < d; ++i) theta[i] = std::pow(10.0, best[i]);
    return theta;
  }

  Hyperbox frame_;
  TrainingSet training_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd theta_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd rinv_one_;
  Eigen::VectorXd rinv_resid_;
  double one_rinv_one_ = 0.0;
  double mu_ = 0.0;
  double tau2_ = 0.0;
  double jitter_ = 0.0;
  double log_likelihood_ = 0.0;
};

inline Prediction predict(const GaussianProcess& gp, const Point& x) { return gp.predict(x); }

inline double quantile(const GaussianProcess& gp, const Point& x, double level) {
  return gp.quantile(x, level);
}

}  // namespace partx
