#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "partx/diagnostics.hpp"
#include "partx/errors.hpp"
#include "partx/gp.hpp"
#include "partx/hyperbox.hpp"
#include "partx/normal.hpp"
#include "partx/partition.hpp"
#include "partx/random.hpp"
#include "partx/sampling.hpp"

namespace partx {

struct PartXConfig {
  std::size_t n0 = 10;         // initialization budget per subregion
  std::size_t n_bo = 10;       // EI evaluations per unclassified subregion
  std::size_t n_c = 100;       // evaluations shared by classified subregions per iteration
  std::size_t budget = 5000;   // T, total objective evaluations
  std::size_t mc_reps = 10;    // R
  std::size_t mc_draws = 100;  // M
  std::size_t cuts = 2;        // B
  double delta_c = 0.05;
  double delta_v = 0.001;
  double alpha = 0.05;
  double epsilon = 0.01;
  std::uint64_t seed = 0;
  std::size_t macro_reps = 1;

  std::vector<double> quantile_levels = {0.5, 0.95, 0.99};
  /// Uniform draws per leaf for the quantile falsification volume.
  std::size_t volume_mc_count = 1000;
  /// Uniform draws per dimension for the classified-region sampling metric.
  std::size_t metric_mc_per_dim = 100;
  /// Evaluation-only mode: leaves holding more points are cut before fitting.
  std::size_t max_fit_points = 200;
  GpFitOptions gp;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigInvalid("config: " + m); };
    auto unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (n0 < 2) fail("n0 must be >= 2");
    if (budget < n0) fail("T must be >= n0");
    if (cuts < 2) fail("B must be >= 2");
    if (mc_reps < 2) fail("R must be >= 2");
    if (mc_draws < 1) fail("M must be >= 1");
    if (!unit(delta_c)) fail("delta_c must lie in (0,1)");
    if (!unit(delta_v)) fail("delta_v must lie in (0,1)");
    if (!unit(alpha)) fail("alpha must lie in (0,1)");
    if (!(epsilon >= 0.0)) fail("epsilon must be >= 0");
    if (macro_reps < 1) fail("macro_reps must be >= 1");
    if (volume_mc_count < 1) fail("volume_mc_count must be >= 1");
    if (metric_mc_per_dim < 1) fail("metric_mc_per_dim must be >= 1");
    if (max_fit_points < n0) fail("max_fit_points must be >= n0");
    for (double q : quantile_levels)
      if (!unit(q)) fail("quantile levels must lie in (0,1)");
  }
};

struct IterationRecord {
  int iteration = 0;
  std::size_t evaluations = 0;             // spent during this iteration
  std::size_t cumulative_evaluations = 0;
  bool residual_spend = false;             // budget guard failed, residual spread by volume
  std::array<std::size_t, kAllLabels.size()> leaf_counts{};
  std::array<double, kAllLabels.size()> label_volumes{};
};

struct FalsificationVolume {
  double domain_volume = 0.0;
  /// Volume of leaves not certified satisfying: -, r, r-, u.
  double hyperbox_volume = 0.0;
  /// Volume of leaves labeled violating.
  double violating_volume = 0.0;
  /// Quantile level -> volume where the pointwise lower quantile is below zero.
  std::map<double, double> quantile_volume;

  double normalized(double v) const { return domain_volume > 0.0 ? v / domain_volume : 0.0; }
};

struct RunReport {
  PartXConfig config;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> iterations;
  std::shared_ptr<const PartitionTree> tree;
  FalsificationVolume volumes;
  std::vector<ClassificationEvent> events;
  ConfidenceDiagnostics diagnostics;
  SampleBatch samples;  // every objective evaluation, in call order
  Point best_point;
  double min_value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  bool aborted = false;
  std::string error;
};

/// Sum of leaf volumes over -, r, r-, u.
inline double falsification_volume_hyperbox(const PartitionTree& tree) {
  return tree.volume_of({RegionLabel::violating, RegionLabel::remaining,
                         RegionLabel::reclassified_minus, RegionLabel::unclassified});
}

/// For every level q, sum over leaves of v(leaf) times the fraction of uniform
/// draws whose lower q-quantile y(x) - Phi^{-1}(q) s(x) is negative. Leaves use
/// their own or inherited surrogate; a leaf with none counts in full. All levels
/// share the same draws, so the result is nondecreasing in q.
inline std::map<double, double> falsification_volume_quantile(const PartitionTree& tree,
                                                              std::span<const double> levels,
                                                              std::size_t mc_count, Rng& rng) {
  std::vector<double> z;
  for (double q : levels) z.push_back(normal_quantile(q));
  std::vector<double> acc(levels.size(), 0.0);
  for (const auto& [id, leaf] : tree.leaves()) {
    const double v = leaf.box.volume();
    if (!leaf.model) {
      for (auto& a : acc) a += v;
      continue;
    }
    Rng local = rng.split({id});
    std::vector<std::size_t> hits(levels.size(), 0);
    for (std::size_t m = 0; m < mc_count; ++m) {
      const Prediction p = leaf.model->predict(uniform_point(leaf.box, local));
      const double s = std::sqrt(p.variance);
      for (std::size_t i = 0; i < z.size(); ++i)
        if (p.mean - z[i] * s < 0.0) ++hits[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i)
      acc[i] += v * static_cast<double>(hits[i]) / static_cast<double>(mc_count);
  }
  std::map<double, double> out;
  for (std::size_t i = 0; i < levels.size(); ++i) out[levels[i]] = acc[i];
  return out;
}

namespace detail {

enum StreamTag : std::uint64_t {
  kBranchStream = 1,
  kSampleStream,
  kQuantileStream,
  kMetricStream,
  kClassifiedStream,
  kResidualStream,
  kVolumeStream,
};

/// Counts evaluations against the budget and keeps the incumbent.
template <typename Objective>
class BudgetedObjective {
 public:
  BudgetedObjective(Objective& f, std::size_t budget, RunReport& report)
      : f_(f), budget_(budget), report_(report) {}

  double operator()(const Point& x) {
    if (report_.evaluations >= budget_) throw std::logic_error("evaluation budget exceeded");
    const double y = evaluate_objective(f_, x);
    ++report_.evaluations;
    report_.samples.add(x, y);
    if (y < report_.min_value) {
      report_.min_value = y;
      report_.best_point = x;
    }
    return y;
  }

 private:
  Objective& f_;
  std::size_t budget_;
  RunReport& report_;
};

inline double event_probability(const GaussianProcess& gp, const Hyperbox& box, RegionLabel label,
                                 std::size_t draws, Rng& rng) {
  const double m = classified_mass_metric(gp, box, draws, rng);
  const bool minus = label == RegionLabel::violating || label == RegionLabel::reclassified_minus;
  return std::max(minus ? m : 1.0 - m, 1e-12);
}

inline IterationRecord snapshot(const PartitionTree& tree, int k, std::size_t spent,
                                std::size_t total, bool residual) {
  IterationRecord rec;
  rec.iteration = k;
  rec.evaluations = spent;
  rec.cumulative_evaluations = total;
  rec.residual_spend = residual;
  for (auto l : kAllLabels) {
    rec.leaf_counts[label_index(l)] = tree.theta(l).size();
    rec.label_volumes[label_index(l)] = tree.volume_of({l});
  }
  return rec;
}

/// Fits a leaf's own surrogate, warm-started from its current one.
inline std::shared_ptr<const GaussianProcess> refit(const Subregion& leaf, const GpFitOptions& base) {
  GpFitOptions opt = base;
  if (leaf.model && !leaf.model_inherited) opt.warm_start = leaf.model->theta();
  return std::make_shared<const GaussianProcess>(
      GaussianProcess::fit(leaf.samples.training(), leaf.box, opt));
}

inline std::size_t distinct_points(const SampleBatch& s) {
  return deduplicated(s.training()).size();
}

inline void finalize(RunReport& report, std::shared_ptr<PartitionTree> tree, int iterations) {
  const auto& cfg = report.config;
  report.volumes.domain_volume = tree->root().volume();
  report.volumes.hyperbox_volume = falsification_volume_hyperbox(*tree);
  report.volumes.violating_volume = tree->volume_of({RegionLabel::violating});
  Rng vol(derive_seed(cfg.seed, {kVolumeStream}));
  report.volumes.quantile_volume =
      falsification_volume_quantile(*tree, cfg.quantile_levels, cfg.volume_mc_count, vol);
  report.diagnostics = confidence_diagnostics(report.events, cfg.alpha, cfg.cuts, iterations);
  report.tree = std::move(tree);
}

}  // namespace detail

/// Adaptive partitioning with surrogate-driven sampling. Each iteration cuts
/// every r/r+/r- leaf into B children; if the remaining budget covers n_bo
/// evaluations per unclassified leaf plus their initialization shortfall, each
/// such leaf gets SampleBO, MCstep and Classify, and n_c further evaluations are
/// spread over classified leaves in proportion to their probability mass below
/// zero (possibly reclassifying them). Otherwise the residual budget is spread
/// over all leaves in proportion to volume and the run stops.
///
/// An EvaluationError stops the run; the report is still finalized and flagged
/// `aborted`.
template <typename Objective>
RunReport part_x(Objective&& objective, const Hyperbox& domain, const PartXConfig& cfg) {
  cfg.validate();
  using detail::kBranchStream, detail::kSampleStream, detail::kQuantileStream,
      detail::kMetricStream, detail::kClassifiedStream, detail::kResidualStream;

  RunReport report;
  report.config = cfg;
  report.seed = cfg.seed;
  auto tree = std::make_shared<PartitionTree>(domain);
  const Point extents = domain.extents();
  const std::size_t metric_draws = cfg.metric_mc_per_dim * domain.dim();
  detail::BudgetedObjective<std::remove_reference_t<Objective>> eval(objective, cfg.budget, report);
  auto stream = [&](std::uint64_t tag, LeafId id, int k) {
    return Rng(derive_seed(cfg.seed, {tag, id, static_cast<std::uint64_t>(k)}));
  };
  auto remaining = [&] { return cfg.budget - report.evaluations; };

  int k = 0;
  try {
    while (remaining() > 0) {
      ++k;
      const std::size_t start = report.evaluations;
      const auto to_branch = tree->ids_with({RegionLabel::remaining, RegionLabel::reclassified_plus,
                                             RegionLabel::reclassified_minus});
      if (to_branch.empty()) {
        --k;
        break;
      }
      for (LeafId id : to_branch) {
        Rng rng = stream(kBranchStream, id, k);
        try {
          auto children = branch(tree->leaf(id), cfg.cuts, cfg.delta_v, extents, rng);
          for (auto& c : children) c.birth_iteration = k;
          tree->replace_with_children(id, std::move(children));
        } catch (const NoBranchableDimension&) {
          tree->update(id, RegionLabel::unclassified);
        }
      }

      const auto open = tree->ids_with({RegionLabel::remaining});
      std::size_t cost = cfg.n_bo * open.size();
      for (LeafId id : open) {
        const std::size_t n = tree->leaf(id).samples.size();
        cost += n < cfg.n0 ? cfg.n0 - n : 0;
      }

      if (open.empty()) {
        report.iterations.push_back(detail::snapshot(*tree, k, 0, report.evaluations, false));
        continue;
      }

      if (remaining() >= cost) {
        for (LeafId id : open) {
          auto& leaf = tree->leaf(id);
          Rng rng = stream(kSampleStream, id, k);
          auto res = sample_bo(leaf.box, eval, std::move(leaf.samples), cfg.n0, cfg.n_bo, rng, cfg.gp);
          leaf.samples = std::move(res.samples);
          leaf.model = std::move(res.model);
          leaf.model_inherited = false;
          Rng qrng = stream(kQuantileStream, id, k);
          leaf.quantiles = mc_step(leaf.box, *leaf.model, cfg.mc_reps, cfg.mc_draws, cfg.delta_c, qrng);
          const RegionLabel label = classify(leaf, cfg.delta_c, cfg.delta_v, extents);
          tree->update(id, label);
          if (label == RegionLabel::satisfying || label == RegionLabel::violating) {
            Rng prng = stream(kMetricStream, id, k);
            report.events.push_back({k, leaf.level, label, leaf.samples.size(),
                                     detail::event_probability(*leaf.model, leaf.box, label,
                                                               metric_draws, prng)});
          }
        }

        const auto classified = tree->ids_with({RegionLabel::satisfying, RegionLabel::violating});
        const std::size_t extra = std::min(cfg.n_c, remaining());
        if (!classified.empty() && extra > 0) {
          std::vector<double> weights;
          weights.reserve(classified.size());
          for (LeafId id : classified) {
            const auto& leaf = tree->leaf(id);
            Rng rng = stream(kMetricStream, id, k);
            weights.push_back(classified_mass_metric(*leaf.model, leaf.box, metric_draws, rng));
          }
          const auto alloc = proportional_allocation(weights, extra);
          for (std::size_t i = 0; i < classified.size(); ++i) {
            if (alloc[i] == 0) continue;
            const LeafId id = classified[i];
            auto& leaf = tree->leaf(id);
            Rng rng = stream(kClassifiedStream, id, k);
            for (std::size_t m = 0; m < alloc[i]; ++m) {
              Point x = uniform_point(leaf.box, rng);
              const double y = eval(x);
              leaf.samples.add(std::move(x), y);
            }
            leaf.model = detail::refit(leaf, cfg.gp);
            leaf.model_inherited = false;
            Rng qrng = stream(kQuantileStream, id, k);
            leaf.quantiles =
                mc_step(leaf.box, *leaf.model, cfg.mc_reps, cfg.mc_draws, cfg.delta_c, qrng);
            const RegionLabel label = classify(leaf, cfg.delta_c, cfg.delta_v, extents);
            tree->update(id, label);
            if (label == RegionLabel::reclassified_plus || label == RegionLabel::reclassified_minus) {
              Rng prng = stream(kMetricStream, id, k);
              report.events.push_back({k, leaf.level, label, leaf.samples.size(),
                                       detail::event_probability(*leaf.model, leaf.box, label,
                                                                 metric_draws, prng)});
            }
          }
        }
        report.iterations.push_back(
            detail::snapshot(*tree, k, report.evaluations - start, report.evaluations, false));
      } else {
        std::vector<LeafId> ids;
        std::vector<double> volumes;
        for (const auto& [id, leaf] : tree->leaves()) {
          ids.push_back(id);
          volumes.push_back(leaf.box.volume());
        }
        const auto alloc = proportional_allocation(volumes, remaining());
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (alloc[i] == 0) continue;
          auto& leaf = tree->leaf(ids[i]);
          Rng rng = stream(kResidualStream, ids[i], k);
          for (std::size_t m = 0; m < alloc[i]; ++m) {
            Point x = uniform_point(leaf.box, rng);
            const double y = eval(x);
            leaf.samples.add(std::move(x), y);
          }
          const bool own = leaf.model && !leaf.model_inherited;
          const std::size_t needed = own || !leaf.model ? 2 : cfg.n0;
          if (detail::distinct_points(leaf.samples) >= needed) {
            leaf.model = detail::refit(leaf, cfg.gp);
            leaf.model_inherited = false;
          }
        }
        report.iterations.push_back(
            detail::snapshot(*tree, k, report.evaluations - start, report.evaluations, true));
        break;
      }
    }
  } catch (const EvaluationError& e) {
    report.aborted = true;
    report.error = e.what();
  }
  detail::finalize(report, std::move(tree), k);
  return report;
}

/// Evaluation-only mode: partitions `samples` without calling any objective.
/// A leaf is fitted and classified when it holds at least n0 points; a leaf
/// left remaining is cut and its children examined in turn. Leaves with fewer
/// than n0 points stay remaining on their ancestor's surrogate; leaves that
/// cannot be cut become u. Leaves above `max_fit_points` are cut before fitting.
inline RunReport evaluate_samples(const SampleBatch& samples, const Hyperbox& domain,
                                  const PartXConfig& cfg) {
  cfg.validate();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!domain.contains(samples.points[i]))
      throw PointOutsideDomain("sample row " + std::to_string(i) + " lies outside the domain", i);
    if (!std::isfinite(samples.values[i]))
      throw MalformedRow("sample row " + std::to_string(i) + " has a non-finite value", i);
  }
  RunReport report;
  report.config = cfg;
  report.seed = cfg.seed;
  report.samples = samples;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples.values[i] < report.min_value) {
      report.min_value = samples.values[i];
      report.best_point = samples.points[i];
    }

  auto tree = std::make_shared<PartitionTree>(domain, samples);
  const Point extents = domain.extents();
  const std::size_t metric_draws = cfg.metric_mc_per_dim * domain.dim();
  auto stream = [&](std::uint64_t tag, LeafId id) {
    return Rng(derive_seed(cfg.seed, {tag, id}));
  };

  std::deque<LeafId> queue{tree->leaves().begin()->first};
  int deepest = 0;
  while (!queue.empty()) {
    const LeafId id = queue.front();
    queue.pop_front();
    auto& leaf = tree->leaf(id);
    deepest = std::max(deepest, leaf.level);
    if (leaf.samples.size() < cfg.n0) continue;

    const bool too_many = leaf.samples.size() > cfg.max_fit_points;
    if (!too_many) {
      leaf.model = detail::refit(leaf, cfg.gp);
      leaf.model_inherited = false;
      Rng qrng = stream(detail::kQuantileStream, id);
      leaf.quantiles = mc_step(leaf.box, *leaf.model, cfg.mc_reps, cfg.mc_draws, cfg.delta_c, qrng);
      const RegionLabel label = classify(leaf, cfg.delta_c, cfg.delta_v, extents);
      tree->update(id, label);
      if (label != RegionLabel::remaining) {
        if (label == RegionLabel::satisfying || label == RegionLabel::violating) {
          Rng prng = stream(detail::kMetricStream, id);
          report.events.push_back({leaf.level + 1, leaf.level, label, leaf.samples.size(),
                                   detail::event_probability(*leaf.model, leaf.box, label,
                                                             metric_draws, prng)});
        }
        continue;
      }
    }
    Rng rng = stream(detail::kBranchStream, id);
    try {
      auto children = branch(leaf, cfg.cuts, cfg.delta_v, extents, rng);
      for (auto& c : children) c.birth_iteration = leaf.level + 1;
      for (LeafId c : tree->replace_with_children(id, std::move(children))) queue.push_back(c);
    } catch (const NoBranchableDimension&) {
      if (too_many) {
        // Unbranchable and oversized: fit on an evenly strided subsample.
        SampleBatch thin;
        const std::size_t stride = (leaf.samples.size() + cfg.max_fit_points - 1) / cfg.max_fit_points;
        for (std::size_t i = 0; i < leaf.samples.size(); i += stride)
          thin.add(leaf.samples.points[i], leaf.samples.values[i]);
        leaf.model = std::make_shared<const GaussianProcess>(
            GaussianProcess::fit(thin.training(), leaf.box, cfg.gp));
        leaf.model_inherited = false;
        Rng qrng = stream(detail::kQuantileStream, id);
        leaf.quantiles = mc_step(leaf.box, *leaf.model, cfg.mc_reps, cfg.mc_draws, cfg.delta_c, qrng);
      }
      tree->update(id, RegionLabel::unclassified);
    }
  }
  report.iterations.push_back(detail::snapshot(*tree, deepest + 1, 0, 0, false));
  detail::finalize(report, std::move(tree), deepest + 1);
  return report;
}

}  // namespace partx
