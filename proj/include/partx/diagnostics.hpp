#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "partx/errors.hpp"
#include "partx/partition.hpp"

namespace partx {

/// Significance at tree level j >= 1: alpha for j = 1, alpha_{j-1} / B afterwards.
/// Level 0 (the root) shares the level-1 value.
inline double level_significance(double alpha, std::size_t cuts, int level) {
  double a = alpha;
  for (int j = 2; j <= level; ++j) a /= static_cast<double>(cuts);
  return a;
}

/// PAC error-rate bound (ln 1/p + ln 1/alpha_j + 2 ln n + 1) / n, clamped to [0, 1].
inline double pac_delta(double p, double alpha_j, std::size_t n) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidProbability("pac_delta: p must lie in (0,1]");
  if (!(alpha_j > 0.0 && alpha_j <= 1.0))
    throw InvalidProbability("pac_delta: alpha must lie in (0,1]");
  if (n == 0) throw InvalidProbability("pac_delta: need at least one sample");
  const double nn = static_cast<double>(n);
  const double d = (std::log(1.0 / p) + std::log(1.0 / alpha_j) + 2.0 * std::log(nn) + 1.0) / nn;
  return std::clamp(d, 0.0, 1.0);
}

/// A region that was classified (+/-) or reclassified (r+/r-) at some iteration.
struct ClassificationEvent {
  int iteration = 0;
  int level = 0;
  RegionLabel label = RegionLabel::satisfying;
  std::size_t sample_count = 0;
  /// Region probability used by the PAC bound.
  double probability = 1.0;
};

struct EventBound {
  ClassificationEvent event;
  double alpha = 0.0;
  double delta = 0.0;
};

/// Closed-form misclassification-probability bounds, reported only.
struct ConfidenceDiagnostics {
  std::vector<double> level_alpha;        // index j-1 holds alpha_j, j = 1..max level
  std::vector<EventBound> events;
  std::map<int, double> gamma_plus;       // per iteration k
  std::map<int, double> gamma_minus;
  std::map<int, double> eta_plus;         // per level j
  std::map<int, double> eta_minus;
  double eta_plus_product = 1.0;          // prod_j eta+_j
  double eta_minus_product = 1.0;         // prod_j eta-_j
  double joint_bound = 1.0;               // prod_{h>1} gamma+_h * prod_{h>1} gamma-_h
  double satisfying_bound = 1.0;          // prod_{h>1} gamma-_h * prod_{h>1} (gamma+_h)^2
  double violating_bound = 1.0;           // prod_{h>1} gamma+_h * prod_{h>1} (gamma-_h)^2
};

inline ConfidenceDiagnostics confidence_diagnostics(std::span<const ClassificationEvent> events,
                                                    double alpha, std::size_t cuts,
                                                    int iterations) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidProbability("confidence_diagnostics: alpha outside (0,1)");
  ConfidenceDiagnostics out;
  int max_level = 1;
  for (const auto& e : events) max_level = std::max(max_level, e.level);
  for (int j = 1; j <= max_level; ++j) out.level_alpha.push_back(level_significance(alpha, cuts, j));
  for (int k = 1; k <= iterations; ++k) {
    out.gamma_plus[k] = 1.0;
    out.gamma_minus[k] = 1.0;
  }
  for (int j = 1; j <= max_level; ++j) {
    out.eta_plus[j] = 1.0;
    out.eta_minus[j] = 1.0;
  }

  for (const auto& e : events) {
    const double a = level_significance(alpha, cuts, std::max(e.level, 1));
    const double delta = pac_delta(std::max(e.probability, 1e-12), a, std::max<std::size_t>(e.sample_count, 1));
    out.events.push_back({e, a, delta});
    const double keep = 1.0 - delta;
    const int j = std::max(e.level, 1);
    const bool plus = e.label == RegionLabel::satisfying || e.label == RegionLabel::reclassified_plus;
    const bool reclass =
        e.label == RegionLabel::reclassified_plus || e.label == RegionLabel::reclassified_minus;
    auto& gamma = plus ? out.gamma_plus : out.gamma_minus;
    auto& eta = plus ? out.eta_plus : out.eta_minus;
    if (!gamma.count(e.iteration)) gamma[e.iteration] = 1.0;
    gamma[e.iteration] *= keep;
    // Reclassification terms enter eta only from the second iteration on.
    if (!reclass || e.iteration >= 2) eta[j] *= keep;
  }

  for (const auto& [j, v] : out.eta_plus) out.eta_plus_product *= v;
  for (const auto& [j, v] : out.eta_minus) out.eta_minus_product *= v;
  double gp = 1.0, gm = 1.0;
  for (const auto& [k, v] : out.gamma_plus)
    if (k > 1) gp *= v;
  for (const auto& [k, v] : out.gamma_minus)
    if (k > 1) gm *= v;
  out.joint_bound = gp * gm;
  out.satisfying_bound = gm * gp * gp;
  out.violating_bound = gp * gm * gm;
  return out;
}

}  // namespace partx
