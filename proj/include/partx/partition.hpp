#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "partx/errors.hpp"
#include "partx/gp.hpp"
#include "partx/hyperbox.hpp"
#include "partx/normal.hpp"
#include "partx/random.hpp"
#include "partx/sampling.hpp"

namespace partx {

enum class RegionLabel : std::uint8_t {
  satisfying,          // +
  violating,           // -
  reclassified_plus,   // r+
  reclassified_minus,  // r-
  remaining,           // r
  unclassified,        // u, at the volume floor
};

inline constexpr std::array<RegionLabel, 6> kAllLabels = {
    RegionLabel::satisfying,         RegionLabel::violating, RegionLabel::reclassified_plus,
    RegionLabel::reclassified_minus, RegionLabel::remaining, RegionLabel::unclassified};

constexpr std::string_view to_string(RegionLabel l) noexcept {
  switch (l) {
    case RegionLabel::satisfying: return "+";
    case RegionLabel::violating: return "-";
    case RegionLabel::reclassified_plus: return "r+";
    case RegionLabel::reclassified_minus: return "r-";
    case RegionLabel::remaining: return "r";
    case RegionLabel::unclassified: return "u";
  }
  return "?";
}

inline std::optional<RegionLabel> parse_label(std::string_view s) {
  for (auto l : kAllLabels)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

constexpr std::size_t label_index(RegionLabel l) noexcept { return static_cast<std::size_t>(l); }

/// Replicate-averaged extreme predictive quantiles over a subregion.
struct QuantileEstimate {
  double q_max_mean = 0.0;
  double q_max_var = 0.0;
  double q_min_mean = 0.0;
  double q_min_var = 0.0;
};

using LeafId = std::uint64_t;

struct Subregion {
  LeafId id = 0;
  Hyperbox box;
  RegionLabel label = RegionLabel::remaining;
  int level = 0;
  int birth_iteration = 0;
  SampleBatch samples;
  /// Surrogate; may belong to an ancestor when `model_inherited` is set.
  std::shared_ptr<const GaussianProcess> model;
  bool model_inherited = false;
  std::optional<QuantileEstimate> quantiles;
};

/// Dimensions whose relative side exceeds B * delta_v, so every child stays
/// above the delta_v floor.
inline std::vector<std::size_t> branchable_dimensions(const Hyperbox& box, std::size_t cuts,
                                                      double delta_v, const Point& root_extents) {
  std::vector<std::size_t> dims;
  for (std::size_t l = 0; l < box.dim(); ++l)
    if (box.side(l) / root_extents[static_cast<Eigen::Index>(l)] >
        static_cast<double>(cuts) * delta_v)
      dims.push_back(l);
  return dims;
}

/// Splits `region` into `cuts` equal-volume children along a uniformly chosen
/// branchable dimension. Children are labeled remaining, inherit the parent's
/// samples by containment and its surrogate (flagged as inherited).
inline std::vector<Subregion> branch(const Subregion& region, std::size_t cuts, double delta_v,
                                     const Point& root_extents, Rng& rng) {
  if (cuts < 2) throw ConfigInvalid("branch: need at least 2 cuts");
  const auto dims = branchable_dimensions(region.box, cuts, delta_v, root_extents);
  if (dims.empty()) throw NoBranchableDimension("branch: region is at the volume floor");
  const std::size_t dim = dims[rng.index(dims.size())];
  const auto boxes = region.box.split(dim, cuts);
  std::vector<Subregion> children(cuts);
  for (std::size_t i = 0; i < cuts; ++i) {
    auto& c = children[i];
    c.box = boxes[i];
    c.label = RegionLabel::remaining;
    c.level = region.level + 1;
    c.birth_iteration = region.birth_iteration;
    c.model = region.model;
    c.model_inherited = region.model != nullptr;
  }
  const auto e = static_cast<Eigen::Index>(dim);
  for (std::size_t s = 0; s < region.samples.size(); ++s) {
    const double v = region.samples.points[s][e];
    std::size_t i = 0;
    while (i + 1 < cuts && v > boxes[i].upper(dim)) ++i;
    children[i].samples.add(region.samples.points[s], region.samples.values[s]);
  }
  return children;
}

/// Monte-Carlo estimate of the delta_c-level extreme quantiles of the surrogate
/// over `box`: R replicates of M uniform draws, max of y + z s and min of y - z s
/// per replicate, z = Phi^{-1}(1 - delta_c/2). Variances are of the replicate mean.
inline QuantileEstimate mc_step(const Hyperbox& box, const GaussianProcess& gp, std::size_t reps,
                                std::size_t draws, double delta_c, Rng& rng) {
  if (reps < 2) throw ConfigInvalid("mc_step: need at least 2 replicates");
  if (draws < 1) throw ConfigInvalid("mc_step: need at least 1 draw per replicate");
  const double z = normal_quantile(1.0 - delta_c / 2.0);
  std::vector<double> hi(reps), lo(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < draws; ++m) {
      const Prediction p = gp.predict(uniform_point(box, rng));
      const double s = std::sqrt(p.variance);
      mx = std::max(mx, p.mean + z * s);
      mn = std::min(mn, p.mean - z * s);
    }
    hi[r] = mx;
    lo[r] = mn;
  }
  auto mean_and_var_of_mean = [reps](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / static_cast<double>(reps - 1) / static_cast<double>(reps)};
  };
  QuantileEstimate q;
  std::tie(q.q_max_mean, q.q_max_var) = mean_and_var_of_mean(hi);
  std::tie(q.q_min_mean, q.q_min_var) = mean_and_var_of_mean(lo);
  return q;
}

inline bool at_volume_floor(const Hyperbox& box, double delta_v, const Point& root_extents) {
  double floor = 1.0;
  for (Eigen::Index l = 0; l < root_extents.size(); ++l) floor *= delta_v * root_extents[l];
  return box.volume() <= floor;
}

/// Classification automaton. Bounds use half-width z * sqrt(Var).
inline RegionLabel classify(RegionLabel current, const Hyperbox& box,
                            const std::optional<QuantileEstimate>& quantiles, double delta_c,
                            double delta_v, const Point& root_extents) {
  if (at_volume_floor(box, delta_v, root_extents)) return RegionLabel::unclassified;
  if (current != RegionLabel::satisfying && current != RegionLabel::violating &&
      current != RegionLabel::remaining)
    return current;
  if (!quantiles) throw MissingQuantiles("classify: quantile estimate required");
  const double z = normal_quantile(1.0 - delta_c / 2.0);
  const double upper_of_max = quantiles->q_max_mean + z * std::sqrt(quantiles->q_max_var);
  const double lower_of_min = quantiles->q_min_mean - z * std::sqrt(quantiles->q_min_var);
  switch (current) {
    case RegionLabel::satisfying:
      return lower_of_min <= 0.0 ? RegionLabel::reclassified_plus : RegionLabel::satisfying;
    case RegionLabel::violating:
      return upper_of_max >= 0.0 ? RegionLabel::reclassified_minus : RegionLabel::violating;
    default:
      if (upper_of_max < 0.0) return RegionLabel::violating;
      if (lower_of_min > 0.0) return RegionLabel::satisfying;
      return RegionLabel::remaining;
  }
}

inline RegionLabel classify(const Subregion& region, double delta_c, double delta_v,
                            const Point& root_extents) {
  return classify(region.label, region.box, region.quantiles, delta_c, delta_v, root_extents);
}

inline bool transition_allowed(RegionLabel from, RegionLabel to) noexcept {
  if (from == to) return true;
  switch (from) {
    case RegionLabel::remaining:
      return to == RegionLabel::satisfying || to == RegionLabel::violating ||
             to == RegionLabel::unclassified;
    case RegionLabel::satisfying: return to == RegionLabel::reclassified_plus;
    case RegionLabel::violating: return to == RegionLabel::reclassified_minus;
    // A reclassified leaf that can no longer be cut is parked at the floor.
    case RegionLabel::reclassified_plus:
    case RegionLabel::reclassified_minus: return to == RegionLabel::unclassified;
    default: return false;
  }
}

/// The evolving partition: leaves tile the root box and each leaf sits in
/// exactly one classification set.
class PartitionTree {
 public:
  explicit PartitionTree(Hyperbox root, SampleBatch samples = {}) : root_(std::move(root)) {
    Subregion s;
    s.box = root_;
    s.samples = std::move(samples);
    insert(std::move(s));
  }

  const Hyperbox& root() const noexcept { return root_; }
  Point root_extents() const { return root_.extents(); }
  const std::map<LeafId, Subregion>& leaves() const noexcept { return leaves_; }
  std::size_t size() const noexcept { return leaves_.size(); }

  bool is_leaf(LeafId id) const { return leaves_.count(id) != 0; }

  const Subregion& leaf(LeafId id) const {
    const auto it = leaves_.find(id);
    if (it == leaves_.end()) throw NotALeaf("leaf " + std::to_string(id) + " is not a current leaf");
    return it->second;
  }

  /// Mutable access for samples, model and quantiles; labels change only via update().
  Subregion& leaf(LeafId id) {
    const auto it = leaves_.find(id);
    if (it == leaves_.end()) throw NotALeaf("leaf " + std::to_string(id) + " is not a current leaf");
    return it->second;
  }

  const std::set<LeafId>& theta(RegionLabel l) const { return theta_[label_index(l)]; }

  std::vector<LeafId> ids_with(std::initializer_list<RegionLabel> labels) const {
    std::vector<LeafId> out;
    for (const auto& [id, s] : leaves_)
      for (auto l : labels)
        if (s.label == l) {
          out.push_back(id);
          break;
        }
    return out;
  }

  /// Moves a leaf between classification sets.
  void update(LeafId id, RegionLabel new_label) {
    auto& s = leaf(id);
    if (s.label == new_label) return;
    if (!transition_allowed(s.label, new_label))
      throw InvalidTransition(std::string("transition ") + std::string(to_string(s.label)) + " -> " +
                              std::string(to_string(new_label)) + " is not allowed");
    theta_[label_index(s.label)].erase(id);
    theta_[label_index(new_label)].insert(id);
    s.label = new_label;
  }

  /// Replaces a remaining/reclassified leaf by its children; returns their ids.
  std::vector<LeafId> replace_with_children(LeafId parent, std::vector<Subregion> children) {
    const auto& p = leaf(parent);
    if (p.label != RegionLabel::remaining && p.label != RegionLabel::reclassified_plus &&
        p.label != RegionLabel::reclassified_minus)
      throw InvalidTransition("only r, r+ and r- leaves can be branched");
    theta_[label_index(p.label)].erase(parent);
    leaves_.erase(parent);
    std::vector<LeafId> ids;
    ids.reserve(children.size());
    for (auto& c : children) ids.push_back(insert(std::move(c)));
    return ids;
  }

  double volume_of(std::initializer_list<RegionLabel> labels) const {
    double v = 0.0;
    for (auto l : labels)
      for (auto id : theta_[label_index(l)]) v += leaves_.at(id).box.volume();
    return v;
  }

  double total_volume() const {
    double v = 0.0;
    for (const auto& [id, s] : leaves_) v += s.box.volume();
    return v;
  }

  /// Throws std::logic_error when the tiling or set bookkeeping is broken.
  /// The pairwise overlap test is quadratic in the number of leaves.
  void check_invariants(bool pairwise = true) const {
    const double vs = root_.volume();
    if (std::fabs(total_volume() - vs) > 1e-9 * vs)
      throw std::logic_error("leaf volumes do not sum to the root volume");
    std::size_t members = 0;
    for (auto l : kAllLabels) {
      for (auto id : theta_[label_index(l)]) {
        const auto it = leaves_.find(id);
        if (it == leaves_.end() || it->second.label != l)
          throw std::logic_error("classification set entry inconsistent with leaf label");
      }
      members += theta_[label_index(l)].size();
    }
    if (members != leaves_.size()) throw std::logic_error("leaf missing from classification sets");
    for (const auto& [id, s] : leaves_) {
      if (!s.box.contains(s.box.lower()) || s.box.volume() <= 0.0)
        throw std::logic_error("degenerate leaf box");
      for (std::size_t i = 0; i < s.samples.size(); ++i)
        if (!s.box.contains(s.samples.points[i])) throw std::logic_error("sample outside its leaf");
    }
    if (!pairwise) return;
    for (auto a = leaves_.begin(); a != leaves_.end(); ++a) {
      for (auto b = std::next(a); b != leaves_.end(); ++b) {
        double overlap = 1.0;
        for (std::size_t l = 0; l < root_.dim() && overlap > 0.0; ++l) {
          const double lo = std::max(a->second.box.lower(l), b->second.box.lower(l));
          const double hi = std::min(a->second.box.upper(l), b->second.box.upper(l));
          overlap *= std::max(hi - lo, 0.0);
        }
        if (overlap > 1e-12 * vs) throw std::logic_error("leaves overlap");
      }
    }
  }

 private:
  LeafId insert(Subregion s) {
    const LeafId id = next_id_++;
    s.id = id;
    theta_[label_index(s.label)].insert(id);
    leaves_.emplace(id, std::move(s));
    return id;
  }

  Hyperbox root_;
  std::map<LeafId, Subregion> leaves_;
  std::array<std::set<LeafId>, kAllLabels.size()> theta_;
  LeafId next_id_ = 0;
};

inline void tree_update(PartitionTree& tree, LeafId id, RegionLabel new_label) {
  tree.update(id, new_label);
}

/// One row of the leaf dump.
struct LeafRecord {
  std::vector<double> lower;
  std::vector<double> upper;
  RegionLabel label = RegionLabel::remaining;
  int level = 0;
  int birth_iteration = 0;
  std::size_t sample_count = 0;
  std::optional<double> q_min_mean;
  std::optional<double> q_max_mean;
};

inline std::vector<LeafRecord> leaf_records(const PartitionTree& tree) {
  std::vector<LeafRecord> out;
  out.reserve(tree.size());
  for (const auto& [id, s] : tree.leaves()) {
    LeafRecord r{to_std(s.box.lower()), to_std(s.box.upper()), s.label, s.level,
                 s.birth_iteration, s.samples.size(), std::nullopt, std::nullopt};
    if (s.quantiles) {
      r.q_min_mean = s.quantiles->q_min_mean;
      r.q_max_mean = s.quantiles->q_max_mean;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace partx
