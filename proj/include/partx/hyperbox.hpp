#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "partx/errors.hpp"

namespace partx {

using Point = Eigen::VectorXd;

/// Axis-aligned box [lower, upper] with strictly positive side lengths.
class Hyperbox {
 public:
  Hyperbox() = default;

  Hyperbox(Point lower, Point upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size())
      throw DimensionMismatch("Hyperbox: lower and upper bounds differ in dimension");
    if (lower_.size() == 0) throw EmptyBox("Hyperbox: zero-dimensional box");
    for (Eigen::Index l = 0; l < lower_.size(); ++l) {
      if (!(lower_[l] < upper_[l]))
        throw EmptyBox("Hyperbox: side " + std::to_string(l) + " has non-positive length");
    }
  }

  Hyperbox(const std::vector<double>& lower, const std::vector<double>& upper)
      : Hyperbox(Eigen::Map<const Point>(lower.data(), static_cast<Eigen::Index>(lower.size())),
                 Eigen::Map<const Point>(upper.data(), static_cast<Eigen::Index>(upper.size()))) {}

  /// [lo, hi]^dim
  static Hyperbox cube(std::size_t dim, double lo, double hi) {
    return Hyperbox(Point::Constant(static_cast<Eigen::Index>(dim), lo),
                    Point::Constant(static_cast<Eigen::Index>(dim), hi));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(lower_.size()); }
  const Point& lower() const noexcept { return lower_; }
  const Point& upper() const noexcept { return upper_; }
  double lower(std::size_t l) const { return lower_[static_cast<Eigen::Index>(l)]; }
  double upper(std::size_t l) const { return upper_[static_cast<Eigen::Index>(l)]; }
  double side(std::size_t l) const { return upper(l) - lower(l); }
  Point extents() const { return upper_ - lower_; }

  double volume() const {
    double v = 1.0;
    for (std::size_t l = 0; l < dim(); ++l) v *= side(l);
    return v;
  }

  /// Closed-box membership.
  bool contains(const Point& x) const {
    if (static_cast<std::size_t>(x.size()) != dim()) return false;
    for (std::size_t l = 0; l < dim(); ++l) {
      const auto i = static_cast<Eigen::Index>(l);
      if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
    }
    return true;
  }

  /// Maps the box affinely onto [0,1]^d.
  Point to_unit(const Point& x) const { return (x - lower_).cwiseQuotient(upper_ - lower_); }
  Point from_unit(const Point& u) const {
    return lower_ + u.cwiseProduct(upper_ - lower_);
  }

  /// Cuts the box into `pieces` equal slabs along dimension `dim_index`.
  std::vector<Hyperbox> split(std::size_t dim_index, std::size_t pieces) const {
    std::vector<Hyperbox> out;
    out.reserve(pieces);
    const auto d = static_cast<Eigen::Index>(dim_index);
    const double lo = lower_[d];
    const double width = (upper_[d] - lo) / static_cast<double>(pieces);
    for (std::size_t i = 0; i < pieces; ++i) {
      Point a = lower_;
      Point b = upper_;
      a[d] = lo + width * static_cast<double>(i);
      b[d] = (i + 1 == pieces) ? upper_[d] : lo + width * static_cast<double>(i + 1);
      out.emplace_back(std::move(a), std::move(b));
    }
    return out;
  }

 private:
  Point lower_;
  Point upper_;
};

inline std::vector<double> to_std(const Point& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace partx
