#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace partx {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Cholesky of the correlation matrix failed even at the largest jitter.
class FactorizationFailure : public Error {
 public:
  using Error::Error;
};

class InvalidLevel : public Error {
 public:
  using Error::Error;
};

class InvalidProbability : public Error {
 public:
  using Error::Error;
};

class EmptyBox : public Error {
 public:
  using Error::Error;
};

class NoBranchableDimension : public Error {
 public:
  using Error::Error;
};

class MissingQuantiles : public Error {
 public:
  using Error::Error;
};

class NotALeaf : public Error {
 public:
  using Error::Error;
};

class InvalidTransition : public Error {
 public:
  using Error::Error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

class DimensionTooSmall : public Error {
 public:
  using Error::Error;
};

/// The objective failed (threw, returned a non-finite value, or an external
/// process misbehaved). Carries the offending input point.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, std::vector<double> point)
      : Error(what), point_(std::move(point)) {}

  const std::vector<double>& point() const noexcept { return point_; }

 private:
  std::vector<double> point_;
};

class PointOutsideDomain : public Error {
 public:
  PointOutsideDomain(const std::string& what, std::size_t row)
      : Error(what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class MalformedRow : public Error {
 public:
  MalformedRow(const std::string& what, std::size_t row)
      : Error(what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace partx
