#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chaosode {

/// Base class of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An RK4 stage or update produced NaN/Inf.
class NonFinite : public Error {
 public:
  NonFinite() : Error("non-finite value in RK4 step") {}
};

/// A solve hit a non-finite state; the partial trajectory is discarded.
class Diverged : public Error {
 public:
  explicit Diverged(double at_time)
      : Error("solver diverged at t=" + std::to_string(at_time)), at_time_(at_time) {}
  double at_time() const { return at_time_; }

 private:
  double at_time_;
};

/// Hankel moment system could not be solved (degenerate sample).
class SingularMoments : public Error {
 public:
  SingularMoments(std::size_t dimension, std::size_t degree)
      : Error("singular moment system for dimension " + std::to_string(dimension) +
              " at degree " + std::to_string(degree)),
        dimension_(dimension),
        degree_(degree) {}
  std::size_t dimension() const { return dimension_; }
  std::size_t degree() const { return degree_; }

 private:
  std::size_t dimension_;
  std::size_t degree_;
};

/// K + lambda*I is numerically singular.
class FactorizationFailed : public Error {
 public:
  explicit FactorizationFailed(const std::string& what) : Error("kernel factorization failed: " + what) {}
};

/// Gradient requested at parameters whose primal solve diverges.
class DivergedNoGradient : public Error {
 public:
  DivergedNoGradient() : Error("primal solve diverged; no gradient available") {}
};

/// Quasi-Newton start point is infeasible.
class StalledAtInfeasible : public Error {
 public:
  StalledAtInfeasible() : Error("quasi-Newton start point is infeasible") {}
};

/// No pipeline stage produced a feasible single-shooting loss.
class AllStagesFailed : public Error {
 public:
  AllStagesFailed() : Error("no stage achieved a feasible single-shooting loss") {}
};

/// Aggregation over a group without records.
class EmptyGroup : public Error {
 public:
  explicit EmptyGroup(const std::string& group) : Error("empty group: " + group) {}
};

/// Malformed or unknown configuration entry.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

/// Missing or malformed input file.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what) {}
};

}  // namespace chaosode
