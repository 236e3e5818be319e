#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace chaosode {

/// Training data: noisy states at ascending times, plus the generating
/// metadata. The initial state (t0, x0) is assumed known.
struct ObservationSet {
  std::vector<double> times;
  Eigen::MatrixXd states;  // rows = times
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> x0;
  double t0 = 0.0;

  std::size_t size() const { return times.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(states.cols()); }
};

}  // namespace chaosode
