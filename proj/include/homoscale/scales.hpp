#ifndef HOMOSCALE_SCALES_HPP
#define HOMOSCALE_SCALES_HPP

#include <vector>

#include "homoscale/common.hpp"

namespace homoscale {

/// The microscopic scales eps_1 > eps_2 > ... > eps_n in (0,1], their ratios
/// delta_i = eps_i/eps_1 and the zero-order regularization parameter tau.
struct ScaleVector {
  std::vector<double> epsilons;
  std::vector<double> deltas;  // deltas[0] = 1
  double tau = 0.0;

  ScaleVector() = default;
  explicit ScaleVector(std::vector<double> eps, double tau_ = 0.0)
      : epsilons(std::move(eps)), tau(tau_) {
    require(!epsilons.empty(), "ScaleVector: at least one scale");
    require(epsilons.front() <= 1.0 && epsilons.front() > 0.0,
            "ScaleVector: scales must lie in (0,1]");
    for (std::size_t i = 1; i < epsilons.size(); ++i) {
      require(epsilons[i] > 0.0, "ScaleVector: scales must be positive");
      require(epsilons[i] < epsilons[i - 1],
              "ScaleVector: scales must be strictly decreasing; merge equal scales into one");
    }
    require(tau >= 0.0, "ScaleVector: tau must be >= 0");
    deltas.resize(epsilons.size());
    for (std::size_t i = 0; i < epsilons.size(); ++i) deltas[i] = epsilons[i] / epsilons[0];
  }

  int n() const { return static_cast<int>(epsilons.size()); }

  /// Ratio eps_{i-1}/eps_i for gap i (1-based block index of the smaller scale).
  double gap_ratio(int i) const { return epsilons[i - 1] / epsilons[i]; }

  /// The leading `count` scales as a new vector (tau preserved).
  ScaleVector prefix(int count) const {
    return ScaleVector(std::vector<double>(epsilons.begin(), epsilons.begin() + count), tau);
  }

  /// The trailing `count` scales as a new vector (tau preserved).
  ScaleVector suffix(int count) const {
    return ScaleVector(std::vector<double>(epsilons.end() - count, epsilons.end()), tau);
  }
};

}  // namespace homoscale

#endif  // HOMOSCALE_SCALES_HPP
