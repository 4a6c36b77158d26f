#ifndef HOMOSCALE_GRID_HPP
#define HOMOSCALE_GRID_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "homoscale/common.hpp"
#include "homoscale/fft.hpp"

namespace homoscale {

/// Tensor-product sampling grid for 1-periodic fields of n blocks of d
/// variables each. Axes are ordered block-major with the last (innermost)
/// block varying fastest, so per-outer-node inner slices are contiguous.
struct GridSpec {
  int d = 1;                // spatial dimension per block (1 or 2)
  int n = 1;                // number of blocks
  std::vector<int> res;     // grid points per period, one entry per block

  GridSpec() = default;
  GridSpec(int d_, int n_, std::vector<int> res_) : d(d_), n(n_), res(std::move(res_)) {
    validate();
  }
  GridSpec(int d_, int n_, int uniform_res) : d(d_), n(n_), res(n_, uniform_res) { validate(); }

  void validate(std::size_t max_samples = (std::size_t{1} << 27)) const {
    require(d == 1 || d == 2, "GridSpec: d must be 1 or 2");
    require(n >= 1, "GridSpec: n must be >= 1");
    require(static_cast<int>(res.size()) == n, "GridSpec: one resolution per block");
    for (int r : res) {
      require(r >= 4 && r % 2 == 0, "GridSpec: resolution must be even and >= 4");
      require(fft::is_pow2(r), "GridSpec: resolution must be a power of two");
    }
    require(npoints() <= max_samples, "GridSpec: sample count exceeds memory budget");
  }

  int axes() const { return d * n; }
  int axis_size(int axis) const { return res[axis / d]; }
  int block_of_axis(int axis) const { return axis / d; }

  std::vector<int> dims() const {
    std::vector<int> out(axes());
    for (int a = 0; a < axes(); ++a) out[a] = axis_size(a);
    return out;
  }

  std::size_t npoints() const {
    std::size_t total = 1;
    for (int a = 0; a < axes(); ++a) total *= axis_size(a);
    return total;
  }

  /// Points in one block (the product over that block's d axes).
  std::size_t block_points(int block) const {
    std::size_t total = 1;
    for (int c = 0; c < d; ++c) total *= res[block];
    return total;
  }

  /// Grid with the innermost block dropped (n-1 blocks).
  GridSpec outer() const {
    require(n >= 2, "GridSpec::outer: needs at least two blocks");
    return GridSpec(d, n - 1, std::vector<int>(res.begin(), res.end() - 1));
  }

  /// Grid extended by one innermost block of the given resolution.
  GridSpec with_inner(int inner_res) const {
    std::vector<int> r = res;
    r.push_back(inner_res);
    return GridSpec(d, n + 1, std::move(r));
  }

  /// Coordinate of a node along one axis, in [0,1).
  double coord(std::size_t node, int axis) const {
    std::size_t stride = 1;
    for (int a = axes() - 1; a > axis; --a) stride *= axis_size(a);
    std::size_t idx = (node / stride) % axis_size(axis);
    return static_cast<double>(idx) / axis_size(axis);
  }

  bool operator==(const GridSpec& other) const {
    return d == other.d && n == other.n && res == other.res;
  }
};

}  // namespace homoscale

#endif  // HOMOSCALE_GRID_HPP
