#ifndef HOMOSCALE_FIELD_HPP
#define HOMOSCALE_FIELD_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "homoscale/fft.hpp"
#include "homoscale/grid.hpp"
#include "homoscale/tensor.hpp"

namespace homoscale {

/// Sampled real tensor field on the product torus described by a GridSpec.
///
/// Components are stored component-major; each component is a row-major array
/// over the grid axes. Tensor order 0/1/2 covers scalars, d-vectors and
/// d x d matrices; order 3 appears for flux correctors. Values are immutable
/// by convention once a field leaves its constructor, and every operation
/// below is a pure function.
class TorusField {
 public:
  TorusField() = default;
  TorusField(GridSpec grid, int order)
      : grid_(std::move(grid)), order_(order),
        samples_(ncomp_of(grid_, order) * grid_.npoints(), 0.0) {}
  TorusField(GridSpec grid, int order, std::vector<double> samples)
      : grid_(std::move(grid)), order_(order), samples_(std::move(samples)) {
    require(samples_.size() == ncomp_of(grid_, order_) * grid_.npoints(),
            "TorusField: sample count does not match grid and shape");
  }

  static std::size_t ncomp_of(const GridSpec& g, int order) {
    std::size_t c = 1;
    for (int i = 0; i < order; ++i) c *= g.d;
    return c;
  }

  const GridSpec& grid() const { return grid_; }
  int order() const { return order_; }
  std::size_t ncomp() const { return ncomp_of(grid_, order_); }
  std::size_t npoints() const { return grid_.npoints(); }

  std::span<const double> comp(std::size_t c) const {
    return {samples_.data() + c * npoints(), npoints()};
  }
  std::span<double> comp(std::size_t c) {
    return {samples_.data() + c * npoints(), npoints()};
  }
  const std::vector<double>& samples() const { return samples_; }
  std::vector<double>& samples() { return samples_; }

  double value(std::size_t c, std::size_t node) const { return samples_[c * npoints() + node]; }
  double& value(std::size_t c, std::size_t node) { return samples_[c * npoints() + node]; }

  /// Matrix entry accessor for order-2 fields.
  double mat(int i, int j, std::size_t node) const { return value(i * grid_.d + j, node); }

  TorusField& operator+=(const TorusField& o) {
    require(samples_.size() == o.samples_.size(), "TorusField: shape mismatch");
    for (std::size_t i = 0; i < samples_.size(); ++i) samples_[i] += o.samples_[i];
    return *this;
  }
  TorusField& operator-=(const TorusField& o) {
    require(samples_.size() == o.samples_.size(), "TorusField: shape mismatch");
    for (std::size_t i = 0; i < samples_.size(); ++i) samples_[i] -= o.samples_[i];
    return *this;
  }
  TorusField& operator*=(double s) {
    for (double& v : samples_) v *= s;
    return *this;
  }
  friend TorusField operator+(TorusField a, const TorusField& b) { return a += b; }
  friend TorusField operator-(TorusField a, const TorusField& b) { return a -= b; }
  friend TorusField operator*(TorusField a, double s) { return a *= s; }
  friend TorusField operator*(double s, TorusField a) { return a *= s; }

 private:
  GridSpec grid_;
  int order_ = 0;
  std::vector<double> samples_;
};

namespace field_ops {

/// Spectrum of a single component (full analysis transform).
inline std::vector<cd> spectrum(const TorusField& f, std::size_t c) {
  auto data = fft::to_complex(f.comp(c).data(), f.npoints());
  fft::forward(data, f.grid().dims());
  return data;
}

/// Derivative of order `ell` of one component along one axis, in place on a
/// complex copy of the data. Nyquist is zeroed for odd orders.
inline void derive_axis(std::vector<cd>& data, const std::vector<int>& dims, int axis, int ell) {
  fft::transform_axis(data, dims, axis, -1);
  const int n = dims[axis];
  std::size_t stride = 1;
  for (std::size_t a = axis + 1; a < dims.size(); ++a) stride *= dims[a];
  std::size_t outer = 1;
  for (int a = 0; a < axis; ++a) outer *= dims[a];
  std::vector<cd> mult(n);
  for (int k = 0; k < n; ++k) {
    if (k == n / 2 && (ell % 2) == 1) {
      mult[k] = cd(0.0, 0.0);
      continue;
    }
    double f = fft::wrapped_freq(k, n);
    cd m(0.0, 2.0 * std::numbers::pi * f);
    cd p(1.0, 0.0);
    for (int e = 0; e < ell; ++e) p *= m;
    mult[k] = p;
  }
  const std::size_t block = stride * n;
  for (std::size_t o = 0; o < outer; ++o)
    for (int k = 0; k < n; ++k) {
      cd* base = data.data() + o * block + k * stride;
      for (std::size_t s = 0; s < stride; ++s) base[s] *= mult[k];
    }
  fft::transform_axis(data, dims, axis, +1);
}

/// Single-axis spectral derivative of a whole field (all components).
inline TorusField derive_axis_field(const TorusField& f, int axis, int ell = 1) {
  TorusField out(f.grid(), f.order());
  const auto dims = f.grid().dims();
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    auto data = fft::to_complex(f.comp(c).data(), f.npoints());
    derive_axis(data, dims, axis, ell);
    fft::real_part(data, out.comp(c).data());
  }
  return out;
}

/// Order-`ell` spectral derivative with respect to one block. The output
/// tensor order grows by `ell`; each new index (appended last, fastest)
/// ranges over the block's d components.
inline TorusField scale_partial(const TorusField& f, int block, int ell = 1) {
  const GridSpec& g = f.grid();
  require(block >= 0 && block < g.n, "scale_partial: block out of range");
  require(ell >= 1, "scale_partial: order must be >= 1");
  TorusField cur = f;
  const auto dims = g.dims();
  for (int e = 0; e < ell; ++e) {
    TorusField next(g, cur.order() + 1);
    for (std::size_t c = 0; c < cur.ncomp(); ++c) {
      auto base = fft::to_complex(cur.comp(c).data(), cur.npoints());
      for (int m = 0; m < g.d; ++m) {
        auto data = base;
        derive_axis(data, dims, block * g.d + m, 1);
        fft::real_part(data, next.comp(c * g.d + m).data());
      }
    }
    cur = std::move(next);
  }
  return cur;
}

/// Directional gradient sum_{i<upto} delta_i^{-1} d/d y_i^m, appended as one
/// new tensor index m. `upto` limits the sum to the leading blocks.
inline TorusField directional_gradient(const TorusField& f, const std::vector<double>& deltas,
                                       int upto) {
  const GridSpec& g = f.grid();
  require(upto >= 1 && upto <= g.n, "directional_gradient: bad block limit");
  require(static_cast<int>(deltas.size()) >= upto, "directional_gradient: need a delta per block");
  TorusField out(g, f.order() + 1);
  const auto dims = g.dims();
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    auto base = fft::to_complex(f.comp(c).data(), f.npoints());
    for (int m = 0; m < g.d; ++m) {
      std::vector<double> acc(f.npoints(), 0.0);
      for (int i = 0; i < upto; ++i) {
        auto data = base;
        derive_axis(data, dims, i * g.d + m, 1);
        const double w = 1.0 / deltas[i];
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += w * data[p].real();
      }
      auto dst = out.comp(c * g.d + m);
      std::copy(acc.begin(), acc.end(), dst.begin());
    }
  }
  return out;
}

inline TorusField directional_gradient(const TorusField& f, const std::vector<double>& deltas) {
  return directional_gradient(f, deltas, f.grid().n);
}

/// Divergence over the last tensor index with per-block weights:
/// out = sum_m sum_{i<upto} delta_i^{-1} d/d y_i^m T[..., m].
inline TorusField directional_divergence(const TorusField& f, const std::vector<double>& deltas,
                                         int upto) {
  const GridSpec& g = f.grid();
  require(f.order() >= 1, "directional_divergence: needs tensor order >= 1");
  TorusField out(g, f.order() - 1);
  const auto dims = g.dims();
  for (std::size_t c = 0; c < out.ncomp(); ++c) {
    std::vector<double> acc(f.npoints(), 0.0);
    for (int m = 0; m < g.d; ++m) {
      auto base = fft::to_complex(f.comp(c * g.d + m).data(), f.npoints());
      for (int i = 0; i < upto; ++i) {
        auto data = base;
        derive_axis(data, dims, i * g.d + m, 1);
        const double w = 1.0 / deltas[i];
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += w * data[p].real();
      }
    }
    auto dst = out.comp(c);
    std::copy(acc.begin(), acc.end(), dst.begin());
  }
  return out;
}

/// Divergence over the FIRST tensor index with per-block weights:
/// out[rest] = sum_m sum_{i<upto} delta_i^{-1} d/d y_i^m T[m, rest].
inline TorusField directional_divergence_first_index(const TorusField& f,
                                                     const std::vector<double>& deltas, int upto) {
  const GridSpec& g = f.grid();
  require(f.order() >= 1, "directional_divergence_first_index: tensor order >= 1");
  TorusField out(g, f.order() - 1);
  const auto dims = g.dims();
  const std::size_t rest = out.ncomp();
  for (std::size_t c = 0; c < rest; ++c) {
    std::vector<double> acc(f.npoints(), 0.0);
    for (int m = 0; m < g.d; ++m) {
      auto base = fft::to_complex(f.comp(m * rest + c).data(), f.npoints());
      for (int i = 0; i < upto; ++i) {
        auto data = base;
        derive_axis(data, dims, i * g.d + m, 1);
        const double w = 1.0 / deltas[i];
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += w * data[p].real();
      }
    }
    auto dst = out.comp(c);
    std::copy(acc.begin(), acc.end(), dst.begin());
  }
  return out;
}

/// Directional gradient prepended as the FIRST tensor index:
/// out[m, rest] = sum_{i<upto} delta_i^{-1} d/d y_i^m T[rest].
inline TorusField directional_gradient_first_index(const TorusField& f,
                                                   const std::vector<double>& deltas, int upto) {
  const GridSpec& g = f.grid();
  TorusField out(g, f.order() + 1);
  const auto dims = g.dims();
  const std::size_t rest = f.ncomp();
  for (std::size_t c = 0; c < rest; ++c) {
    auto base = fft::to_complex(f.comp(c).data(), f.npoints());
    for (int m = 0; m < g.d; ++m) {
      std::vector<double> acc(f.npoints(), 0.0);
      for (int i = 0; i < upto; ++i) {
        auto data = base;
        derive_axis(data, dims, i * g.d + m, 1);
        const double w = 1.0 / deltas[i];
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += w * data[p].real();
      }
      auto dst = out.comp(m * rest + c);
      std::copy(acc.begin(), acc.end(), dst.begin());
    }
  }
  return out;
}

/// Plain divergence over the last tensor index with respect to one block.
inline TorusField block_divergence(const TorusField& f, int block) {
  const GridSpec& g = f.grid();
  require(f.order() >= 1, "block_divergence: needs tensor order >= 1");
  TorusField out(g, f.order() - 1);
  const auto dims = g.dims();
  for (std::size_t c = 0; c < out.ncomp(); ++c) {
    std::vector<double> acc(f.npoints(), 0.0);
    for (int m = 0; m < g.d; ++m) {
      auto data = fft::to_complex(f.comp(c * g.d + m).data(), f.npoints());
      derive_axis(data, dims, block * g.d + m, 1);
      for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += data[p].real();
    }
    auto dst = out.comp(c);
    std::copy(acc.begin(), acc.end(), dst.begin());
  }
  return out;
}

/// Average over one block; the block disappears from the grid.
inline TorusField partial_average(const TorusField& f, int block) {
  const GridSpec& g = f.grid();
  require(block >= 0 && block < g.n, "partial_average: block out of range");
  require(g.n >= 2, "partial_average: use full_average for the last block");
  std::vector<int> res;
  for (int b = 0; b < g.n; ++b)
    if (b != block) res.push_back(g.res[b]);
  GridSpec rg(g.d, g.n - 1, std::move(res));
  TorusField out(rg, f.order());

  // Strides of the averaged block within the full row-major layout.
  std::size_t inner = 1;  // product of axis sizes after the block
  for (int a = (block + 1) * g.d; a < g.axes(); ++a) inner *= g.axis_size(a);
  std::size_t bpts = g.block_points(block);
  std::size_t outer = f.npoints() / (inner * bpts);
  const double w = 1.0 / static_cast<double>(bpts);
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    auto src = f.comp(c);
    auto dst = out.comp(c);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t s = 0; s < inner; ++s) {
        double acc = 0.0;
        for (std::size_t b = 0; b < bpts; ++b) acc += src[(o * bpts + b) * inner + s];
        dst[o * inner + s] = acc * w;
      }
  }
  return out;
}

/// Average over the innermost block (the common case in the recursions).
inline TorusField inner_average(const TorusField& f) { return partial_average(f, f.grid().n - 1); }

/// Mean of every component over the whole torus.
inline std::vector<double> full_average(const TorusField& f) {
  std::vector<double> out(f.ncomp(), 0.0);
  const double w = 1.0 / static_cast<double>(f.npoints());
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    double acc = 0.0;
    for (double v : f.comp(c)) acc += v;
    out[c] = acc * w;
  }
  return out;
}

inline Mat full_average_mat(const TorusField& f) {
  require(f.order() == 2, "full_average_mat: order-2 field expected");
  Mat m(f.grid().d);
  auto avg = full_average(f);
  for (int i = 0; i < f.grid().d * f.grid().d; ++i) m.a[i] = avg[i];
  return m;
}

/// Extend a field on the outer blocks to the full grid, constant along the
/// added innermost block.
inline TorusField lift_inner(const TorusField& f, const GridSpec& full) {
  require(full.n == f.grid().n + 1, "lift_inner: grid must add one block");
  require(full.d == f.grid().d, "lift_inner: dimension mismatch");
  for (int b = 0; b + 1 < full.n; ++b)
    require(full.res[b] == f.grid().res[b], "lift_inner: outer resolutions must match");
  TorusField out(full, f.order());
  const std::size_t inner = full.block_points(full.n - 1);
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    auto src = f.comp(c);
    auto dst = out.comp(c);
    for (std::size_t o = 0; o < src.size(); ++o)
      for (std::size_t i = 0; i < inner; ++i) dst[o * inner + i] = src[o];
  }
  return out;
}

/// Subtract the inner-block mean at every outer node (projection used by the
/// recursive solves to enforce solvability exactly).
inline void project_inner_mean(TorusField& f) {
  const GridSpec& g = f.grid();
  const std::size_t inner = g.block_points(g.n - 1);
  const std::size_t outer = f.npoints() / inner;
  const double w = 1.0 / static_cast<double>(inner);
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    auto s = f.comp(c);
    for (std::size_t o = 0; o < outer; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < inner; ++i) acc += s[o * inner + i];
      acc *= w;
      for (std::size_t i = 0; i < inner; ++i) s[o * inner + i] -= acc;
    }
  }
}

/// Pointwise matrix * vector for an order-2 field and an order-1 field.
inline TorusField matvec(const TorusField& A, const TorusField& v) {
  require(A.order() == 2 && v.order() >= 1, "matvec: need matrix and vector fields");
  require(A.grid() == v.grid(), "matvec: grid mismatch");
  const int d = A.grid().d;
  TorusField out(A.grid(), v.order());
  // Contract the vector's last index with the matrix column index.
  std::size_t lead = v.ncomp() / d;
  for (std::size_t l = 0; l < lead; ++l)
    for (int i = 0; i < d; ++i) {
      auto dst = out.comp(l * d + i);
      std::fill(dst.begin(), dst.end(), 0.0);
      for (int j = 0; j < d; ++j) {
        auto a = A.comp(i * d + j);
        auto s = v.comp(l * d + j);
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += a[p] * s[p];
      }
    }
  return out;
}

/// Pointwise dot product of two order-1 fields (or contraction of the last
/// index of `a` against `b`).
inline TorusField dot(const TorusField& a, const TorusField& b) {
  require(a.order() >= 1 && b.order() == 1, "dot: vector fields expected");
  require(a.grid() == b.grid(), "dot: grid mismatch");
  const int d = a.grid().d;
  TorusField out(a.grid(), a.order() - 1);
  std::size_t lead = a.ncomp() / d;
  for (std::size_t l = 0; l < lead; ++l) {
    auto dst = out.comp(l);
    std::fill(dst.begin(), dst.end(), 0.0);
    for (int m = 0; m < d; ++m) {
      auto x = a.comp(l * d + m);
      auto y = b.comp(m);
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += x[p] * y[p];
    }
  }
  return out;
}

/// Column j of a matrix field as a vector field (A e_j).
inline TorusField column(const TorusField& A, int j) {
  require(A.order() == 2, "column: matrix field expected");
  const int d = A.grid().d;
  TorusField out(A.grid(), 1);
  for (int i = 0; i < d; ++i) {
    auto src = A.comp(i * d + j);
    auto dst = out.comp(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

/// L2 norm with the componentwise-sum tensor convention: sum over components
/// of sqrt(mean(f_c^2)).
inline double l2_norm(const TorusField& f) {
  double total = 0.0;
  const double w = 1.0 / static_cast<double>(f.npoints());
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    double acc = 0.0;
    for (double v : f.comp(c)) acc += v * v;
    total += std::sqrt(acc * w);
  }
  return total;
}

/// Sup norm of the pointwise componentwise-sum tensor norm.
inline double linf_norm(const TorusField& f) {
  double best = 0.0;
  for (std::size_t p = 0; p < f.npoints(); ++p) {
    double s = 0.0;
    for (std::size_t c = 0; c < f.ncomp(); ++c) s += std::abs(f.value(c, p));
    best = std::max(best, s);
  }
  return best;
}

/// Dealiased pointwise product of two scalar components via 2x zero padding:
/// the result is the exact band-limited projection of the product of the two
/// trigonometric interpolants.
inline std::vector<double> multiply_dealiased_raw(const double* a, const double* b,
                                                  const std::vector<int>& dims) {
  std::size_t npts = 1;
  for (int d : dims) npts *= d;
  std::vector<int> big(dims);
  for (int& v : big) v *= 2;
  std::size_t bpts = npts << dims.size();

  auto fa = fft::to_complex(a, npts);
  fft::forward(fa, dims);
  auto pa = fft::pad_spectrum(fa, dims, big);
  fft::inverse(pa, big);

  auto fb = fft::to_complex(b, npts);
  fft::forward(fb, dims);
  auto pb = fft::pad_spectrum(fb, dims, big);
  fft::inverse(pb, big);

  for (std::size_t i = 0; i < bpts; ++i) pa[i] = cd(pa[i].real() * pb[i].real(), 0.0);
  fft::forward(pa, big);
  auto tr = fft::truncate_spectrum(pa, big, dims);
  fft::inverse(tr, dims);
  std::vector<double> out(npts);
  fft::real_part(tr, out.data());
  return out;
}

/// Dealiased matrix * vector product over the full grid.
inline TorusField matvec_dealiased(const TorusField& A, const TorusField& v) {
  require(A.order() == 2 && v.order() >= 1, "matvec_dealiased: need matrix and vector fields");
  require(A.grid() == v.grid(), "matvec_dealiased: grid mismatch");
  const int d = A.grid().d;
  const auto dims = A.grid().dims();
  TorusField out(A.grid(), v.order());
  std::size_t lead = v.ncomp() / d;
  for (std::size_t l = 0; l < lead; ++l)
    for (int i = 0; i < d; ++i) {
      auto dst = out.comp(l * d + i);
      std::fill(dst.begin(), dst.end(), 0.0);
      for (int j = 0; j < d; ++j) {
        auto prod =
            multiply_dealiased_raw(A.comp(i * d + j).data(), v.comp(l * d + j).data(), dims);
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += prod[p];
      }
    }
  return out;
}

/// Dealiased contraction of the last index of `a` against the vector `b`.
inline TorusField dot_dealiased(const TorusField& a, const TorusField& b) {
  require(a.order() >= 1 && b.order() == 1, "dot_dealiased: vector fields expected");
  require(a.grid() == b.grid(), "dot_dealiased: grid mismatch");
  const int d = a.grid().d;
  const auto dims = a.grid().dims();
  TorusField out(a.grid(), a.order() - 1);
  std::size_t lead = a.ncomp() / d;
  for (std::size_t l = 0; l < lead; ++l) {
    auto dst = out.comp(l);
    std::fill(dst.begin(), dst.end(), 0.0);
    for (int m = 0; m < d; ++m) {
      auto prod = multiply_dealiased_raw(a.comp(l * d + m).data(), b.comp(m).data(), dims);
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += prod[p];
    }
  }
  return out;
}

/// Matrix field with cached 2x-padded samples, for repeated dealiased
/// products against vector fields on the same grid.
class PaddedMatrix {
 public:
  explicit PaddedMatrix(const TorusField& A) : grid_(A.grid()) {
    require(A.order() == 2, "PaddedMatrix: matrix field expected");
    dims_ = grid_.dims();
    big_ = dims_;
    for (int& v : big_) v *= 2;
    bpts_ = 1;
    for (int v : big_) bpts_ *= v;
    comps_.resize(A.ncomp());
    for (std::size_t c = 0; c < A.ncomp(); ++c) {
      auto spec = fft::to_complex(A.comp(c).data(), A.npoints());
      fft::forward(spec, dims_);
      auto pad = fft::pad_spectrum(spec, dims_, big_);
      fft::inverse(pad, big_);
      comps_[c].resize(bpts_);
      for (std::size_t p = 0; p < bpts_; ++p) comps_[c][p] = pad[p].real();
    }
  }

  const GridSpec& grid() const { return grid_; }

  /// (A v) with v of tensor order >= 1; contraction over the last index.
  TorusField matvec(const TorusField& v) const {
    require(v.grid() == grid_, "PaddedMatrix::matvec: grid mismatch");
    require(v.order() >= 1, "PaddedMatrix::matvec: vector field expected");
    const int d = grid_.d;
    TorusField out(grid_, v.order());
    std::size_t lead = v.ncomp() / d;
    // Pad each component of v once.
    std::vector<std::vector<double>> vbig(v.ncomp());
    for (std::size_t c = 0; c < v.ncomp(); ++c) {
      auto spec = fft::to_complex(v.comp(c).data(), v.npoints());
      fft::forward(spec, dims_);
      auto pad = fft::pad_spectrum(spec, dims_, big_);
      fft::inverse(pad, big_);
      vbig[c].resize(bpts_);
      for (std::size_t p = 0; p < bpts_; ++p) vbig[c][p] = pad[p].real();
    }
    std::vector<cd> work(bpts_);
    for (std::size_t l = 0; l < lead; ++l)
      for (int i = 0; i < d; ++i) {
        for (std::size_t p = 0; p < bpts_; ++p) {
          double acc = 0.0;
          for (int j = 0; j < d; ++j) acc += comps_[i * d + j][p] * vbig[l * d + j][p];
          work[p] = cd(acc, 0.0);
        }
        fft::forward(work, big_);
        auto tr = fft::truncate_spectrum(work, big_, dims_);
        fft::inverse(tr, dims_);
        fft::real_part(tr, out.comp(l * d + i).data());
      }
    return out;
  }

 private:
  GridSpec grid_;
  std::vector<int> dims_, big_;
  std::size_t bpts_ = 0;
  std::vector<std::vector<double>> comps_;
};

/// Pointwise product of a scalar field against every component of `f`.
inline TorusField scalar_multiply_dealiased(const TorusField& s, const TorusField& f) {
  require(s.order() == 0, "scalar_multiply_dealiased: scalar first factor expected");
  require(s.grid() == f.grid(), "scalar_multiply_dealiased: grid mismatch");
  const auto dims = s.grid().dims();
  TorusField out(f.grid(), f.order());
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    auto prod = multiply_dealiased_raw(s.comp(0).data(), f.comp(c).data(), dims);
    auto dst = out.comp(c);
    std::copy(prod.begin(), prod.end(), dst.begin());
  }
  return out;
}

/// Evaluate one component of the trigonometric interpolant at an arbitrary
/// point y (one coordinate per axis, arbitrary reals).
inline double evaluate(const std::vector<cd>& spec, const GridSpec& g,
                       const std::vector<double>& y) {
  const auto dims = g.dims();
  const std::size_t total = spec.size();
  cd acc(0.0, 0.0);
  std::vector<int> idx(dims.size(), 0);
  for (std::size_t s = 0; s < total; ++s) {
    if (std::abs(spec[s].real()) + std::abs(spec[s].imag()) > 0.0) {
      double phase = 0.0;
      std::size_t rem = s;
      for (std::size_t a = dims.size(); a-- > 0;) {
        idx[a] = static_cast<int>(rem % dims[a]);
        rem /= dims[a];
      }
      for (std::size_t a = 0; a < dims.size(); ++a) {
        double f = fft::wrapped_freq(idx[a], dims[a]);
        phase += f * y[a];
      }
      phase *= 2.0 * std::numbers::pi;
      acc += spec[s] * cd(std::cos(phase), std::sin(phase));
    }
  }
  return acc.real();
}

/// Trace of the field along the diagonal y_i = t / delta_i, evaluated by
/// exact Fourier summation (band limited, so the interpolation is exact).
/// Each point is a d-vector t; the result has one value per component per
/// point, component-major.
inline std::vector<double> diagonal_trace(const TorusField& f, const std::vector<double>& deltas,
                                          const std::vector<std::vector<double>>& points) {
  const GridSpec& g = f.grid();
  require(static_cast<int>(deltas.size()) == g.n, "diagonal_trace: one delta per block");
  std::vector<double> out(f.ncomp() * points.size(), 0.0);
  for (std::size_t c = 0; c < f.ncomp(); ++c) {
    auto spec = spectrum(f, c);
    for (std::size_t p = 0; p < points.size(); ++p) {
      std::vector<double> y(g.axes());
      for (int b = 0; b < g.n; ++b)
        for (int m = 0; m < g.d; ++m) y[b * g.d + m] = points[p][m] / deltas[b];
      out[c * points.size() + p] = evaluate(spec, g, y);
    }
  }
  return out;
}

}  // namespace field_ops

}  // namespace homoscale

#include "homoscale/scales.hpp"

namespace homoscale {
namespace field_ops {

/// Trace along the physical diagonal x -> f(x/eps_1, ..., x/eps_n) at the
/// given physical points (d-vectors x).
inline std::vector<double> diagonal_trace(const TorusField& f, const ScaleVector& scales,
                                          const std::vector<std::vector<double>>& points_x) {
  std::vector<std::vector<double>> ts(points_x.size());
  for (std::size_t p = 0; p < points_x.size(); ++p) {
    ts[p].resize(points_x[p].size());
    for (std::size_t c = 0; c < points_x[p].size(); ++c)
      ts[p][c] = points_x[p][c] / scales.epsilons[0];
  }
  return diagonal_trace(f, scales.deltas, ts);
}

}  // namespace field_ops
}  // namespace homoscale

#endif  // HOMOSCALE_FIELD_HPP
