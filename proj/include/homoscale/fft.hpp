#ifndef HOMOSCALE_FFT_HPP
#define HOMOSCALE_FFT_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "homoscale/common.hpp"

namespace homoscale {

using cd = std::complex<double>;

/// Radix-2 complex FFT for power-of-two sizes, plus the n-dimensional
/// axis-by-axis transforms used throughout the spectral calculus.
///
/// Conventions: `forward` produces Fourier coefficients with the 1/N factor,
/// so samples f(j/N) = sum_k c_k exp(2*pi*i*k*j/N). Bin k carries the wrapped
/// integer frequency k <= N/2 ? k : k - N.
namespace fft {

inline bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

inline int wrapped_freq(int k, int n) { return k <= n / 2 ? k : k - n; }

namespace detail {

inline const std::vector<cd>& twiddles(int n) {
  thread_local std::vector<std::vector<cd>> cache;  // indexed by log2(n)
  int lg = 0;
  while ((1 << lg) < n) ++lg;
  if (static_cast<int>(cache.size()) <= lg) cache.resize(lg + 1);
  auto& tw = cache[lg];
  if (tw.empty()) {
    tw.resize(n / 2);
    for (int i = 0; i < n / 2; ++i) {
      double ang = -2.0 * std::numbers::pi * i / n;
      tw[i] = cd(std::cos(ang), std::sin(ang));
    }
  }
  return tw;
}

// In-place iterative Cooley-Tukey; sign=-1 analysis, sign=+1 synthesis.
inline void transform_pow2(cd* a, int n, int sign) {
  if (n == 1) return;
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = twiddles(n);
  for (int len = 2; len <= n; len <<= 1) {
    int step = n / len;
    for (int i = 0; i < n; i += len) {
      for (int k = 0; k < len / 2; ++k) {
        cd w = tw[static_cast<std::size_t>(k) * step];
        if (sign > 0) w = std::conj(w);
        cd u = a[i + k];
        cd v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace detail

/// Transform every line of an n-d row-major array along one axis.
/// sign=-1 analysis (divides by the axis length), sign=+1 synthesis.
inline void transform_axis(std::vector<cd>& data, const std::vector<int>& dims, int axis,
                           int sign) {
  const int n = dims[axis];
  if (!is_pow2(n)) throw ValidationError("fft: axis size must be a power of two");
  std::size_t stride = 1;
  for (std::size_t a = axis + 1; a < dims.size(); ++a) stride *= dims[a];
  std::size_t outer = 1;
  for (int a = 0; a < axis; ++a) outer *= dims[a];
  const std::size_t block = stride * n;
  std::vector<cd> line(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < stride; ++s) {
      cd* base = data.data() + o * block + s;
      for (int i = 0; i < n; ++i) line[i] = base[i * stride];
      detail::transform_pow2(line.data(), n, sign);
      if (sign < 0) {
        const double inv = 1.0 / n;
        for (int i = 0; i < n; ++i) base[i * stride] = line[i] * inv;
      } else {
        for (int i = 0; i < n; ++i) base[i * stride] = line[i];
      }
    }
  }
}

inline void forward(std::vector<cd>& data, const std::vector<int>& dims) {
  for (std::size_t a = 0; a < dims.size(); ++a) transform_axis(data, dims, static_cast<int>(a), -1);
}

inline void inverse(std::vector<cd>& data, const std::vector<int>& dims) {
  for (std::size_t a = 0; a < dims.size(); ++a) transform_axis(data, dims, static_cast<int>(a), +1);
}

inline std::vector<cd> to_complex(const double* src, std::size_t n) {
  std::vector<cd> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = cd(src[i], 0.0);
  return out;
}

inline void real_part(const std::vector<cd>& src, double* dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i].real();
}

/// Embed a spectrum into a larger grid (zero padding). Nyquist bins of the
/// source are split evenly between the +N/2 and -N/2 bins of the target,
/// which keeps real data exactly real.
inline std::vector<cd> pad_spectrum(const std::vector<cd>& src, const std::vector<int>& sdims,
                                    const std::vector<int>& ddims) {
  const std::size_t nax = sdims.size();
  std::size_t dtotal = 1;
  for (int d : ddims) dtotal *= d;
  std::vector<cd> dst(dtotal, cd(0.0, 0.0));
  std::vector<int> idx(nax, 0);
  const std::size_t stotal = src.size();
  // Per-axis target bins and weights for each source bin.
  struct BinMap {
    int bin[2];
    double w[2];
    int count;
  };
  std::vector<std::vector<BinMap>> maps(nax);
  for (std::size_t a = 0; a < nax; ++a) {
    maps[a].resize(sdims[a]);
    for (int k = 0; k < sdims[a]; ++k) {
      BinMap& m = maps[a][k];
      if (sdims[a] < ddims[a] && k == sdims[a] / 2) {
        m.count = 2;
        m.bin[0] = sdims[a] / 2;
        m.bin[1] = ddims[a] - sdims[a] / 2;
        m.w[0] = m.w[1] = 0.5;
      } else {
        int f = wrapped_freq(k, sdims[a]);
        m.count = 1;
        m.bin[0] = f >= 0 ? f : ddims[a] + f;
        m.w[0] = 1.0;
      }
    }
  }
  for (std::size_t s = 0; s < stotal; ++s) {
    // Decode row-major source index.
    std::size_t rem = s;
    for (std::size_t a = nax; a-- > 0;) {
      idx[a] = static_cast<int>(rem % sdims[a]);
      rem /= sdims[a];
    }
    // Scatter across the per-axis bin choices.
    int choices = 1;
    for (std::size_t a = 0; a < nax; ++a) choices *= maps[a][idx[a]].count;
    for (int c = 0; c < choices; ++c) {
      int cc = c;
      std::size_t dpos = 0;
      double w = 1.0;
      for (std::size_t a = 0; a < nax; ++a) {
        const BinMap& m = maps[a][idx[a]];
        int pick = cc % m.count;
        cc /= m.count;
        dpos = dpos * ddims[a] + m.bin[pick];
        w *= m.w[pick];
      }
      dst[dpos] += w * src[s];
    }
  }
  return dst;
}

/// Restrict a spectrum to a smaller grid; the two half-Nyquist bins of the
/// source are summed back into the single Nyquist bin of the target.
inline std::vector<cd> truncate_spectrum(const std::vector<cd>& src, const std::vector<int>& sdims,
                                         const std::vector<int>& ddims) {
  const std::size_t nax = sdims.size();
  std::size_t dtotal = 1;
  for (int d : ddims) dtotal *= d;
  std::vector<cd> dst(dtotal, cd(0.0, 0.0));
  std::vector<int> idx(nax, 0);
  for (std::size_t t = 0; t < dtotal; ++t) {
    std::size_t rem = t;
    for (std::size_t a = nax; a-- > 0;) {
      idx[a] = static_cast<int>(rem % ddims[a]);
      rem /= ddims[a];
    }
    // Gather all source bins that alias to this target frequency.
    int choices = 1;
    std::vector<int> counts(nax), bins0(nax), bins1(nax);
    for (std::size_t a = 0; a < nax; ++a) {
      int f = wrapped_freq(idx[a], ddims[a]);
      if (ddims[a] < sdims[a] && idx[a] == ddims[a] / 2) {
        counts[a] = 2;
        bins0[a] = ddims[a] / 2;
        bins1[a] = sdims[a] - ddims[a] / 2;
      } else {
        counts[a] = 1;
        bins0[a] = f >= 0 ? f : sdims[a] + f;
      }
      choices *= counts[a];
    }
    cd acc(0.0, 0.0);
    for (int c = 0; c < choices; ++c) {
      int cc = c;
      std::size_t spos = 0;
      for (std::size_t a = 0; a < nax; ++a) {
        int pick = cc % counts[a];
        cc /= counts[a];
        spos = spos * sdims[a] + (pick == 0 ? bins0[a] : bins1[a]);
      }
      acc += src[spos];
    }
    dst[t] = acc;
  }
  return dst;
}

}  // namespace fft

}  // namespace homoscale

#endif  // HOMOSCALE_FFT_HPP
