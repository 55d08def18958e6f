#include <algorithm>
#include <vector>

#include "emavio/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace emavio::kernels::parallel {

namespace {

// Below this many multiply-adds the fork/join cost outweighs the work.
constexpr std::size_t kParallelThreshold = 1 << 15;

inline long as_long(std::size_t v) { return static_cast<long>(v); }

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               const MatmulShape& s) {
  const bool big = s.m * s.n * s.k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long il = 0; il < as_long(s.m); ++il) {
    const auto i = static_cast<std::size_t>(il);
    double* row = c.data() + i * s.n;
    for (std::size_t j = 0; j < s.n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < s.k; ++p) {
      const double aip = a[i * s.k + p];
      const double* brow = b.data() + p * s.n;
      for (std::size_t j = 0; j < s.n; ++j) row[j] += aip * brow[j];
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               const MatmulShape& s) {
  const bool big = s.m * s.n * s.k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long il = 0; il < as_long(s.m); ++il) {
    const auto i = static_cast<std::size_t>(il);
    double* row = c.data() + i * s.n;
    for (std::size_t j = 0; j < s.n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < s.k; ++p) {
      const double api = a[p * s.m + i];
      const double* brow = b.data() + p * s.n;
      for (std::size_t j = 0; j < s.n; ++j) row[j] += api * brow[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               const MatmulShape& s) {
  const bool big = s.m * s.n * s.k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long il = 0; il < as_long(s.m); ++il) {
    const auto i = static_cast<std::size_t>(il);
    const double* arow = a.data() + i * s.k;
    for (std::size_t j = 0; j < s.n; ++j) {
      const double* brow = b.data() + j * s.k;
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += arow[p] * brow[p];
      c[i * s.n + j] = acc;
    }
  }
}

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, const Conv1dShape& s) {
  const std::size_t K = s.kernel, T = s.time;
  const bool big = s.out_channels * s.in_channels * K * T >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long ol = 0; ol < as_long(s.out_channels); ++ol) {
    const auto o = static_cast<std::size_t>(ol);
    double* row = y.data() + o * T;
    const double b0 = bias.empty() ? 0.0 : bias[o];
    for (std::size_t t = 0; t < T; ++t) row[t] = b0;
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* xrow = x.data() + c * T;
      for (std::size_t j = 0; j < K; ++j) {
        const std::size_t shift = (K - 1 - j) * s.dilation;
        const double wv = w[(o * s.in_channels + c) * K + j];
        for (std::size_t t = shift; t < T; ++t) row[t] += wv * xrow[t - shift];
      }
    }
  }
}

void conv1d_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, const Conv1dShape& s) {
  const std::size_t K = s.kernel, T = s.time;
  const bool big = s.out_channels * s.in_channels * K * T >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long cl = 0; cl < as_long(s.in_channels); ++cl) {
    const auto c = static_cast<std::size_t>(cl);
    std::vector<double> acc(T, 0.0);
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      const double* dyrow = dy.data() + o * T;
      for (std::size_t j = 0; j < K; ++j) {
        const std::size_t shift = (K - 1 - j) * s.dilation;
        const double wv = w[(o * s.in_channels + c) * K + j];
        for (std::size_t t = 0; t + shift < T; ++t) acc[t] += wv * dyrow[t + shift];
      }
    }
    for (std::size_t t = 0; t < T; ++t) dx[c * T + t] += acc[t];
  }
}

void conv1d_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, const Conv1dShape& s) {
  const std::size_t K = s.kernel, T = s.time;
  const bool big = s.out_channels * s.in_channels * K * T >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long ol = 0; ol < as_long(s.out_channels); ++ol) {
    const auto o = static_cast<std::size_t>(ol);
    const double* dyrow = dy.data() + o * T;
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* xrow = x.data() + c * T;
      for (std::size_t j = 0; j < K; ++j) {
        const std::size_t shift = (K - 1 - j) * s.dilation;
        double acc = 0.0;
        for (std::size_t t = shift; t < T; ++t) acc += dyrow[t] * xrow[t - shift];
        dw[(o * s.in_channels + c) * K + j] += acc;
      }
    }
  }
}

namespace {

// Valid output range [lo, hi) for tap k along one axis: out*stride + k - pad
// must fall inside [0, extent).
inline void tap_range(std::size_t k, std::size_t extent, std::size_t out_extent, const Conv2dShape& s,
                      std::size_t& lo, std::size_t& hi) {
  lo = 0;
  if (k < s.padding) lo = (s.padding - k + s.stride - 1) / s.stride;
  // largest out with out*stride + k - pad <= extent - 1
  const std::size_t limit = extent - 1 + s.padding;
  hi = k > limit ? 0 : std::min(out_extent, (limit - k) / s.stride + 1);
  if (hi < lo) hi = lo;
}

}  // namespace

void conv2d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, const Conv2dShape& s) {
  const std::size_t ho = s.out_height(), wo = s.out_width(), K = s.kernel;
  const std::size_t H = s.height, W = s.width;
  const bool big = s.out_channels * s.in_channels * K * K * ho * wo >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long ol = 0; ol < as_long(s.out_channels); ++ol) {
    const auto o = static_cast<std::size_t>(ol);
    double* plane = y.data() + o * ho * wo;
    const double b0 = bias.empty() ? 0.0 : bias[o];
    for (std::size_t i = 0; i < ho * wo; ++i) plane[i] = b0;
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* xplane = x.data() + c * H * W;
      for (std::size_t ky = 0; ky < K; ++ky) {
        std::size_t y0 = 0, y1 = 0;
        tap_range(ky, H, ho, s, y0, y1);
        for (std::size_t kx = 0; kx < K; ++kx) {
          std::size_t x0 = 0, x1 = 0;
          tap_range(kx, W, wo, s, x0, x1);
          const double wv = w[((o * s.in_channels + c) * K + ky) * K + kx];
          for (std::size_t oy = y0; oy < y1; ++oy) {
            const std::size_t iy = oy * s.stride + ky - s.padding;
            for (std::size_t ox = x0; ox < x1; ++ox) {
              const std::size_t ix = ox * s.stride + kx - s.padding;
              plane[oy * wo + ox] += wv * xplane[iy * W + ix];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, const Conv2dShape& s) {
  const std::size_t ho = s.out_height(), wo = s.out_width(), K = s.kernel;
  const std::size_t H = s.height, W = s.width;
  const bool big = s.out_channels * s.in_channels * K * K * ho * wo >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long cl = 0; cl < as_long(s.in_channels); ++cl) {
    const auto c = static_cast<std::size_t>(cl);
    std::vector<double> acc(H * W, 0.0);
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      const double* dyplane = dy.data() + o * ho * wo;
      for (std::size_t ky = 0; ky < K; ++ky) {
        std::size_t y0 = 0, y1 = 0;
        tap_range(ky, H, ho, s, y0, y1);
        for (std::size_t kx = 0; kx < K; ++kx) {
          std::size_t x0 = 0, x1 = 0;
          tap_range(kx, W, wo, s, x0, x1);
          const double wv = w[((o * s.in_channels + c) * K + ky) * K + kx];
          for (std::size_t oy = y0; oy < y1; ++oy) {
            const std::size_t iy = oy * s.stride + ky - s.padding;
            for (std::size_t ox = x0; ox < x1; ++ox) {
              const std::size_t ix = ox * s.stride + kx - s.padding;
              acc[iy * W + ix] += wv * dyplane[oy * wo + ox];
            }
          }
        }
      }
    }
    for (std::size_t i = 0; i < H * W; ++i) dx[c * H * W + i] += acc[i];
  }
}

void conv2d_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, const Conv2dShape& s) {
  const std::size_t ho = s.out_height(), wo = s.out_width(), K = s.kernel;
  const std::size_t H = s.height, W = s.width;
  const bool big = s.out_channels * s.in_channels * K * K * ho * wo >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long ol = 0; ol < as_long(s.out_channels); ++ol) {
    const auto o = static_cast<std::size_t>(ol);
    const double* dyplane = dy.data() + o * ho * wo;
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* xplane = x.data() + c * H * W;
      for (std::size_t ky = 0; ky < K; ++ky) {
        std::size_t y0 = 0, y1 = 0;
        tap_range(ky, H, ho, s, y0, y1);
        for (std::size_t kx = 0; kx < K; ++kx) {
          std::size_t x0 = 0, x1 = 0;
          tap_range(kx, W, wo, s, x0, x1);
          double acc = 0.0;
          for (std::size_t oy = y0; oy < y1; ++oy) {
            const std::size_t iy = oy * s.stride + ky - s.padding;
            for (std::size_t ox = x0; ox < x1; ++ox) {
              const std::size_t ix = ox * s.stride + kx - s.padding;
              acc += dyplane[oy * wo + ox] * xplane[iy * W + ix];
            }
          }
          dw[((o * s.in_channels + c) * K + ky) * K + kx] += acc;
        }
      }
    }
  }
}

}  // namespace emavio::kernels::parallel
