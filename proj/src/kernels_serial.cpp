#include "emavio/kernels.hpp"

namespace emavio::kernels::serial {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               const MatmulShape& s) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[i * s.k + p] * b[p * s.n + j];
      c[i * s.n + j] = acc;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               const MatmulShape& s) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[p * s.m + i] * b[p * s.n + j];
      c[i * s.n + j] = acc;
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               const MatmulShape& s) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[i * s.k + p] * b[j * s.k + p];
      c[i * s.n + j] = acc;
    }
  }
}

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, const Conv1dShape& s) {
  const std::size_t K = s.kernel;
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t t = 0; t < s.time; ++t) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        for (std::size_t j = 0; j < K; ++j) {
          const std::size_t shift = (K - 1 - j) * s.dilation;
          if (t < shift) continue;
          acc += w[(o * s.in_channels + c) * K + j] * x[c * s.time + t - shift];
        }
      }
      y[o * s.time + t] = acc;
    }
  }
}

void conv1d_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, const Conv1dShape& s) {
  const std::size_t K = s.kernel;
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    for (std::size_t t = 0; t < s.time; ++t) {
      double acc = 0.0;
      for (std::size_t o = 0; o < s.out_channels; ++o) {
        for (std::size_t j = 0; j < K; ++j) {
          const std::size_t tt = t + (K - 1 - j) * s.dilation;
          if (tt >= s.time) continue;
          acc += w[(o * s.in_channels + c) * K + j] * dy[o * s.time + tt];
        }
      }
      dx[c * s.time + t] += acc;
    }
  }
}

void conv1d_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, const Conv1dShape& s) {
  const std::size_t K = s.kernel;
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      for (std::size_t j = 0; j < K; ++j) {
        const std::size_t shift = (K - 1 - j) * s.dilation;
        double acc = 0.0;
        for (std::size_t t = shift; t < s.time; ++t) acc += dy[o * s.time + t] * x[c * s.time + t - shift];
        dw[(o * s.in_channels + c) * K + j] += acc;
      }
    }
  }
}

namespace {

// Input coordinate read by output coordinate `out` at tap `k`; false when it
// lands in the zero padding.
inline bool input_coord(std::size_t out, std::size_t k, const Conv2dShape& s, std::size_t extent,
                        std::size_t& in) {
  const std::size_t raw = out * s.stride + k;
  if (raw < s.padding) return false;
  in = raw - s.padding;
  return in < extent;
}

}  // namespace

void conv2d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, const Conv2dShape& s) {
  const std::size_t ho = s.out_height(), wo = s.out_width(), K = s.kernel;
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (std::size_t c = 0; c < s.in_channels; ++c) {
          for (std::size_t ky = 0; ky < K; ++ky) {
            std::size_t iy = 0;
            if (!input_coord(oy, ky, s, s.height, iy)) continue;
            for (std::size_t kx = 0; kx < K; ++kx) {
              std::size_t ix = 0;
              if (!input_coord(ox, kx, s, s.width, ix)) continue;
              acc += w[((o * s.in_channels + c) * K + ky) * K + kx] * x[(c * s.height + iy) * s.width + ix];
            }
          }
        }
        y[(o * ho + oy) * wo + ox] = acc;
      }
    }
  }
}

void conv2d_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, const Conv2dShape& s) {
  const std::size_t ho = s.out_height(), wo = s.out_width(), K = s.kernel;
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    for (std::size_t iy = 0; iy < s.height; ++iy) {
      for (std::size_t ix = 0; ix < s.width; ++ix) {
        double acc = 0.0;
        for (std::size_t o = 0; o < s.out_channels; ++o) {
          for (std::size_t ky = 0; ky < K; ++ky) {
            const std::size_t ry = iy + s.padding;
            if (ry < ky || (ry - ky) % s.stride != 0) continue;
            const std::size_t oy = (ry - ky) / s.stride;
            if (oy >= ho) continue;
            for (std::size_t kx = 0; kx < K; ++kx) {
              const std::size_t rx = ix + s.padding;
              if (rx < kx || (rx - kx) % s.stride != 0) continue;
              const std::size_t ox = (rx - kx) / s.stride;
              if (ox >= wo) continue;
              acc += w[((o * s.in_channels + c) * K + ky) * K + kx] * dy[(o * ho + oy) * wo + ox];
            }
          }
        }
        dx[(c * s.height + iy) * s.width + ix] += acc;
      }
    }
  }
}

void conv2d_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, const Conv2dShape& s) {
  const std::size_t ho = s.out_height(), wo = s.out_width(), K = s.kernel;
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      for (std::size_t ky = 0; ky < K; ++ky) {
        for (std::size_t kx = 0; kx < K; ++kx) {
          double acc = 0.0;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            std::size_t iy = 0;
            if (!input_coord(oy, ky, s, s.height, iy)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              std::size_t ix = 0;
              if (!input_coord(ox, kx, s, s.width, ix)) continue;
              acc += dy[(o * ho + oy) * wo + ox] * x[(c * s.height + iy) * s.width + ix];
            }
          }
          dw[((o * s.in_channels + c) * K + ky) * K + kx] += acc;
        }
      }
    }
  }
}

}  // namespace emavio::kernels::serial
