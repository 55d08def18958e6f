#pragma once

// Dense inner loops used by the tensor ops.
//
// Every kernel exists twice: `serial` is the plain reference kept for tests and
// benchmarks, `parallel` splits the outermost independent loop across OpenMP
// threads. Each output element is produced by exactly one thread with the same
// accumulation order as the serial loop, so both variants agree bit for bit
// regardless of thread count.

#include <cstddef>
#include <span>

namespace emavio::kernels {

struct MatmulShape {
  std::size_t m = 0;  // rows of the result
  std::size_t k = 0;  // contraction length
  std::size_t n = 0;  // cols of the result
};

// Causal 1-D convolution over a channels x time signal. Tap j of the kernel
// reads the input at time t - (kernel - 1 - j) * dilation; taps before t = 0
// read the implicit zero left padding.
struct Conv1dShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t time = 0;
  std::size_t kernel = 1;
  std::size_t dilation = 1;
};

struct Conv2dShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
};

#define EMAVIO_DECLARE_KERNELS                                                                      \
  /* c[m x n] = a[m x k] * b[k x n] */                                                              \
  void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,         \
                 const MatmulShape& s);                                                             \
  /* c[m x n] = a^T * b with a stored [k x m] */                                                    \
  void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,         \
                 const MatmulShape& s);                                                             \
  /* c[m x n] = a * b^T with b stored [n x k] */                                                    \
  void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,         \
                 const MatmulShape& s);                                                             \
  /* bias may be empty */                                                                           \
  void conv1d_forward(std::span<const double> x, std::span<const double> w,                         \
                      std::span<const double> bias, std::span<double> y, const Conv1dShape& s);     \
  /* accumulates into dx */                                                                         \
  void conv1d_backward_input(std::span<const double> dy, std::span<const double> w,                 \
                             std::span<double> dx, const Conv1dShape& s);                           \
  /* accumulates into dw */                                                                         \
  void conv1d_backward_weight(std::span<const double> dy, std::span<const double> x,                \
                              std::span<double> dw, const Conv1dShape& s);                          \
  void conv2d_forward(std::span<const double> x, std::span<const double> w,                         \
                      std::span<const double> bias, std::span<double> y, const Conv2dShape& s);     \
  void conv2d_backward_input(std::span<const double> dy, std::span<const double> w,                 \
                             std::span<double> dx, const Conv2dShape& s);                           \
  void conv2d_backward_weight(std::span<const double> dy, std::span<const double> x,                \
                              std::span<double> dw, const Conv2dShape& s);

namespace serial {
EMAVIO_DECLARE_KERNELS
}

namespace parallel {
EMAVIO_DECLARE_KERNELS
// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();
}

#undef EMAVIO_DECLARE_KERNELS

}  // namespace emavio::kernels
