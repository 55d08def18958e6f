#include "emavio/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "emavio/error.hpp"
#include "emavio/kernels.hpp"
#include "euler_math.hpp"

namespace emavio::ops {

namespace kp = kernels::parallel;
using detail::Node;

namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch(op, a, b);
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(x.shape()));
  }
}

// Parent i's grad buffer, or nullptr when it does not need one.
std::vector<double>* parent_grad(Node& self, std::size_t i) {
  auto& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  // deriv(x, y) -> dy/dx
  return Tensor::make(x.shape(), std::move(out), name, {x}, [deriv](Node& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& xv = self.parents[0]->data;
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += self.grad[i] * deriv(xv[i], self.data[i]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = parent_grad(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->data;
    const auto& bv = self.parents[1]->data;
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return Tensor::make(a.shape(), std::move(out), "scale", {a}, [factor](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw ContractError("sqrt: negative input " + std::to_string(v));
  }
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return Tensor::make({1}, {acc}, "sum", {x}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (auto& v : *g) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return Tensor::make({1}, {acc / n}, "mean", {x}, [n](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      const double share = self.grad[0] / n;
      for (auto& v : *g) v += share;
    }
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const auto s = split_axis("mean_axis", x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) acc += xd[(o * s.n + k) * s.inner + i];
      out[o * s.inner + i] = acc / static_cast<double>(s.n);
    }
  }
  return Tensor::make(std::move(out_shape), std::move(out), "mean_axis", {x}, [s](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    const double inv = 1.0 / static_cast<double>(s.n);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t k = 0; k < s.n; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) (*g)[(o * s.n + k) * s.inner + i] += self.grad[o * s.inner + i] * inv;
      }
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_axis("softmax", x.shape(), axis);
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t k) { return (o * s.n + k) * s.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.n; ++k) mx = std::max(mx, xd[at(k)]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        out[at(k)] = std::exp(xd[at(k)] - mx);
        total += out[at(k)];
      }
      for (std::size_t k = 0; k < s.n; ++k) out[at(k)] /= total;
    }
  }
  return Tensor::make(x.shape(), std::move(out), "softmax", {x}, [s](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        auto at = [&](std::size_t k) { return (o * s.n + k) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t k = 0; k < s.n; ++k) dot += self.grad[at(k)] * self.data[at(k)];
        for (std::size_t k = 0; k < s.n; ++k) (*g)[at(k)] += self.data[at(k)] * (self.grad[at(k)] - dot);
      }
    }
  });
}

Tensor normalize_sum(const Tensor& x, std::size_t axis) {
  const auto s = split_axis("normalize_sum", x.shape(), axis);
  std::vector<double> out(x.numel());
  std::vector<double> totals(s.outer * s.inner);
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double total = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) total += xd[(o * s.n + k) * s.inner + i];
      if (total == 0.0) throw ContractError("normalize_sum: zero sum along axis " + std::to_string(axis));
      totals[o * s.inner + i] = total;
      for (std::size_t k = 0; k < s.n; ++k) out[(o * s.n + k) * s.inner + i] = xd[(o * s.n + k) * s.inner + i] / total;
    }
  }
  return Tensor::make(x.shape(), std::move(out), "normalize_sum", {x},
                      [s, totals = std::move(totals)](Node& self) {
                        auto* g = parent_grad(self, 0);
                        if (!g) return;
                        for (std::size_t o = 0; o < s.outer; ++o) {
                          for (std::size_t i = 0; i < s.inner; ++i) {
                            auto at = [&](std::size_t k) { return (o * s.n + k) * s.inner + i; };
                            double dot = 0.0;
                            for (std::size_t k = 0; k < s.n; ++k) dot += self.grad[at(k)] * self.data[at(k)];
                            const double total = totals[o * s.inner + i];
                            for (std::size_t k = 0; k < s.n; ++k) (*g)[at(k)] += (self.grad[at(k)] - dot) / total;
                          }
                        }
                      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
  const kernels::MatmulShape s{a.dim(0), a.dim(1), b.dim(1)};
  std::vector<double> out(s.m * s.n);
  kp::matmul_nn(a.data(), b.data(), out, s);
  return Tensor::make({s.m, s.n}, std::move(out), "matmul", {a, b}, [s](Node& self) {
    const auto& av = self.parents[0]->data;
    const auto& bv = self.parents[1]->data;
    std::vector<double> tmp;
    if (auto* g = parent_grad(self, 0)) {
      // dA = dC * B^T
      tmp.assign(s.m * s.k, 0.0);
      kp::matmul_nt(self.grad, bv, tmp, {s.m, s.n, s.k});
      for (std::size_t i = 0; i < tmp.size(); ++i) (*g)[i] += tmp[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      // dB = A^T * dC
      tmp.assign(s.k * s.n, 0.0);
      kp::matmul_tn(av, self.grad, tmp, {s.k, s.m, s.n});
      for (std::size_t i = 0; i < tmp.size(); ++i) (*g)[i] += tmp[i];
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank("matmul_nt", a, 2);
  require_rank("matmul_nt", b, 2);
  if (a.dim(1) != b.dim(1)) mismatch("matmul_nt", a, b);
  const kernels::MatmulShape s{a.dim(0), a.dim(1), b.dim(0)};
  std::vector<double> out(s.m * s.n);
  kp::matmul_nt(a.data(), b.data(), out, s);
  return Tensor::make({s.m, s.n}, std::move(out), "matmul_nt", {a, b}, [s](Node& self) {
    const auto& av = self.parents[0]->data;
    const auto& bv = self.parents[1]->data;
    std::vector<double> tmp;
    if (auto* g = parent_grad(self, 0)) {
      // dA = dC * B
      tmp.assign(s.m * s.k, 0.0);
      kp::matmul_nn(self.grad, bv, tmp, {s.m, s.n, s.k});
      for (std::size_t i = 0; i < tmp.size(); ++i) (*g)[i] += tmp[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      // dB = dC^T * A
      tmp.assign(s.n * s.k, 0.0);
      kp::matmul_tn(self.grad, av, tmp, {s.n, s.m, s.k});
      for (std::size_t i = 0; i < tmp.size(); ++i) (*g)[i] += tmp[i];
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  }
  return Tensor::make({c, r}, std::move(out), "transpose", {a}, [r, c](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += self.grad[j * r + i];
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", weight, 2);
  const bool vector_input = x.rank() == 1;
  if (!vector_input && x.rank() != 2) require_rank("linear", x, 2);
  const std::size_t rows = vector_input ? 1 : x.dim(0);
  const std::size_t in = vector_input ? x.dim(0) : x.dim(1);
  const std::size_t out_dim = weight.dim(0);
  if (weight.dim(1) != in) mismatch("linear", x, weight);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) mismatch("linear", weight, bias);

  const kernels::MatmulShape s{rows, in, out_dim};
  std::vector<double> out(rows * out_dim);
  kp::matmul_nt(x.data(), weight.data(), out, s);
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out_dim; ++o) out[r * out_dim + o] += bias[o];
    }
  }
  Shape shape = vector_input ? Shape{out_dim} : Shape{rows, out_dim};
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make(std::move(shape), std::move(out), "linear", std::move(parents), [s](Node& self) {
    const auto& xv = self.parents[0]->data;
    const auto& wv = self.parents[1]->data;
    std::vector<double> tmp;
    if (auto* g = parent_grad(self, 0)) {
      tmp.assign(s.m * s.k, 0.0);
      kp::matmul_nn(self.grad, wv, tmp, {s.m, s.n, s.k});
      for (std::size_t i = 0; i < tmp.size(); ++i) (*g)[i] += tmp[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      tmp.assign(s.n * s.k, 0.0);
      kp::matmul_tn(self.grad, xv, tmp, {s.n, s.m, s.k});
      for (std::size_t i = 0; i < tmp.size(); ++i) (*g)[i] += tmp[i];
    }
    if (self.parents.size() > 2) {
      if (auto* g = parent_grad(self, 2)) {
        for (std::size_t r = 0; r < s.m; ++r) {
          for (std::size_t o = 0; o < s.n; ++o) (*g)[o] += self.grad[r * s.n + o];
        }
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make(std::move(shape), std::move(out), "reshape", {x}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts.front().shape();
  split_axis("concat", first, axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) mismatch("concat", parts.front(), p);
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis && p.dim(i) != first[i]) mismatch("concat", parts.front(), p);
    }
    out_shape[axis] += p.dim(axis);
    widths.push_back(p.dim(axis));
  }
  const auto s = split_axis("concat", out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    const std::size_t w = widths[k];
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(pd.begin() + static_cast<long>(o * w * s.inner), w * s.inner,
                  out.begin() + static_cast<long>((o * s.n + offset) * s.inner));
    }
    offset += w;
  }
  return Tensor::make(std::move(out_shape), std::move(out), "concat", parts,
                      [s, widths = std::move(widths)](Node& self) {
                        std::size_t off = 0;
                        for (std::size_t k = 0; k < widths.size(); ++k) {
                          const std::size_t w = widths[k];
                          if (auto* g = parent_grad(self, k)) {
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              for (std::size_t i = 0; i < w * s.inner; ++i) {
                                (*g)[o * w * s.inner + i] += self.grad[(o * s.n + off) * s.inner + i];
                              }
                            }
                          }
                          off += w;
                        }
                      });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto s = split_axis("slice", x.shape(), axis);
  if (begin >= end || end > s.n) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of size " + std::to_string(s.n));
  }
  const std::size_t w = end - begin;
  Shape out_shape = x.shape();
  out_shape[axis] = w;
  std::vector<double> out(s.outer * w * s.inner);
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xd.begin() + static_cast<long>((o * s.n + begin) * s.inner), w * s.inner,
                out.begin() + static_cast<long>(o * w * s.inner));
  }
  return Tensor::make(std::move(out_shape), std::move(out), "slice", {x}, [s, w, begin](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < w * s.inner; ++i) (*g)[(o * s.n + begin) * s.inner + i] += self.grad[o * w * s.inner + i];
      }
    }
  });
}

Tensor conv1d_causal(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation) {
  require_rank("conv1d_causal", x, 2);
  require_rank("conv1d_causal", weight, 3);
  if (dilation == 0) throw ConfigError("conv1d_causal: dilation must be positive");
  if (weight.dim(1) != x.dim(0)) mismatch("conv1d_causal", x, weight);
  const kernels::Conv1dShape s{x.dim(0), weight.dim(0), x.dim(1), weight.dim(2), dilation};
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != s.out_channels)) mismatch("conv1d_causal", weight, bias);
  std::vector<double> out(s.out_channels * s.time);
  kp::conv1d_forward(x.data(), weight.data(), bias.defined() ? bias.data() : std::span<const double>{}, out, s);
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make({s.out_channels, s.time}, std::move(out), "conv1d_causal", std::move(parents),
                      [s](Node& self) {
                        if (auto* g = parent_grad(self, 0)) kp::conv1d_backward_input(self.grad, self.parents[1]->data, *g, s);
                        if (auto* g = parent_grad(self, 1)) kp::conv1d_backward_weight(self.grad, self.parents[0]->data, *g, s);
                        if (self.parents.size() > 2) {
                          if (auto* g = parent_grad(self, 2)) {
                            for (std::size_t o = 0; o < s.out_channels; ++o) {
                              double acc = 0.0;
                              for (std::size_t t = 0; t < s.time; ++t) acc += self.grad[o * s.time + t];
                              (*g)[o] += acc;
                            }
                          }
                        }
                      });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
  require_rank("conv2d", x, 3);
  require_rank("conv2d", weight, 4);
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (weight.dim(1) != x.dim(0) || weight.dim(2) != weight.dim(3)) mismatch("conv2d", x, weight);
  const kernels::Conv2dShape s{x.dim(0), weight.dim(0), x.dim(1), x.dim(2), weight.dim(2), stride, padding};
  if (s.height + 2 * padding < s.kernel || s.width + 2 * padding < s.kernel) {
    throw ConfigError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel " + std::to_string(s.kernel));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != s.out_channels)) mismatch("conv2d", weight, bias);
  const std::size_t ho = s.out_height(), wo = s.out_width();
  std::vector<double> out(s.out_channels * ho * wo);
  kp::conv2d_forward(x.data(), weight.data(), bias.defined() ? bias.data() : std::span<const double>{}, out, s);
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make({s.out_channels, ho, wo}, std::move(out), "conv2d", std::move(parents), [s, ho, wo](Node& self) {
    if (auto* g = parent_grad(self, 0)) kp::conv2d_backward_input(self.grad, self.parents[1]->data, *g, s);
    if (auto* g = parent_grad(self, 1)) kp::conv2d_backward_weight(self.grad, self.parents[0]->data, *g, s);
    if (self.parents.size() > 2) {
      if (auto* g = parent_grad(self, 2)) {
        for (std::size_t o = 0; o < s.out_channels; ++o) {
          double acc = 0.0;
          for (std::size_t i = 0; i < ho * wo; ++i) acc += self.grad[o * ho * wo + i];
          (*g)[o] += acc;
        }
      }
    }
  });
}

Tensor gated_activation(const Tensor& x, const Tensor& filter_weight, const Tensor& filter_bias,
                        const Tensor& gate_weight, const Tensor& gate_bias, std::size_t dilation) {
  if (filter_weight.rank() != 3 || gate_weight.rank() != 3 || filter_weight.dim(0) != gate_weight.dim(0)) {
    mismatch("gated_activation", filter_weight, gate_weight);
  }
  return mul(tanh(conv1d_causal(x, filter_weight, filter_bias, dilation)),
             sigmoid(conv1d_causal(x, gate_weight, gate_bias, dilation)));
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmWeights& w) {
  require_rank("lstm_cell", x, 1);
  if (h_prev.shape() != c_prev.shape() || h_prev.rank() != 1) mismatch("lstm_cell", h_prev, c_prev);
  const std::size_t h = h_prev.dim(0);
  if (w.input.rank() != 2 || w.input.dim(0) != 4 * h) mismatch("lstm_cell", w.input, h_prev);
  if (w.hidden.rank() != 2 || w.hidden.dim(0) != 4 * h || w.hidden.dim(1) != h) mismatch("lstm_cell", w.hidden, h_prev);
  const Tensor pre = add(linear(x, w.input, w.bias), linear(h_prev, w.hidden, Tensor{}));
  const Tensor i = sigmoid(slice(pre, 0, 0, h));
  const Tensor f = sigmoid(slice(pre, 0, h, 2 * h));
  const Tensor g = tanh(slice(pre, 0, 2 * h, 3 * h));
  const Tensor o = sigmoid(slice(pre, 0, 3 * h, 4 * h));
  Tensor c = add(mul(f, c_prev), mul(i, g));
  Tensor hn = mul(o, tanh(c));
  return {std::move(hn), std::move(c)};
}

Tensor euler_to_rotation(const Tensor& angles) {
  if (angles.shape() != Shape{3}) {
    throw DimensionError("euler_to_rotation: expected shape [3], got " + shape_str(angles.shape()));
  }
  const auto r = detail::euler_rotation(angles[0], angles[1], angles[2]);
  return Tensor::make({3, 3}, std::vector<double>(r.begin(), r.end()), "euler_to_rotation", {angles}, [](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    const auto& a = self.parents[0]->data;
    const auto partials = detail::euler_rotation_partials(a[0], a[1], a[2]);
    for (std::size_t k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (std::size_t e = 0; e < 9; ++e) acc += self.grad[e] * partials[k][e];
      (*g)[k] += acc;
    }
  });
}

Tensor rotation_to_euler(const Tensor& rotation) {
  if (rotation.shape() != Shape{3, 3}) {
    throw DimensionError("rotation_to_euler: expected shape [3x3], got " + shape_str(rotation.shape()));
  }
  detail::Mat3Rows r{};
  std::copy(rotation.data().begin(), rotation.data().end(), r.begin());
  double roll = 0, pitch = 0, yaw = 0;
  if (!detail::rotation_euler(r, roll, pitch, yaw)) {
    throw DegenerateInputError("rotation_to_euler: pitch within gimbal-lock margin of +-pi/2");
  }
  return Tensor::make({3}, {roll, pitch, yaw}, "rotation_to_euler", {rotation}, [](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    const auto& m = self.parents[0]->data;
    // roll = atan2(m7, m8)
    const double rn = m[7] * m[7] + m[8] * m[8];
    (*g)[7] += self.grad[0] * m[8] / rn;
    (*g)[8] -= self.grad[0] * m[7] / rn;
    // pitch = asin(-m6)
    (*g)[6] -= self.grad[1] / std::sqrt(1.0 - m[6] * m[6]);
    // yaw = atan2(m3, m0)
    const double yn = m[3] * m[3] + m[0] * m[0];
    (*g)[3] += self.grad[2] * m[0] / yn;
    (*g)[0] -= self.grad[2] * m[3] / yn;
  });
}

}  // namespace emavio::ops
