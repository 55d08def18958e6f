#pragma once

// Differentiable ops on Tensor. Every op checks operand shapes (throwing
// DimensionError that names the op and both shapes) and registers its
// backward rule.

#include <cstddef>
#include <utility>
#include <vector>

#include "emavio/tensor.hpp"

namespace emavio::ops {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor square(const Tensor& x);
// Gradient at 0 is taken as 0 so that a perfect prediction does not produce
// an infinite gradient through an RMSE.
Tensor sqrt(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Removes `axis` by averaging over it.
Tensor mean_axis(const Tensor& x, std::size_t axis);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
// Divides by the sum along `axis`. Inputs are expected positive (softmax
// output); a zero sum is a DimensionError-free ContractError.
Tensor normalize_sum(const Tensor& x, std::size_t axis);

// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x k] * [n x k]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x: [in] or [rows x in]; weight: [out x in]; bias: [out] or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Half-open [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

// x: [in_channels x time]; weight: [out x in x kernel]; bias: [out] or
// undefined. Zero left padding of (kernel - 1) * dilation keeps the length.
Tensor conv1d_causal(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation);

// x: [channels x height x width]; weight: [out x in x k x k].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// tanh(filter * x) . sigmoid(gate * x), both branches causal convolutions.
Tensor gated_activation(const Tensor& x, const Tensor& filter_weight, const Tensor& filter_bias,
                        const Tensor& gate_weight, const Tensor& gate_bias, std::size_t dilation);

struct LstmWeights {
  Tensor input;   // [4h x in], gate order: input, forget, cell, output
  Tensor hidden;  // [4h x h]
  Tensor bias;    // [4h]
};

// One step of a standard LSTM; returns (h, c).
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmWeights& w);

// Euler angles (roll, pitch, yaw) -> 3x3 rotation Rz(yaw) Ry(pitch) Rx(roll).
Tensor euler_to_rotation(const Tensor& angles);
// Inverse of euler_to_rotation. Throws DegenerateInputError within 1e-6 rad
// of pitch = +-pi/2.
Tensor rotation_to_euler(const Tensor& rotation);

}  // namespace emavio::ops
