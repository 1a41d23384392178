#pragma once

// Single-sample forward and backward kernels for the layer types used by the
// network. Tensor-level entry points validate shapes; the span-level kernels
// in `detail` assume validated dimensions and are what the layers call per
// batch element.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tinyradar/tensor.hpp"

namespace tinyradar {

enum class LayerKind : std::uint32_t {
  Conv2D = 1,
  MaxPool2D = 2,
  Conv1D = 3,
  CausalConv1D = 4,
  Dense = 5,
  ReLU = 6,
  Flatten = 7,
  ResidualBlock = 8,
};

enum class Padding : std::uint32_t { Same = 0, Valid = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::vector<std::size_t> kernel;  // (kh, kw) for 2-D ops, (k) for causal ops
  std::size_t channels_in = 0;
  std::size_t channels_out = 0;
  std::size_t dilation = 1;
  Padding padding = Padding::Same;

  void validate() const;
};

std::string_view to_string(LayerKind kind);

// x: H x W x Cin, weights: kh x kw x Cin x Cout, bias: Cout. Stride 1, zero
// "same" padding with the kernel anchored at (kh/2, kw/2).
Tensor conv2d_forward(const Tensor& x, const LayerSpec& spec, const Tensor& weights,
                      const Tensor& bias);

// x: H x W x C. Stride equals the kernel; trailing rows/columns are dropped.
// When `argmax` is given it receives, per output cell, the flat input index
// of the first maximum in row-major window order.
Tensor maxpool2d_forward(const Tensor& x, std::size_t kh, std::size_t kw,
                         std::vector<std::uint32_t>* argmax = nullptr);

// x: T x Cin, weights: k x Cin x Cout. Tap j reads x(t - (k-1-j)*d), so the
// last tap sits on the current step; history before t=0 is zero.
Tensor causal_conv1d_forward(const Tensor& x, const LayerSpec& spec, const Tensor& weights,
                             const Tensor& bias);

// y = x + ReLU(causal_conv1d(x)), channel count preserved.
Tensor residual_block_forward(const Tensor& x, const LayerSpec& spec, const Tensor& weights,
                              const Tensor& bias);

// x: n or T x n; weights: n x m. Applied independently per row.
Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);

namespace detail {

void conv2d(std::span<const double> x, std::size_t h, std::size_t w, std::size_t cin,
            std::span<const double> weights, std::size_t kh, std::size_t kw, std::size_t cout,
            std::span<const double> bias, std::span<double> y);

// Accumulates into gweights/gbias; writes gx when it is non-empty.
void conv2d_backward(std::span<const double> x, std::size_t h, std::size_t w, std::size_t cin,
                     std::span<const double> weights, std::size_t kh, std::size_t kw,
                     std::size_t cout, std::span<const double> gy, std::span<double> gx,
                     std::span<double> gweights, std::span<double> gbias);

void maxpool2d(std::span<const double> x, std::size_t h, std::size_t w, std::size_t c,
               std::size_t kh, std::size_t kw, std::span<double> y,
               std::span<std::uint32_t> argmax);

void causal_conv1d(std::span<const double> x, std::size_t t, std::size_t cin,
                   std::span<const double> weights, std::size_t k, std::size_t dilation,
                   std::size_t cout, std::span<const double> bias, std::span<double> y);

void causal_conv1d_backward(std::span<const double> x, std::size_t t, std::size_t cin,
                            std::span<const double> weights, std::size_t k, std::size_t dilation,
                            std::size_t cout, std::span<const double> gy, std::span<double> gx,
                            std::span<double> gweights, std::span<double> gbias);

void dense(std::span<const double> x, std::size_t rows, std::size_t n,
           std::span<const double> weights, std::size_t m, std::span<const double> bias,
           std::span<double> y);

void dense_backward(std::span<const double> x, std::size_t rows, std::size_t n,
                    std::span<const double> weights, std::size_t m, std::span<const double> gy,
                    std::span<double> gx, std::span<double> gweights, std::span<double> gbias);

}  // namespace detail

}  // namespace tinyradar
