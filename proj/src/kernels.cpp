#include "tinyradar/kernels.hpp"

#include <algorithm>
#include <sstream>

#include "tinyradar/errors.hpp"

namespace tinyradar {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out << (i ? "x" : "") << shape[i];
  }
  return out.str();
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != shape_volume(shape)) {
    throw ValidationError("tensor: " + std::to_string(data.size()) + " values for shape " +
                          shape_string(shape));
  }
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::Conv1D: return "Conv1D";
    case LayerKind::CausalConv1D: return "CausalConv1D";
    case LayerKind::Dense: return "Dense";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::ResidualBlock: return "ResidualBlock";
  }
  return "Unknown";
}

void LayerSpec::validate() const {
  if (dilation < 1) {
    throw ValidationError(std::string(to_string(kind)) + ": dilation must be >= 1");
  }
  for (std::size_t k : kernel) {
    if (k < 1) {
      throw ValidationError(std::string(to_string(kind)) + ": kernel dimensions must be >= 1");
    }
  }
}

namespace {

void expect_shape(const Tensor& t, const Shape& shape, std::string_view what) {
  if (t.shape != shape) {
    throw ValidationError(std::string(what) + ": expected shape " + shape_string(shape) + ", got " +
                          shape_string(t.shape));
  }
}

void expect_rank(const Tensor& t, std::size_t rank, std::string_view what) {
  if (t.rank() != rank) {
    throw ValidationError(std::string(what) + ": expected rank " + std::to_string(rank) +
                          ", got shape " + shape_string(t.shape));
  }
}

}  // namespace

namespace detail {

void conv2d(std::span<const double> x, std::size_t h, std::size_t w, std::size_t cin,
            std::span<const double> weights, std::size_t kh, std::size_t kw, std::size_t cout,
            std::span<const double> bias, std::span<double> y) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::ptrdiff_t oh = 0; oh < H; ++oh) {
    for (std::ptrdiff_t ow = 0; ow < W; ++ow) {
      double* out = y.data() + (oh * W + ow) * static_cast<std::ptrdiff_t>(cout);
      std::copy(bias.begin(), bias.end(), out);
      for (std::size_t i = 0; i < kh; ++i) {
        const std::ptrdiff_t ih = oh + static_cast<std::ptrdiff_t>(i) - ph;
        if (ih < 0 || ih >= H) continue;
        for (std::size_t j = 0; j < kw; ++j) {
          const std::ptrdiff_t iw = ow + static_cast<std::ptrdiff_t>(j) - pw;
          if (iw < 0 || iw >= W) continue;
          const double* in = x.data() + (ih * W + iw) * static_cast<std::ptrdiff_t>(cin);
          const double* wk = weights.data() + (i * kw + j) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double v = in[ci];
            if (v == 0.0) continue;
            const double* wrow = wk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) {
              out[co] += v * wrow[co];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward(std::span<const double> x, std::size_t h, std::size_t w, std::size_t cin,
                     std::span<const double> weights, std::size_t kh, std::size_t kw,
                     std::size_t cout, std::span<const double> gy, std::span<double> gx,
                     std::span<double> gweights, std::span<double> gbias) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const bool want_gx = !gx.empty();
  if (want_gx) std::fill(gx.begin(), gx.end(), 0.0);
  for (std::ptrdiff_t oh = 0; oh < H; ++oh) {
    for (std::ptrdiff_t ow = 0; ow < W; ++ow) {
      const double* g = gy.data() + (oh * W + ow) * static_cast<std::ptrdiff_t>(cout);
      for (std::size_t co = 0; co < cout; ++co) gbias[co] += g[co];
      for (std::size_t i = 0; i < kh; ++i) {
        const std::ptrdiff_t ih = oh + static_cast<std::ptrdiff_t>(i) - ph;
        if (ih < 0 || ih >= H) continue;
        for (std::size_t j = 0; j < kw; ++j) {
          const std::ptrdiff_t iw = ow + static_cast<std::ptrdiff_t>(j) - pw;
          if (iw < 0 || iw >= W) continue;
          const std::ptrdiff_t in_off = (ih * W + iw) * static_cast<std::ptrdiff_t>(cin);
          const double* in = x.data() + in_off;
          const std::size_t wk_off = (i * kw + j) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double v = in[ci];
            const double* wrow = weights.data() + wk_off + ci * cout;
            double* gwrow = gweights.data() + wk_off + ci * cout;
            if (v != 0.0) {
              for (std::size_t co = 0; co < cout; ++co) gwrow[co] += v * g[co];
            }
            if (want_gx) {
              double acc = 0.0;
              for (std::size_t co = 0; co < cout; ++co) acc += wrow[co] * g[co];
              gx[static_cast<std::size_t>(in_off) + ci] += acc;
            }
          }
        }
      }
    }
  }
}

void maxpool2d(std::span<const double> x, std::size_t h, std::size_t w, std::size_t c,
               std::size_t kh, std::size_t kw, std::span<double> y,
               std::span<std::uint32_t> argmax) {
  const std::size_t oh_n = h / kh;
  const std::size_t ow_n = w / kw;
  for (std::size_t oh = 0; oh < oh_n; ++oh) {
    for (std::size_t ow = 0; ow < ow_n; ++ow) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((oh * kh) * w + ow * kw) * c + ch;
        double best_v = x[best];
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const std::size_t idx = ((oh * kh + i) * w + ow * kw + j) * c + ch;
            if (x[idx] > best_v) {
              best_v = x[idx];
              best = idx;
            }
          }
        }
        const std::size_t o = (oh * ow_n + ow) * c + ch;
        y[o] = best_v;
        if (!argmax.empty()) argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void causal_conv1d(std::span<const double> x, std::size_t t, std::size_t cin,
                   std::span<const double> weights, std::size_t k, std::size_t dilation,
                   std::size_t cout, std::span<const double> bias, std::span<double> y) {
  for (std::size_t step = 0; step < t; ++step) {
    double* out = y.data() + step * cout;
    std::copy(bias.begin(), bias.end(), out);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t lag = (k - 1 - j) * dilation;
      if (lag > step) continue;
      const double* in = x.data() + (step - lag) * cin;
      const double* wk = weights.data() + j * cin * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double v = in[ci];
        const double* wrow = wk + ci * cout;
        for (std::size_t co = 0; co < cout; ++co) out[co] += v * wrow[co];
      }
    }
  }
}

void causal_conv1d_backward(std::span<const double> x, std::size_t t, std::size_t cin,
                            std::span<const double> weights, std::size_t k, std::size_t dilation,
                            std::size_t cout, std::span<const double> gy, std::span<double> gx,
                            std::span<double> gweights, std::span<double> gbias) {
  const bool want_gx = !gx.empty();
  if (want_gx) std::fill(gx.begin(), gx.end(), 0.0);
  for (std::size_t step = 0; step < t; ++step) {
    const double* g = gy.data() + step * cout;
    for (std::size_t co = 0; co < cout; ++co) gbias[co] += g[co];
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t lag = (k - 1 - j) * dilation;
      if (lag > step) continue;
      const std::size_t in_off = (step - lag) * cin;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double v = x[in_off + ci];
        const double* wrow = weights.data() + (j * cin + ci) * cout;
        double* gwrow = gweights.data() + (j * cin + ci) * cout;
        double acc = 0.0;
        for (std::size_t co = 0; co < cout; ++co) {
          gwrow[co] += v * g[co];
          acc += wrow[co] * g[co];
        }
        if (want_gx) gx[in_off + ci] += acc;
      }
    }
  }
}

void dense(std::span<const double> x, std::size_t rows, std::size_t n,
           std::span<const double> weights, std::size_t m, std::span<const double> bias,
           std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* out = y.data() + r * m;
    std::copy(bias.begin(), bias.end(), out);
    const double* in = x.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = in[i];
      const double* wrow = weights.data() + i * m;
      for (std::size_t o = 0; o < m; ++o) out[o] += v * wrow[o];
    }
  }
}

void dense_backward(std::span<const double> x, std::size_t rows, std::size_t n,
                    std::span<const double> weights, std::size_t m, std::span<const double> gy,
                    std::span<double> gx, std::span<double> gweights, std::span<double> gbias) {
  const bool want_gx = !gx.empty();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = gy.data() + r * m;
    const double* in = x.data() + r * n;
    for (std::size_t o = 0; o < m; ++o) gbias[o] += g[o];
    for (std::size_t i = 0; i < n; ++i) {
      const double* wrow = weights.data() + i * m;
      double* gwrow = gweights.data() + i * m;
      double acc = 0.0;
      for (std::size_t o = 0; o < m; ++o) {
        gwrow[o] += in[i] * g[o];
        acc += wrow[o] * g[o];
      }
      if (want_gx) gx[r * n + i] = acc;
    }
  }
}

}  // namespace detail

Tensor conv2d_forward(const Tensor& x, const LayerSpec& spec, const Tensor& weights,
                      const Tensor& bias) {
  spec.validate();
  if (spec.padding != Padding::Same) {
    throw ValidationError("conv2d: only 'same' padding is supported");
  }
  if (spec.kernel.size() != 2) {
    throw ValidationError("conv2d: kernel must be kh x kw");
  }
  expect_rank(x, 3, "conv2d input");
  const std::size_t kh = spec.kernel[0];
  const std::size_t kw = spec.kernel[1];
  if (x.dim(2) != spec.channels_in) {
    throw ValidationError("conv2d: input has " + std::to_string(x.dim(2)) + " channels, spec " +
                          std::to_string(spec.channels_in));
  }
  expect_shape(weights, {kh, kw, spec.channels_in, spec.channels_out}, "conv2d weights");
  expect_shape(bias, {spec.channels_out}, "conv2d bias");
  Tensor y({x.dim(0), x.dim(1), spec.channels_out});
  detail::conv2d(x.data, x.dim(0), x.dim(1), spec.channels_in, weights.data, kh, kw,
                 spec.channels_out, bias.data, y.data);
  return y;
}

Tensor maxpool2d_forward(const Tensor& x, std::size_t kh, std::size_t kw,
                         std::vector<std::uint32_t>* argmax) {
  expect_rank(x, 3, "maxpool2d input");
  if (kh < 1 || kw < 1) {
    throw ValidationError("maxpool2d: kernel dimensions must be >= 1");
  }
  if (kh > x.dim(0) || kw > x.dim(1)) {
    throw ValidationError("maxpool2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                          " larger than input " + shape_string(x.shape));
  }
  Tensor y({x.dim(0) / kh, x.dim(1) / kw, x.dim(2)});
  std::span<std::uint32_t> idx;
  if (argmax != nullptr) {
    argmax->assign(y.size(), 0);
    idx = *argmax;
  }
  detail::maxpool2d(x.data, x.dim(0), x.dim(1), x.dim(2), kh, kw, y.data, idx);
  return y;
}

Tensor causal_conv1d_forward(const Tensor& x, const LayerSpec& spec, const Tensor& weights,
                             const Tensor& bias) {
  spec.validate();
  if (spec.kernel.size() != 1) {
    throw ValidationError("causal_conv1d: kernel must be a single size");
  }
  expect_rank(x, 2, "causal_conv1d input");
  if (x.dim(1) != spec.channels_in) {
    throw ValidationError("causal_conv1d: input has " + std::to_string(x.dim(1)) +
                          " channels, spec " + std::to_string(spec.channels_in));
  }
  const std::size_t k = spec.kernel[0];
  expect_shape(weights, {k, spec.channels_in, spec.channels_out}, "causal_conv1d weights");
  expect_shape(bias, {spec.channels_out}, "causal_conv1d bias");
  Tensor y({x.dim(0), spec.channels_out});
  detail::causal_conv1d(x.data, x.dim(0), spec.channels_in, weights.data, k, spec.dilation,
                        spec.channels_out, bias.data, y.data);
  return y;
}

Tensor residual_block_forward(const Tensor& x, const LayerSpec& spec, const Tensor& weights,
                              const Tensor& bias) {
  if (spec.channels_in != spec.channels_out) {
    throw ValidationError("residual block: input and output channel counts must match (" +
                          std::to_string(spec.channels_in) + " vs " +
                          std::to_string(spec.channels_out) + ")");
  }
  Tensor y = causal_conv1d_forward(x, spec, weights, bias);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y.data[i] = x.data[i] + std::max(y.data[i], 0.0);
  }
  return y;
}

Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw ValidationError("dense: input must be a vector or a T x n matrix, got " +
                          shape_string(x.shape));
  }
  expect_rank(weights, 2, "dense weights");
  const std::size_t n = x.shape.back();
  const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  if (weights.dim(0) != n) {
    throw ValidationError("dense: input width " + std::to_string(n) + " vs weights " +
                          shape_string(weights.shape));
  }
  const std::size_t m = weights.dim(1);
  expect_shape(bias, {m}, "dense bias");
  Tensor y(x.rank() == 2 ? Shape{rows, m} : Shape{m});
  detail::dense(x.data, rows, n, weights.data, m, bias.data, y.data);
  return y;
}

}  // namespace tinyradar
