#include "tinyradar/layers.hpp"

#include <cmath>

#include "tinyradar/errors.hpp"

namespace tinyradar {

namespace {

void mix(std::uint64_t& hash, std::uint64_t value) {
  // FNV-1a over the 8 bytes of `value`.
  for (int i = 0; i < 8; ++i) {
    hash ^= (value >> (8 * i)) & 0xFFu;
    hash *= 0x100000001b3ULL;
  }
}

void fill_uniform(Tensor& t, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data) v = dist(rng);
}

Tensor make_param(Shape shape) {
  Tensor t(std::move(shape));
  t.enable_grad();
  return t;
}

std::string layer_error(const Layer& layer, const std::string& what) {
  return layer.name() + ": " + what;
}

}  // namespace

std::vector<const Tensor*> Layer::parameters() const {
  auto mut = const_cast<Layer*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

OpCount Layer::ops(const Shape& /*in*/) const { return {}; }

void Layer::require_cache() const {
  if (!cached_) {
    throw StateError(name() + ": backward called before forward");
  }
}

// ---------------------------------------------------------------- Conv2D

Conv2DLayer::Conv2DLayer(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout,
                         LayerKind label)
    : kh_(kh), kw_(kw), cin_(cin), cout_(cout), label_(label),
      weights_(make_param({kh, kw, cin, cout})), bias_(make_param({cout})) {
  spec().validate();
  if (cin == 0 || cout == 0) {
    throw ValidationError("Conv2D: channel counts must be >= 1");
  }
}

LayerSpec Conv2DLayer::spec() const {
  return {label_, {kh_, kw_}, cin_, cout_, 1, Padding::Same};
}

Shape Conv2DLayer::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[3] != cin_) {
    throw ValidationError(layer_error(*this, "expected N x H x W x " + std::to_string(cin_) +
                                                 " input, got " + shape_string(in)));
  }
  return {in[0], in[1], in[2], cout_};
}

Tensor Conv2DLayer::forward(const Tensor& x) {
  Tensor y(output_shape(x.shape));
  const std::size_t in_sz = x.dim(1) * x.dim(2) * cin_;
  const std::size_t out_sz = x.dim(1) * x.dim(2) * cout_;
  const std::span<const double> xs(x.data);
  const std::span<double> ys(y.data);
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    detail::conv2d(xs.subspan(n * in_sz, in_sz), x.dim(1), x.dim(2), cin_, weights_.data, kh_, kw_,
                   cout_, bias_.data, ys.subspan(n * out_sz, out_sz));
  }
  input_ = x;
  cached_ = true;
  return y;
}

Tensor Conv2DLayer::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache();
  const Shape out_shape = output_shape(input_.shape);
  if (grad_out.shape != out_shape) {
    throw ValidationError(layer_error(*this, "gradient shape " + shape_string(grad_out.shape)));
  }
  Tensor gx;
  if (need_input_grad) gx = Tensor(input_.shape);
  const std::size_t h = input_.dim(1), w = input_.dim(2);
  const std::size_t in_sz = h * w * cin_;
  const std::size_t out_sz = h * w * cout_;
  const std::span<const double> xs(input_.data);
  const std::span<const double> gs(grad_out.data);
  for (std::size_t n = 0; n < input_.dim(0); ++n) {
    std::span<double> gxs;
    if (need_input_grad) gxs = std::span<double>(gx.data).subspan(n * in_sz, in_sz);
    detail::conv2d_backward(xs.subspan(n * in_sz, in_sz), h, w, cin_, weights_.data, kh_, kw_,
                            cout_, gs.subspan(n * out_sz, out_sz), gxs, weights_.grad,
                            bias_.grad);
  }
  return gx;
}

void Conv2DLayer::initialize(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(kh_ * kw_ * cin_);
  fill_uniform(weights_, std::sqrt(6.0 / fan_in), rng);
  std::fill(bias_.data.begin(), bias_.data.end(), 0.0);
}

OpCount Conv2DLayer::ops(const Shape& in) const {
  const Shape out = output_shape(in);
  return {shape_volume(out) * kh_ * kw_ * cin_, 0};
}

// ---------------------------------------------------------------- MaxPool2D

MaxPool2DLayer::MaxPool2DLayer(std::size_t kh, std::size_t kw) : kh_(kh), kw_(kw) {
  spec().validate();
}

LayerSpec MaxPool2DLayer::spec() const {
  return {LayerKind::MaxPool2D, {kh_, kw_}, 0, 0, 1, Padding::Valid};
}

Shape MaxPool2DLayer::output_shape(const Shape& in) const {
  if (in.size() != 4) {
    throw ValidationError(layer_error(*this, "expected N x H x W x C input, got " + shape_string(in)));
  }
  if (kh_ > in[1] || kw_ > in[2]) {
    throw ValidationError(layer_error(*this, "kernel " + std::to_string(kh_) + "x" +
                                                 std::to_string(kw_) + " larger than input " +
                                                 shape_string(in)));
  }
  return {in[0], in[1] / kh_, in[2] / kw_, in[3]};
}

Tensor MaxPool2DLayer::forward(const Tensor& x) {
  Tensor y(output_shape(x.shape));
  const std::size_t in_sz = x.dim(1) * x.dim(2) * x.dim(3);
  const std::size_t out_sz = y.dim(1) * y.dim(2) * y.dim(3);
  argmax_.assign(y.size(), 0);
  const std::span<const double> xs(x.data);
  const std::span<double> ys(y.data);
  const std::span<std::uint32_t> idx(argmax_);
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    detail::maxpool2d(xs.subspan(n * in_sz, in_sz), x.dim(1), x.dim(2), x.dim(3), kh_, kw_,
                      ys.subspan(n * out_sz, out_sz), idx.subspan(n * out_sz, out_sz));
  }
  in_shape_ = x.shape;
  cached_ = true;
  return y;
}

Tensor MaxPool2DLayer::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache();
  if (!need_input_grad) return {};
  Tensor gx(in_shape_);
  const std::size_t in_sz = in_shape_[1] * in_shape_[2] * in_shape_[3];
  const std::size_t out_sz = grad_out.size() / in_shape_[0];
  for (std::size_t n = 0; n < in_shape_[0]; ++n) {
    for (std::size_t o = 0; o < out_sz; ++o) {
      gx.data[n * in_sz + argmax_[n * out_sz + o]] += grad_out.data[n * out_sz + o];
    }
  }
  return gx;
}

OpCount MaxPool2DLayer::ops(const Shape& in) const {
  const Shape out = output_shape(in);
  return {0, shape_volume(out) * (kh_ * kw_ - 1)};
}

void MaxPool2DLayer::hash_routing(std::uint64_t& hash) const {
  for (std::uint32_t i : argmax_) mix(hash, i);
}

// ---------------------------------------------------------------- ReLU

LayerSpec ReLULayer::spec() const { return {LayerKind::ReLU, {}, 0, 0, 1, Padding::Same}; }

Tensor ReLULayer::forward(const Tensor& x) {
  Tensor y = x;
  active_.assign(x.size(), false);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.data[i] > 0.0) {
      active_[i] = true;
    } else {
      y.data[i] = 0.0;
    }
  }
  cached_ = true;
  return y;
}

Tensor ReLULayer::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache();
  if (!need_input_grad) return {};
  Tensor gx = grad_out;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    if (!active_[i]) gx.data[i] = 0.0;
  }
  return gx;
}

void ReLULayer::hash_routing(std::uint64_t& hash) const {
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    word = (word << 1) | (active_[i] ? 1u : 0u);
    if (i % 64 == 63) {
      mix(hash, word);
      word = 0;
    }
  }
  mix(hash, word);
}

// ---------------------------------------------------------------- Flatten

LayerSpec FlattenLayer::spec() const { return {LayerKind::Flatten, {}, 0, 0, 1, Padding::Valid}; }

Shape FlattenLayer::output_shape(const Shape& in) const {
  if (in.size() < 2) {
    throw ValidationError(layer_error(*this, "needs a batch axis, got " + shape_string(in)));
  }
  return {in[0], shape_volume(in) / in[0]};
}

Tensor FlattenLayer::forward(const Tensor& x) {
  in_shape_ = x.shape;
  cached_ = true;
  Tensor y = x;
  y.shape = output_shape(x.shape);
  y.grad.clear();
  return y;
}

Tensor FlattenLayer::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache();
  if (!need_input_grad) return {};
  Tensor gx = grad_out;
  gx.shape = in_shape_;
  return gx;
}

// ---------------------------------------------------------------- CausalConv1D

CausalConv1DLayer::CausalConv1DLayer(std::size_t kernel, std::size_t dilation, std::size_t cin,
                                     std::size_t cout)
    : k_(kernel), dilation_(dilation), cin_(cin), cout_(cout),
      weights_(make_param({kernel, cin, cout})), bias_(make_param({cout})) {
  spec().validate();
  if (cin == 0 || cout == 0) {
    throw ValidationError("CausalConv1D: channel counts must be >= 1");
  }
}

LayerSpec CausalConv1DLayer::spec() const {
  return {LayerKind::CausalConv1D, {k_}, cin_, cout_, dilation_, Padding::Valid};
}

Shape CausalConv1DLayer::output_shape(const Shape& in) const {
  if (in.size() != 2 || in[1] != cin_) {
    throw ValidationError(layer_error(*this, "expected T x " + std::to_string(cin_) +
                                                 " input, got " + shape_string(in)));
  }
  return {in[0], cout_};
}

Tensor CausalConv1DLayer::forward(const Tensor& x) {
  Tensor y(output_shape(x.shape));
  detail::causal_conv1d(x.data, x.dim(0), cin_, weights_.data, k_, dilation_, cout_, bias_.data,
                        y.data);
  input_ = x;
  cached_ = true;
  return y;
}

Tensor CausalConv1DLayer::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache();
  if (grad_out.shape != output_shape(input_.shape)) {
    throw ValidationError(layer_error(*this, "gradient shape " + shape_string(grad_out.shape)));
  }
  Tensor gx;
  if (need_input_grad) gx = Tensor(input_.shape);
  detail::causal_conv1d_backward(input_.data, input_.dim(0), cin_, weights_.data, k_, dilation_,
                                 cout_, grad_out.data, gx.data, weights_.grad, bias_.grad);
  return gx;
}

void CausalConv1DLayer::initialize(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(k_ * cin_);
  fill_uniform(weights_, std::sqrt(6.0 / fan_in), rng);
  std::fill(bias_.data.begin(), bias_.data.end(), 0.0);
}

OpCount CausalConv1DLayer::ops(const Shape& in) const {
  const Shape out = output_shape(in);
  return {out[0] * k_ * cin_ * cout_, 0};
}

// ---------------------------------------------------------------- Dense

DenseLayer::DenseLayer(std::size_t n, std::size_t m, bool relu_follows)
    : n_(n), m_(m), relu_follows_(relu_follows), weights_(make_param({n, m})),
      bias_(make_param({m})) {
  if (n == 0 || m == 0) {
    throw ValidationError("Dense: widths must be >= 1");
  }
}

LayerSpec DenseLayer::spec() const { return {LayerKind::Dense, {}, n_, m_, 1, Padding::Valid}; }

Shape DenseLayer::output_shape(const Shape& in) const {
  if (in.size() != 2 || in[1] != n_) {
    throw ValidationError(layer_error(*this, "expected N x " + std::to_string(n_) +
                                                 " input, got " + shape_string(in)));
  }
  return {in[0], m_};
}

Tensor DenseLayer::forward(const Tensor& x) {
  Tensor y(output_shape(x.shape));
  detail::dense(x.data, x.dim(0), n_, weights_.data, m_, bias_.data, y.data);
  input_ = x;
  cached_ = true;
  return y;
}

Tensor DenseLayer::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache();
  if (grad_out.shape != output_shape(input_.shape)) {
    throw ValidationError(layer_error(*this, "gradient shape " + shape_string(grad_out.shape)));
  }
  Tensor gx;
  if (need_input_grad) gx = Tensor(input_.shape);
  detail::dense_backward(input_.data, input_.dim(0), n_, weights_.data, m_, grad_out.data, gx.data,
                         weights_.grad, bias_.grad);
  return gx;
}

void DenseLayer::initialize(std::mt19937_64& rng) {
  const double gain = relu_follows_ ? 6.0 : 3.0;
  fill_uniform(weights_, std::sqrt(gain / static_cast<double>(n_)), rng);
  std::fill(bias_.data.begin(), bias_.data.end(), 0.0);
}

OpCount DenseLayer::ops(const Shape& in) const {
  const Shape out = output_shape(in);
  return {out[0] * n_ * m_, 0};
}

// ---------------------------------------------------------------- ResidualBlock

ResidualBlockLayer::ResidualBlockLayer(std::size_t channels, std::size_t kernel,
                                       std::size_t dilation)
    : conv_(kernel, dilation, channels, channels) {}

LayerSpec ResidualBlockLayer::spec() const {
  LayerSpec s = conv_.spec();
  s.kind = LayerKind::ResidualBlock;
  return s;
}

Shape ResidualBlockLayer::output_shape(const Shape& in) const { return conv_.output_shape(in); }

Tensor ResidualBlockLayer::forward(const Tensor& x) {
  Tensor y = relu_.forward(conv_.forward(x));
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
  cached_ = true;
  return y;
}

Tensor ResidualBlockLayer::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache();
  Tensor gx = conv_.backward(relu_.backward(grad_out, true), need_input_grad);
  if (!need_input_grad) return {};
  for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += grad_out.data[i];
  return gx;
}

}  // namespace tinyradar
