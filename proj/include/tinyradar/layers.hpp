#pragma once

// Trainable layer objects. Every layer consumes a tensor whose leading
// dimension is the batch/time axis:
//   Conv2D, MaxPool2D, Flatten  : N x H x W x C   (N = frames of a sequence)
//   CausalConv1D, ResidualBlock : T x C           (the leading axis is time)
//   Dense, ReLU                 : N x ...         (applied per leading index)
// forward() caches what backward() needs; backward() accumulates parameter
// gradients and returns the gradient with respect to the input.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tinyradar/kernels.hpp"
#include "tinyradar/tensor.hpp"

namespace tinyradar {

struct OpCount {
  std::uint64_t macs = 0;
  std::uint64_t comparisons = 0;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  // Throws ValidationError when `in` cannot feed this layer.
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out, bool need_input_grad) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::vector<Tensor*> parameters() { return {}; }
  std::vector<const Tensor*> parameters() const;
  virtual void initialize(std::mt19937_64& /*rng*/) {}
  virtual OpCount ops(const Shape& in) const;

  // Folds the data-dependent routing of the last forward pass (ReLU masks,
  // pooling winners) into `hash`. Finite-difference checks use it to detect
  // perturbations that cross a non-differentiable point.
  virtual void hash_routing(std::uint64_t& /*hash*/) const {}

  std::string name() const { return std::string(to_string(spec().kind)); }
  bool has_cache() const { return cached_; }

 protected:
  void require_cache() const;
  bool cached_ = false;
};

// 2-D convolution with "same" padding. A 1 x k instance may be labelled
// Conv1D so layer tables read the way the architecture is usually described.
class Conv2DLayer final : public Layer {
 public:
  Conv2DLayer(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout,
              LayerKind label = LayerKind::Conv2D);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2DLayer>(*this); }
  std::vector<Tensor*> parameters() override { return {&weights_, &bias_}; }
  void initialize(std::mt19937_64& rng) override;
  OpCount ops(const Shape& in) const override;

  Tensor& weights() { return weights_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t kh_, kw_, cin_, cout_;
  LayerKind label_;
  Tensor weights_, bias_;
  Tensor input_;
};

// Max pooling with stride equal to the kernel and valid padding.
class MaxPool2DLayer final : public Layer {
 public:
  MaxPool2DLayer(std::size_t kh, std::size_t kw);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2DLayer>(*this); }
  OpCount ops(const Shape& in) const override;
  void hash_routing(std::uint64_t& hash) const override;

 private:
  std::size_t kh_, kw_;
  Shape in_shape_;
  std::vector<std::uint32_t> argmax_;  // per batch element, offsets within the sample
};

class ReLULayer final : public Layer {
 public:
  LayerSpec spec() const override;
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLULayer>(*this); }
  void hash_routing(std::uint64_t& hash) const override;

 private:
  std::vector<bool> active_;
};

class FlattenLayer final : public Layer {
 public:
  LayerSpec spec() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }

 private:
  Shape in_shape_;
};

class CausalConv1DLayer final : public Layer {
 public:
  CausalConv1DLayer(std::size_t kernel, std::size_t dilation, std::size_t cin, std::size_t cout);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<CausalConv1DLayer>(*this);
  }
  std::vector<Tensor*> parameters() override { return {&weights_, &bias_}; }
  void initialize(std::mt19937_64& rng) override;
  OpCount ops(const Shape& in) const override;

  Tensor& weights() { return weights_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t k_, dilation_, cin_, cout_;
  Tensor weights_, bias_;
  Tensor input_;
};

class DenseLayer final : public Layer {
 public:
  // `relu_follows` selects He scaling at initialization; the classifier head
  // uses LeCun scaling.
  DenseLayer(std::size_t n, std::size_t m, bool relu_follows = true);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
  std::vector<Tensor*> parameters() override { return {&weights_, &bias_}; }
  void initialize(std::mt19937_64& rng) override;
  OpCount ops(const Shape& in) const override;

  Tensor& weights() { return weights_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t n_, m_;
  bool relu_follows_;
  Tensor weights_, bias_;
  Tensor input_;
};

// y = x + ReLU(causal_conv(x; k, dilation)) with full channel mixing.
class ResidualBlockLayer final : public Layer {
 public:
  ResidualBlockLayer(std::size_t channels, std::size_t kernel, std::size_t dilation);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ResidualBlockLayer>(*this);
  }
  std::vector<Tensor*> parameters() override { return conv_.parameters(); }
  void initialize(std::mt19937_64& rng) override { conv_.initialize(rng); }
  OpCount ops(const Shape& in) const override { return conv_.ops(in); }
  void hash_routing(std::uint64_t& hash) const override { relu_.hash_routing(hash); }

  Tensor& weights() { return conv_.weights(); }
  Tensor& bias() { return conv_.bias(); }

 private:
  CausalConv1DLayer conv_;
  ReLULayer relu_;
};

}  // namespace tinyradar
