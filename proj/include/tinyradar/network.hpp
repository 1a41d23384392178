#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tinyradar/layers.hpp"

namespace tinyradar {

/// Ordered chain of layers with value semantics (copies are deep).
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  /// Output shape of every layer for the given input; throws ValidationError
  /// naming the first layer whose input does not fit.
  std::vector<Shape> shape_chain(const Shape& input) const;

  Tensor forward(const Tensor& x);

  /// Reverse-mode pass from the gradient of the loss with respect to the
  /// network output. Parameter gradients accumulate (call zero_grad between
  /// batches). Returns the input gradient, or an empty tensor when
  /// `need_input_grad` is false. Throws StateError before any forward pass.
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);

  void zero_grad();
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;

  void initialize(std::uint64_t seed);

  // Hash of the routing decisions (ReLU masks, pooling winners) taken by the
  // most recent forward pass.
  std::uint64_t routing_signature() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  bool forward_done_ = false;
};

}  // namespace tinyradar
