#include "tinyradar/network.hpp"

#include <random>
#include <string>

#include "tinyradar/errors.hpp"

namespace tinyradar {

Network::Network(const Network& other) : forward_done_(false) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::vector<Shape> Network::shape_chain(const Shape& input) const {
  std::vector<Shape> chain;
  chain.reserve(layers_.size());
  Shape cur = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      cur = layers_[i]->output_shape(cur);
    } catch (const ValidationError& e) {
      throw ValidationError("layer " + std::to_string(i) + " (" + layers_[i]->name() +
                            "): " + e.what());
    }
    chain.push_back(cur);
  }
  return chain;
}

Tensor Network::forward(const Tensor& x) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur);
  forward_done_ = true;
  return cur;
}

Tensor Network::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!forward_done_) {
    throw StateError("network: backward called before forward");
  }
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = need_input_grad || i > 0;
    g = layers_[i]->backward(g, need);
  }
  return g;
}

void Network::zero_grad() {
  for (Tensor* p : parameters()) p->zero_grad();
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* p : l->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_) {
    for (const Tensor* p : static_cast<const Layer&>(*l).parameters()) out.push_back(p);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

void Network::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : layers_) l->initialize(rng);
}

std::uint64_t Network::routing_signature() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& l : layers_) l->hash_routing(h);
  return h;
}

}  // namespace tinyradar
