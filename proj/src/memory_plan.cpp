#include "tinyradar/memory_plan.hpp"

#include "tinyradar/errors.hpp"

namespace tinyradar {

namespace {

bool joins_previous(LayerKind kind) {
  return kind == LayerKind::ReLU || kind == LayerKind::MaxPool2D || kind == LayerKind::Flatten;
}

}  // namespace

MemoryPlan memory_plan(const TinyRadarNN& model, unsigned activation_bits) {
  if (activation_bits == 0 || activation_bits % 8 != 0) {
    throw ValidationError("memory_plan: activation bits must be a positive multiple of 8, got " +
                          std::to_string(activation_bits));
  }
  const std::size_t bytes_per_value = activation_bits / 8;
  const ModelConfig& cfg = model.config;
  const Network& net = model.net;

  MemoryPlan plan;
  Shape cur{1, cfg.tw, cfg.rp, cfg.sensors};
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (i == model.cnn_layers) cur = {cfg.time_steps, cur[1]};
    const Layer& layer = net.layer(i);
    const Shape out = layer.output_shape(cur);
    const bool cnn = i < model.cnn_layers;
    const std::size_t in_volume = cnn ? shape_volume(cur) / cur[0] : shape_volume(cur);
    const std::size_t out_volume = cnn ? shape_volume(out) / out[0] : shape_volume(out);

    if (joins_previous(layer.spec().kind) && !plan.blocks.empty()) {
      MemoryBlock& b = plan.blocks.back();
      b.layers.push_back(i);
      b.name += "+" + layer.name();
      b.output_bytes = out_volume * bytes_per_value;
    } else {
      MemoryBlock b;
      b.name = layer.name();
      b.layers.push_back(i);
      b.input_bytes = in_volume * bytes_per_value;
      b.output_bytes = out_volume * bytes_per_value;
      plan.blocks.push_back(std::move(b));
    }
    cur = out;
  }
  for (std::size_t k = 0; k < plan.blocks.size(); ++k) {
    MemoryBlock& b = plan.blocks[k];
    b.live_bytes = b.input_bytes + b.output_bytes;
    if (b.live_bytes > plan.peak_bytes) {
      plan.peak_bytes = b.live_bytes;
      plan.peak_block = k;
    }
  }
  return plan;
}

}  // namespace tinyradar
