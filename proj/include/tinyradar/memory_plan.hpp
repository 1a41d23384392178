#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tinyradar/model.hpp"

namespace tinyradar {

/// A group of layers executed back to back whose input and output buffers
/// must be resident at the same time. Convolution, activation and pooling of
/// one CNN stage run fused, so the pre-pooling map is never materialized.
struct MemoryBlock {
  std::string name;
  std::vector<std::size_t> layers;  // indices into the network
  std::size_t input_bytes = 0;
  std::size_t output_bytes = 0;
  std::size_t live_bytes = 0;  // input + output
};

struct MemoryPlan {
  std::vector<MemoryBlock> blocks;
  std::size_t peak_bytes = 0;
  std::size_t peak_block = 0;  // first block reaching the peak
};

/// Activation memory per block for one new frame through the CNN and one
/// full T-step pass through the sequence model, at `activation_bits` per value.
MemoryPlan memory_plan(const TinyRadarNN& model, unsigned activation_bits = 8);

}  // namespace tinyradar
