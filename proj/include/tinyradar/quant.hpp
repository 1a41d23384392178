#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinyradar/features.hpp"
#include "tinyradar/model.hpp"

namespace tinyradar {

struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;
  int bit_width = 8;
  bool symmetric = false;
  // Symmetric params may use a reduced positive limit (accumulator headroom).
  std::int32_t q_limit = 127;

  std::int32_t qmin() const { return symmetric ? -q_limit : -(1 << (bit_width - 1)); }
  std::int32_t qmax() const { return symmetric ? q_limit : (1 << (bit_width - 1)) - 1; }
  std::int32_t quantize(double v) const;
  double dequantize(std::int32_t q) const {
    return static_cast<double>(q - zero_point) * scale;
  }
};

/// 8-bit asymmetric activation params covering [min(lo,0), max(hi,0)].
QuantParams activation_params(double lo, double hi);

/// Symmetric weight params mapping max_abs to +/- `limit` (at most 2^15-1).
/// The limit is nudged down, if needed, until max_abs dequantizes exactly.
QuantParams weight_params(double max_abs, std::int32_t limit = 32767);

/// One quantized operation. Convolutions and dense layers absorb a
/// following ReLU; pooling and flatten pass int8 data through unchanged.
struct QuantizedLayer {
  LayerKind kind = LayerKind::Dense;
  std::vector<std::size_t> kernel;
  std::size_t channels_in = 0;
  std::size_t channels_out = 0;
  std::size_t dilation = 1;
  bool relu = false;

  Shape weight_shape;
  std::vector<std::int16_t> weights;
  std::vector<std::int32_t> bias;  // in accumulator scale input.scale * weight.scale
  QuantParams weight;
  QuantParams input;
  QuantParams output;
  double rescale = 1.0;  // input.scale * weight.scale / output.scale
};

struct QuantizedNetwork {
  ModelConfig config;
  QuantParams input;
  std::vector<QuantizedLayer> layers;
};

/// Post-training quantization: 16-bit symmetric per-layer weights, 8-bit
/// asymmetric activations calibrated from min/max over `calibration`
/// (packed [T, TW, RP, C] inputs), 32-bit biases. Throws OverflowError when
/// a layer's worst-case accumulation cannot fit in 32 bits.
QuantizedNetwork calibrate_and_quantize(const TinyRadarNN& model,
                                        std::span<const Tensor> calibration);

/// Worst-case |accumulator| of a weighted layer for any int8 input.
std::int64_t worst_case_accumulator(const QuantizedLayer& layer);

std::vector<std::int8_t> quantize_input(const QuantizedNetwork& qnet, const Tensor& x);

/// Integer inference on a packed [T, TW, RP, C] input; returns dequantized
/// logits [T, classes] computed from the final layer's 32-bit accumulators.
Tensor quantized_forward(const QuantizedNetwork& qnet, const Tensor& x);
Tensor quantized_forward_sequence(const QuantizedNetwork& qnet,
                                  std::span<const FeatureFrame> frames);
/// Same as quantized_forward for input already quantized with qnet.input.
Tensor quantized_forward_int8(const QuantizedNetwork& qnet, const Shape& shape,
                              std::span<const std::int8_t> x);

/// Weight and bias storage at their declared widths (activations excluded).
std::size_t model_size_bytes(const QuantizedNetwork& qnet);

// TRQ1 file: "TRQ1", u32 version, model config, input params, then per layer
// kind, geometry, bit widths, scales as f64, zero points, int16 weights and
// int32 biases, all little-endian.
std::vector<std::uint8_t> encode_quantized(const QuantizedNetwork& qnet);
QuantizedNetwork decode_quantized(std::span<const std::uint8_t> bytes);
void save_quantized(const std::string& path, const QuantizedNetwork& qnet);
QuantizedNetwork load_quantized(const std::string& path);

}  // namespace tinyradar
