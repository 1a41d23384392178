#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinyradar/features.hpp"
#include "tinyradar/network.hpp"

namespace tinyradar {

struct ModelConfig {
  std::size_t tw = 32;
  std::size_t rp = 492;
  std::size_t sensors = 2;
  std::size_t classes = 11;
  std::size_t tcn_filters = 32;
  std::size_t time_steps = 5;
  std::vector<std::size_t> dilations{1, 2, 4};

  void validate() const;

  static ModelConfig eleven_gesture() { return {}; }
  static ModelConfig five_gesture() {
    ModelConfig c;
    c.rp = 414;
    c.sensors = 1;
    c.classes = 5;
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Fixed widths of the frame feature extractor and the classifier head.
inline constexpr std::size_t kCnnChannels[3] = {16, 32, 64};
inline constexpr std::size_t kHeadWidths[2] = {64, 32};
inline constexpr std::size_t kResidualKernel = 2;

/// The 2D-CNN feature extractor followed by the causal dilated TCN and the
/// per-step classifier, as one layer chain:
///
///   [T, TW, RP, C] -> Conv 3x5 (16) ReLU -> Pool 3x5 -> Conv 3x5 (32) ReLU
///   -> Pool 3x5 -> Conv 1x7 (64) ReLU -> Pool 1x7 -> Flatten [T, D]
///   -> pointwise causal conv D->F -> residual blocks (k=2, dilations)
///   -> Dense F->64 ReLU -> Dense 64->32 ReLU -> Dense 32->classes.
///
/// Pool kernels are clamped to the incoming extent so reduced configurations
/// (small TW or RP) still build; the full-size configurations never clamp.
struct TinyRadarNN {
  ModelConfig config;
  Network net;
  std::size_t cnn_layers = 0;  // layers [0, cnn_layers) form the frame extractor

  std::size_t flatten_width() const;
};

TinyRadarNN build_tinyradarnn(const ModelConfig& config, std::uint64_t seed = 1);

/// Stacks T feature frames into the [T, TW, RP, C] network input.
Tensor pack_sequence(const ModelConfig& config, std::span<const FeatureFrame> frames);

/// Logits, one row per time step: [T, classes]. Row t depends only on
/// frames 0..t.
Tensor forward_sequence(TinyRadarNN& model, std::span<const FeatureFrame> frames);

struct ParamBreakdown {
  std::size_t cnn = 0;
  std::size_t tcn = 0;  // sequence model including the dense classifier
  std::size_t total = 0;
};
ParamBreakdown count_params(const TinyRadarNN& model);

enum class TcnVariant { Proposed, Original };

/// Parameters of three residual blocks with F filters and kernel 2: one
/// convolution per block for the proposed variant, two for the original.
std::uint64_t tcn_param_formula(TcnVariant variant, std::uint64_t filters);

/// Three stacked LSTM layers of width F with four gates and dual biases.
std::uint64_t lstm_param_formula(std::uint64_t filters);

enum class Stage { Cnn, Tcn, Dense };
std::string_view to_string(Stage stage);

struct LayerOps {
  std::string layer;
  Stage stage = Stage::Cnn;
  Shape input;   // per invocation, without the leading batch/time axis for CNN layers
  Shape output;
  std::uint64_t macs = 0;
  std::uint64_t comparisons = 0;
};

/// Per-inference operation counts. The frame extractor runs once per new
/// frame; the sequence stages process all T steps.
struct MacBreakdown {
  std::vector<LayerOps> layers;
  std::uint64_t cnn = 0;
  std::uint64_t tcn = 0;
  std::uint64_t dense = 0;
  std::uint64_t pool_comparisons = 0;  // reported, not part of total
  std::uint64_t total = 0;
};
MacBreakdown count_macs(const TinyRadarNN& model);

/// One row of the architecture tables: CNN rows use per-frame H x W x C
/// shapes, sequence rows use T x width. Residual blocks expand into their
/// convolution row and an "Adding Layer" row; activations are omitted.
struct ArchitectureRow {
  std::string layer;
  std::string input;
  std::string output;
  std::string kernel;
  std::string extra;  // padding for CNN rows, dilation for sequence rows
};
std::vector<ArchitectureRow> architecture_table(const TinyRadarNN& model);

// TRNW model file: "TRNW", u32 version, model config, then per layer the kind,
// parameter count, and per parameter its rank, dims and f32 values.
std::vector<std::uint8_t> encode_model(const TinyRadarNN& model);
TinyRadarNN decode_model(std::span<const std::uint8_t> bytes);
void save_model(const std::string& path, const TinyRadarNN& model);
TinyRadarNN load_model(const std::string& path);

}  // namespace tinyradar
