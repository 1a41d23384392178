#include "tinyradar/model.hpp"

#include <algorithm>

#include "tinyradar/byte_io.hpp"
#include "tinyradar/errors.hpp"

namespace tinyradar {

namespace {

constexpr std::uint32_t kTrnwVersion = 1;

std::string dims(std::initializer_list<std::size_t> d) { return shape_string(Shape(d)); }

std::string frame_dims(const Shape& batched) {
  return shape_string(Shape(batched.begin() + 1, batched.end()));
}

}  // namespace

void ModelConfig::validate() const {
  if (tw < 1 || rp < 1) throw ValidationError("model config: tw and rp must be >= 1");
  if (sensors < 1) throw ValidationError("model config: sensors must be >= 1");
  if (classes < 2) throw ValidationError("model config: classes must be >= 2");
  if (tcn_filters < 1) throw ValidationError("model config: tcn_filters must be >= 1");
  if (time_steps < 1) throw ValidationError("model config: time_steps must be >= 1");
  for (std::size_t d : dilations) {
    if (d < 1) throw ValidationError("model config: dilations must be >= 1");
  }
}

std::size_t TinyRadarNN::flatten_width() const {
  const auto chain = net.shape_chain({1, config.tw, config.rp, config.sensors});
  return chain[cnn_layers - 1][1];
}

TinyRadarNN build_tinyradarnn(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  TinyRadarNN model;
  model.config = config;
  Network& net = model.net;

  std::size_t h = config.tw;
  std::size_t w = config.rp;
  std::size_t c = config.sensors;

  struct Stage2d {
    std::size_t kh, kw, channels;
    LayerKind label;
  };
  const Stage2d stages[3] = {{3, 5, kCnnChannels[0], LayerKind::Conv2D},
                             {3, 5, kCnnChannels[1], LayerKind::Conv2D},
                             {1, 7, kCnnChannels[2], LayerKind::Conv1D}};
  for (const Stage2d& s : stages) {
    net.emplace<Conv2DLayer>(s.kh, s.kw, c, s.channels, s.label);
    net.emplace<ReLULayer>();
    const std::size_t ph = std::min(s.kh, h);
    const std::size_t pw = std::min(s.kw, w);
    net.emplace<MaxPool2DLayer>(ph, pw);
    h /= ph;
    w /= pw;
    c = s.channels;
  }
  net.emplace<FlattenLayer>();
  model.cnn_layers = net.size();
  const std::size_t flat = h * w * c;

  const std::size_t f = config.tcn_filters;
  net.emplace<CausalConv1DLayer>(1, 1, flat, f);
  for (std::size_t d : config.dilations) {
    net.emplace<ResidualBlockLayer>(f, kResidualKernel, d);
  }
  net.emplace<DenseLayer>(f, kHeadWidths[0]);
  net.emplace<ReLULayer>();
  net.emplace<DenseLayer>(kHeadWidths[0], kHeadWidths[1]);
  net.emplace<ReLULayer>();
  net.emplace<DenseLayer>(kHeadWidths[1], config.classes, false);

  const auto chain = net.shape_chain({config.time_steps, config.tw, config.rp, config.sensors});
  if (chain.back() != Shape{config.time_steps, config.classes}) {
    throw ValidationError("build_tinyradarnn: output shape " + shape_string(chain.back()));
  }
  net.initialize(seed);
  return model;
}

Tensor pack_sequence(const ModelConfig& config, std::span<const FeatureFrame> frames) {
  if (frames.size() != config.time_steps) {
    throw ValidationError("sequence: expected " + std::to_string(config.time_steps) +
                          " frames, got " + std::to_string(frames.size()));
  }
  const std::size_t per = config.tw * config.rp * config.sensors;
  Tensor x({config.time_steps, config.tw, config.rp, config.sensors});
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const FeatureFrame& f = frames[t];
    if (f.tw != config.tw || f.range_points != config.rp || f.channels != config.sensors ||
        f.data.size() != per) {
      throw ValidationError("sequence: frame " + std::to_string(t) + " is " +
                            dims({f.tw, f.range_points, f.channels}) + ", model expects " +
                            dims({config.tw, config.rp, config.sensors}));
    }
    std::copy(f.data.begin(), f.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(t * per));
  }
  return x;
}

Tensor forward_sequence(TinyRadarNN& model, std::span<const FeatureFrame> frames) {
  return model.net.forward(pack_sequence(model.config, frames));
}

ParamBreakdown count_params(const TinyRadarNN& model) {
  ParamBreakdown b;
  for (std::size_t i = 0; i < model.net.size(); ++i) {
    std::size_t n = 0;
    for (const Tensor* p : model.net.layer(i).parameters()) n += p->size();
    (i < model.cnn_layers ? b.cnn : b.tcn) += n;
  }
  b.total = b.cnn + b.tcn;
  return b;
}

std::uint64_t tcn_param_formula(TcnVariant variant, std::uint64_t filters) {
  if (filters < 1) throw ValidationError("tcn_param_formula: filters must be >= 1");
  const std::uint64_t per_conv = 2 * filters * filters + filters;
  return (variant == TcnVariant::Proposed ? 3 : 6) * per_conv;
}

std::uint64_t lstm_param_formula(std::uint64_t filters) {
  if (filters < 1) throw ValidationError("lstm_param_formula: filters must be >= 1");
  return 3 * (8 * filters * filters + 8 * filters);
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Cnn: return "2D CNN";
    case Stage::Tcn: return "TCN";
    case Stage::Dense: return "Dense";
  }
  return "?";
}

MacBreakdown count_macs(const TinyRadarNN& model) {
  const ModelConfig& cfg = model.config;
  MacBreakdown out;
  Shape frame_in{1, cfg.tw, cfg.rp, cfg.sensors};
  Shape seq_in;
  for (std::size_t i = 0; i < model.net.size(); ++i) {
    const Layer& layer = model.net.layer(i);
    const bool cnn = i < model.cnn_layers;
    if (i == model.cnn_layers) {
      seq_in = {cfg.time_steps, frame_in[1]};
    }
    Shape& in = cnn ? frame_in : seq_in;
    const Shape outs = layer.output_shape(in);
    const OpCount ops = layer.ops(in);

    LayerOps row;
    row.layer = layer.name();
    const LayerKind kind = layer.spec().kind;
    row.stage = cnn ? Stage::Cnn : (kind == LayerKind::Dense ? Stage::Dense : Stage::Tcn);
    row.input = cnn ? Shape(in.begin() + 1, in.end()) : in;
    row.output = cnn ? Shape(outs.begin() + 1, outs.end()) : outs;
    row.macs = ops.macs;
    row.comparisons = ops.comparisons;
    switch (row.stage) {
      case Stage::Cnn: out.cnn += ops.macs; break;
      case Stage::Tcn: out.tcn += ops.macs; break;
      case Stage::Dense: out.dense += ops.macs; break;
    }
    out.pool_comparisons += ops.comparisons;
    out.layers.push_back(std::move(row));
    in = outs;
  }
  out.total = out.cnn + out.tcn + out.dense;
  return out;
}

std::vector<ArchitectureRow> architecture_table(const TinyRadarNN& model) {
  const ModelConfig& cfg = model.config;
  const auto chain = model.net.shape_chain({cfg.time_steps, cfg.tw, cfg.rp, cfg.sensors});
  std::vector<ArchitectureRow> rows;
  Shape in{cfg.time_steps, cfg.tw, cfg.rp, cfg.sensors};
  for (std::size_t i = 0; i < model.net.size(); ++i) {
    const Layer& layer = model.net.layer(i);
    const LayerSpec spec = layer.spec();
    const Shape& outs = chain[i];
    const std::string k = spec.kernel.size() == 2
                              ? std::to_string(spec.kernel[0]) + "x" + std::to_string(spec.kernel[1])
                              : (spec.kernel.size() == 1 ? std::to_string(spec.kernel[0]) : "-");
    switch (spec.kind) {
      case LayerKind::Conv2D:
        rows.push_back({"2D Conv", frame_dims(in), frame_dims(outs), k, "Same"});
        break;
      case LayerKind::Conv1D:
        rows.push_back({"1D Conv", frame_dims(in), frame_dims(outs), k, "Same"});
        break;
      case LayerKind::MaxPool2D:
        rows.push_back({"Max Pooling", frame_dims(in), frame_dims(outs), k, "Valid"});
        break;
      case LayerKind::Flatten:
        rows.push_back({"Flatten", frame_dims(in), std::to_string(outs[1]), "-", "-"});
        break;
      case LayerKind::CausalConv1D:
        rows.push_back({"Causal 1D Convolution", shape_string(in), shape_string(outs), k,
                        spec.kernel[0] == 1 ? "-" : std::to_string(spec.dilation)});
        break;
      case LayerKind::ResidualBlock:
        rows.push_back({"Causal 1D Convolution", shape_string(in), shape_string(outs), k,
                        std::to_string(spec.dilation)});
        rows.push_back({"Adding Layer", shape_string(outs), shape_string(outs), "-", "-"});
        break;
      case LayerKind::Dense:
        rows.push_back({"Fully connected", shape_string(in), shape_string(outs), "-", "-"});
        break;
      case LayerKind::ReLU:
        break;
    }
    in = outs;
  }
  return rows;
}

std::vector<std::uint8_t> encode_model(const TinyRadarNN& model) {
  const ModelConfig& c = model.config;
  bytes::Writer w;
  w.magic("TRNW");
  w.u32(kTrnwVersion);
  for (std::size_t v : {c.tw, c.rp, c.sensors, c.classes, c.tcn_filters, c.time_steps}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(c.dilations.size()));
  for (std::size_t d : c.dilations) w.u32(static_cast<std::uint32_t>(d));

  w.u32(static_cast<std::uint32_t>(model.net.size()));
  for (std::size_t i = 0; i < model.net.size(); ++i) {
    const Layer& layer = model.net.layer(i);
    const auto params = layer.parameters();
    w.u32(static_cast<std::uint32_t>(layer.spec().kind));
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const Tensor* p : params) {
      w.u32(static_cast<std::uint32_t>(p->rank()));
      for (std::size_t d : p->shape) w.u32(static_cast<std::uint32_t>(d));
      for (double v : p->data) w.f32(static_cast<float>(v));
    }
  }
  return std::move(w).take();
}

TinyRadarNN decode_model(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  r.expect_magic("TRNW", "TRNW");
  const std::uint32_t version = r.u32("TRNW header");
  if (version != kTrnwVersion) {
    throw FormatError("TRNW: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kTrnwVersion) + ")");
  }
  ModelConfig c;
  c.tw = r.u32("TRNW config");
  c.rp = r.u32("TRNW config");
  c.sensors = r.u32("TRNW config");
  c.classes = r.u32("TRNW config");
  c.tcn_filters = r.u32("TRNW config");
  c.time_steps = r.u32("TRNW config");
  const std::uint32_t nd = r.u32("TRNW config");
  if (nd > 64) throw FormatError("TRNW: implausible dilation count " + std::to_string(nd));
  c.dilations.resize(nd);
  for (auto& d : c.dilations) d = r.u32("TRNW config");

  TinyRadarNN model = build_tinyradarnn(c);
  const std::uint32_t layers = r.u32("TRNW layers");
  if (layers != model.net.size()) {
    throw FormatError("TRNW: " + std::to_string(layers) + " layers stored, configuration builds " +
                      std::to_string(model.net.size()));
  }
  for (std::size_t i = 0; i < layers; ++i) {
    Layer& layer = model.net.layer(i);
    const std::uint32_t kind = r.u32("TRNW layer");
    if (kind != static_cast<std::uint32_t>(layer.spec().kind)) {
      throw FormatError("TRNW: layer " + std::to_string(i) + " kind mismatch");
    }
    auto params = layer.parameters();
    if (r.u32("TRNW layer") != params.size()) {
      throw FormatError("TRNW: layer " + std::to_string(i) + " parameter count mismatch");
    }
    for (Tensor* p : params) {
      const std::uint32_t rank = r.u32("TRNW tensor");
      Shape shape(rank);
      for (auto& d : shape) d = r.u32("TRNW tensor");
      if (shape != p->shape) {
        throw FormatError("TRNW: layer " + std::to_string(i) + " stores " + shape_string(shape) +
                          ", expected " + shape_string(p->shape));
      }
      for (double& v : p->data) v = r.f32("TRNW weights");
    }
  }
  r.expect_end("TRNW");
  return model;
}

void save_model(const std::string& path, const TinyRadarNN& model) {
  bytes::write_file(path, encode_model(model));
}

TinyRadarNN load_model(const std::string& path) { return decode_model(bytes::read_file(path)); }

}  // namespace tinyradar
