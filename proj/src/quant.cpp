#include "tinyradar/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tinyradar/byte_io.hpp"
#include "tinyradar/errors.hpp"

namespace tinyradar {

namespace {

constexpr std::uint32_t kTrq1Version = 1;
constexpr std::int64_t kAccMax = std::numeric_limits<std::int32_t>::max();
constexpr std::int32_t kInputSpan = 255;  // max |x_q - zero_point| for int8

std::int32_t clamp_q(std::int64_t v, std::int32_t lo, std::int32_t hi) {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, lo, hi));
}

std::int8_t requantize(std::int32_t acc, const QuantizedLayer& l) {
  const auto q = static_cast<std::int64_t>(std::round(static_cast<double>(acc) * l.rescale)) +
                 l.output.zero_point;
  std::int32_t v = clamp_q(q, -128, 127);
  if (l.relu) v = std::max(v, l.output.zero_point);
  return static_cast<std::int8_t>(v);
}

std::size_t fan_in(const QuantizedLayer& l) {
  switch (l.kind) {
    case LayerKind::Conv2D:
    case LayerKind::Conv1D: return l.kernel[0] * l.kernel[1] * l.channels_in;
    case LayerKind::CausalConv1D:
    case LayerKind::ResidualBlock: return l.kernel[0] * l.channels_in;
    case LayerKind::Dense: return l.channels_in;
    default: return 0;
  }
}

bool is_weighted(LayerKind k) {
  return k == LayerKind::Conv2D || k == LayerKind::Conv1D || k == LayerKind::CausalConv1D ||
         k == LayerKind::Dense || k == LayerKind::ResidualBlock;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(const Tensor& t) {
    for (double v : t.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
};

// Fills weights/bias/weight params of `q` from float tensors, choosing the
// largest 16-bit limit whose worst-case accumulation fits in 32 bits.
void quantize_weights(QuantizedLayer& q, const Tensor& w, const Tensor& b) {
  double wmax = 0.0, bmax = 0.0;
  for (double v : w.data) wmax = std::max(wmax, std::abs(v));
  for (double v : b.data) bmax = std::max(bmax, std::abs(v));
  const double s_in = q.input.scale;
  const double fan = static_cast<double>(fan_in(q));

  std::int32_t limit = 32767;
  if (wmax > 0.0) {
    const double per_unit = kInputSpan * fan + bmax / (s_in * wmax);
    limit = static_cast<std::int32_t>(
        std::min(32767.0, std::floor(static_cast<double>(kAccMax - 1) / per_unit)));
    if (limit < 127) {
      throw OverflowError("quantize: " + std::string(to_string(q.kind)) + " with fan-in " +
                          std::to_string(fan_in(q)) +
                          " cannot keep 32-bit accumulation with at least 8-bit weights");
    }
  }
  q.weight = weight_params(wmax, limit);
  q.weight_shape = w.shape;
  q.weights.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    q.weights[i] = static_cast<std::int16_t>(q.weight.quantize(w.data[i]));
  }
  const double acc_scale = s_in * q.weight.scale;
  q.bias.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double v = std::round(b.data[i] / acc_scale);
    if (std::abs(v) > static_cast<double>(kAccMax / 2)) {
      throw OverflowError("quantize: bias " + std::to_string(b.data[i]) + " of " +
                          std::string(to_string(q.kind)) + " overflows the accumulator scale");
    }
    q.bias[i] = static_cast<std::int32_t>(v);
  }
  if (worst_case_accumulator(q) > kAccMax) {
    throw OverflowError("quantize: worst-case accumulation of " + std::string(to_string(q.kind)) +
                        " exceeds 32 bits");
  }
}

// ---- integer kernels (x already offset by the input zero point) ----------

void qconv2d(const std::int32_t* x, std::size_t h, std::size_t w, const QuantizedLayer& l,
             std::int32_t* acc_out) {
  const std::size_t kh = l.kernel[0], kw = l.kernel[1];
  const std::size_t cin = l.channels_in, cout = l.channels_out;
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  for (std::ptrdiff_t oh = 0; oh < H; ++oh) {
    for (std::ptrdiff_t ow = 0; ow < W; ++ow) {
      std::int32_t* acc = acc_out + (oh * W + ow) * static_cast<std::ptrdiff_t>(cout);
      std::copy(l.bias.begin(), l.bias.end(), acc);
      for (std::size_t i = 0; i < kh; ++i) {
        const std::ptrdiff_t ih = oh + static_cast<std::ptrdiff_t>(i) - ph;
        if (ih < 0 || ih >= H) continue;
        for (std::size_t j = 0; j < kw; ++j) {
          const std::ptrdiff_t iw = ow + static_cast<std::ptrdiff_t>(j) - pw;
          if (iw < 0 || iw >= W) continue;
          const std::int32_t* in = x + (ih * W + iw) * static_cast<std::ptrdiff_t>(cin);
          const std::int16_t* wk = l.weights.data() + (i * kw + j) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const std::int32_t v = in[ci];
            if (v == 0) continue;
            const std::int16_t* wrow = wk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) acc[co] += v * wrow[co];
          }
        }
      }
    }
  }
}

void qcausal(const std::int32_t* x, std::size_t steps, const QuantizedLayer& l,
             std::int32_t* acc_out) {
  const std::size_t k = l.kernel[0], cin = l.channels_in, cout = l.channels_out;
  for (std::size_t t = 0; t < steps; ++t) {
    std::int32_t* acc = acc_out + t * cout;
    std::copy(l.bias.begin(), l.bias.end(), acc);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t lag = (k - 1 - j) * l.dilation;
      if (lag > t) continue;
      const std::int32_t* in = x + (t - lag) * cin;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const std::int32_t v = in[ci];
        const std::int16_t* wrow = l.weights.data() + (j * cin + ci) * cout;
        for (std::size_t co = 0; co < cout; ++co) acc[co] += v * wrow[co];
      }
    }
  }
}

void qdense(const std::int32_t* x, std::size_t rows, const QuantizedLayer& l,
            std::int32_t* acc_out) {
  const std::size_t n = l.channels_in, m = l.channels_out;
  for (std::size_t r = 0; r < rows; ++r) {
    std::int32_t* acc = acc_out + r * m;
    std::copy(l.bias.begin(), l.bias.end(), acc);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t v = x[r * n + i];
      const std::int16_t* wrow = l.weights.data() + i * m;
      for (std::size_t o = 0; o < m; ++o) acc[o] += v * wrow[o];
    }
  }
}

std::vector<std::int32_t> centred(std::span<const std::int8_t> x, std::int32_t zero_point) {
  std::vector<std::int32_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::int32_t{x[i]} - zero_point;
  return out;
}

}  // namespace

std::int32_t QuantParams::quantize(double v) const {
  const double q = std::round(v / scale) + zero_point;
  return clamp_q(static_cast<std::int64_t>(std::clamp(q, -2e9, 2e9)), qmin(), qmax());
}

QuantParams activation_params(double lo, double hi) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  QuantParams p;
  p.bit_width = 8;
  p.symmetric = false;
  p.q_limit = 127;
  if (!(hi > lo) || !std::isfinite(hi - lo)) {
    p.scale = 1.0;
    p.zero_point = -128;
    return p;
  }
  p.scale = (hi - lo) / 255.0;
  p.zero_point = clamp_q(static_cast<std::int64_t>(std::round(-128.0 - lo / p.scale)), -128, 127);
  return p;
}

QuantParams weight_params(double max_abs, std::int32_t limit) {
  QuantParams p;
  p.bit_width = 16;
  p.symmetric = true;
  p.zero_point = 0;
  limit = std::clamp(limit, 1, 32767);
  if (!(max_abs > 0.0)) {
    p.scale = 1.0;
    p.q_limit = limit;
    return p;
  }
  for (std::int32_t l = limit; l > limit / 2; --l) {
    const double s = max_abs / l;
    if (static_cast<double>(l) * s == max_abs) {
      p.scale = s;
      p.q_limit = l;
      return p;
    }
  }
  p.scale = max_abs / limit;
  p.q_limit = limit;
  return p;
}

std::int64_t worst_case_accumulator(const QuantizedLayer& l) {
  if (!is_weighted(l.kind) || l.channels_out == 0) return 0;
  const std::size_t cout = l.channels_out;
  std::vector<std::int64_t> per_out(cout, 0);
  for (std::size_t i = 0; i < l.weights.size(); ++i) {
    per_out[i % cout] += std::abs(std::int64_t{l.weights[i]});
  }
  std::int64_t worst = 0;
  for (std::size_t co = 0; co < cout; ++co) {
    const std::int64_t b = co < l.bias.size() ? std::abs(std::int64_t{l.bias[co]}) : 0;
    worst = std::max(worst, kInputSpan * per_out[co] + b);
  }
  return worst;
}

QuantizedNetwork calibrate_and_quantize(const TinyRadarNN& model,
                                        std::span<const Tensor> calibration) {
  if (calibration.empty()) {
    throw ValidationError("calibrate_and_quantize: calibration set is empty");
  }
  Network net = model.net;
  const std::size_t n_layers = net.size();
  Range input_range;
  std::vector<Range> ranges(n_layers);
  for (const Tensor& x : calibration) {
    input_range.add(x);
    Tensor cur = x;
    for (std::size_t i = 0; i < n_layers; ++i) {
      cur = net.layer(i).forward(cur);
      ranges[i].add(cur);
    }
  }

  QuantizedNetwork q;
  q.config = model.config;
  q.input = activation_params(input_range.lo, input_range.hi);
  QuantParams current = q.input;

  for (std::size_t i = 0; i < n_layers;) {
    Layer& layer = net.layer(i);
    const LayerSpec spec = layer.spec();
    QuantizedLayer ql;
    ql.kind = spec.kind;
    ql.kernel = spec.kernel;
    ql.channels_in = spec.channels_in;
    ql.channels_out = spec.channels_out;
    ql.dilation = spec.dilation;
    ql.input = current;

    if (spec.kind == LayerKind::MaxPool2D || spec.kind == LayerKind::Flatten) {
      ql.output = current;
      q.layers.push_back(std::move(ql));
      ++i;
      continue;
    }
    if (!is_weighted(spec.kind)) {
      throw ValidationError("calibrate_and_quantize: unsupported standalone " + layer.name() +
                            " at layer " + std::to_string(i));
    }
    const bool fused_relu = spec.kind != LayerKind::ResidualBlock && i + 1 < n_layers &&
                            net.layer(i + 1).spec().kind == LayerKind::ReLU;
    const std::size_t out_idx = fused_relu ? i + 1 : i;
    ql.relu = fused_relu || spec.kind == LayerKind::ResidualBlock;
    const bool last = out_idx + 1 == n_layers;

    auto params = layer.parameters();
    quantize_weights(ql, *params[0], *params[1]);
    if (last) {
      ql.output = QuantParams{};
      ql.rescale = ql.input.scale * ql.weight.scale;  // straight to real-valued logits
    } else {
      ql.output = activation_params(ranges[out_idx].lo, ranges[out_idx].hi);
      ql.rescale = ql.input.scale * ql.weight.scale / ql.output.scale;
    }
    current = ql.output;
    q.layers.push_back(std::move(ql));
    i = out_idx + 1;
  }
  return q;
}

std::vector<std::int8_t> quantize_input(const QuantizedNetwork& qnet, const Tensor& x) {
  std::vector<std::int8_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<std::int8_t>(qnet.input.quantize(x.data[i]));
  }
  return out;
}

Tensor quantized_forward_int8(const QuantizedNetwork& qnet, const Shape& shape,
                              std::span<const std::int8_t> x) {
  const ModelConfig& c = qnet.config;
  if (shape.size() != 4 || shape[1] != c.tw || shape[2] != c.rp || shape[3] != c.sensors ||
      shape_volume(shape) != x.size()) {
    throw ValidationError("quantized_forward: input " + shape_string(shape) +
                          " does not match the model configuration");
  }
  Shape cur_shape = shape;
  std::vector<std::int8_t> cur(x.begin(), x.end());
  Tensor logits;

  for (std::size_t li = 0; li < qnet.layers.size(); ++li) {
    const QuantizedLayer& l = qnet.layers[li];
    const bool last = li + 1 == qnet.layers.size();
    std::vector<std::int32_t> acc;
    Shape out_shape;
    switch (l.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Conv1D: {
        const std::size_t n = cur_shape[0], h = cur_shape[1], w = cur_shape[2];
        out_shape = {n, h, w, l.channels_out};
        const auto xc = centred(cur, l.input.zero_point);
        acc.resize(shape_volume(out_shape));
        const std::size_t in_sz = h * w * l.channels_in, out_sz = h * w * l.channels_out;
        for (std::size_t b = 0; b < n; ++b) {
          qconv2d(xc.data() + b * in_sz, h, w, l, acc.data() + b * out_sz);
        }
        break;
      }
      case LayerKind::MaxPool2D: {
        const std::size_t n = cur_shape[0], h = cur_shape[1], w = cur_shape[2], ch = cur_shape[3];
        const std::size_t kh = l.kernel[0], kw = l.kernel[1];
        out_shape = {n, h / kh, w / kw, ch};
        std::vector<std::int8_t> out(shape_volume(out_shape));
        std::size_t o = 0;
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t oh = 0; oh < h / kh; ++oh) {
            for (std::size_t ow = 0; ow < w / kw; ++ow) {
              for (std::size_t c2 = 0; c2 < ch; ++c2) {
                std::int8_t best = std::numeric_limits<std::int8_t>::min();
                for (std::size_t i = 0; i < kh; ++i) {
                  for (std::size_t j = 0; j < kw; ++j) {
                    best = std::max(best, cur[((b * h + oh * kh + i) * w + ow * kw + j) * ch + c2]);
                  }
                }
                out[o++] = best;
              }
            }
          }
        }
        cur = std::move(out);
        cur_shape = out_shape;
        continue;
      }
      case LayerKind::Flatten:
        cur_shape = {cur_shape[0], shape_volume(cur_shape) / cur_shape[0]};
        continue;
      case LayerKind::CausalConv1D:
      case LayerKind::ResidualBlock: {
        out_shape = {cur_shape[0], l.channels_out};
        const auto xc = centred(cur, l.input.zero_point);
        acc.resize(shape_volume(out_shape));
        qcausal(xc.data(), cur_shape[0], l, acc.data());
        if (l.kind == LayerKind::ResidualBlock) {
          std::vector<std::int8_t> out(acc.size());
          const double acc_scale = l.input.scale * l.weight.scale;
          for (std::size_t i = 0; i < acc.size(); ++i) {
            const double branch = std::max(0.0, static_cast<double>(acc[i]) * acc_scale);
            const double y = static_cast<double>(xc[i]) * l.input.scale + branch;
            const auto q = static_cast<std::int64_t>(std::round(y / l.output.scale)) +
                           l.output.zero_point;
            out[i] = static_cast<std::int8_t>(clamp_q(q, -128, 127));
          }
          cur = std::move(out);
          cur_shape = out_shape;
          continue;
        }
        break;
      }
      case LayerKind::Dense: {
        out_shape = {cur_shape[0], l.channels_out};
        const auto xc = centred(cur, l.input.zero_point);
        acc.resize(shape_volume(out_shape));
        qdense(xc.data(), cur_shape[0], l, acc.data());
        break;
      }
      case LayerKind::ReLU:
        throw ValidationError("quantized_forward: unexpected standalone ReLU");
    }

    if (last) {
      logits = Tensor(out_shape);
      for (std::size_t i = 0; i < acc.size(); ++i) {
        logits.data[i] = static_cast<double>(acc[i]) * l.rescale;
      }
      return logits;
    }
    std::vector<std::int8_t> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = requantize(acc[i], l);
    cur = std::move(out);
    cur_shape = out_shape;
  }
  throw ValidationError("quantized_forward: network has no output layer");
}

Tensor quantized_forward(const QuantizedNetwork& qnet, const Tensor& x) {
  return quantized_forward_int8(qnet, x.shape, quantize_input(qnet, x));
}

Tensor quantized_forward_sequence(const QuantizedNetwork& qnet,
                                  std::span<const FeatureFrame> frames) {
  return quantized_forward(qnet, pack_sequence(qnet.config, frames));
}

std::size_t model_size_bytes(const QuantizedNetwork& qnet) {
  std::size_t bytes = 0;
  for (const QuantizedLayer& l : qnet.layers) {
    bytes += l.weights.size() * static_cast<std::size_t>(l.weight.bit_width / 8);
    bytes += l.bias.size() * sizeof(std::int32_t);
  }
  return bytes;
}

// ---------------------------------------------------------------- TRQ1

namespace {

void write_params(bytes::Writer& w, const QuantParams& p) {
  w.f64(p.scale);
  w.i32(p.zero_point);
  w.u32(static_cast<std::uint32_t>(p.bit_width));
  w.u32(p.symmetric ? 1 : 0);
  w.i32(p.q_limit);
}

QuantParams read_params(bytes::Reader& r) {
  QuantParams p;
  p.scale = r.f64("TRQ1 params");
  p.zero_point = r.i32("TRQ1 params");
  p.bit_width = static_cast<int>(r.u32("TRQ1 params"));
  p.symmetric = r.u32("TRQ1 params") != 0;
  p.q_limit = r.i32("TRQ1 params");
  if (p.bit_width != 8 && p.bit_width != 16) {
    throw FormatError("TRQ1: unsupported bit width " + std::to_string(p.bit_width));
  }
  if (!(p.scale > 0.0)) throw FormatError("TRQ1: non-positive scale");
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_quantized(const QuantizedNetwork& q) {
  const ModelConfig& c = q.config;
  bytes::Writer w;
  w.magic("TRQ1");
  w.u32(kTrq1Version);
  for (std::size_t v : {c.tw, c.rp, c.sensors, c.classes, c.tcn_filters, c.time_steps}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(c.dilations.size()));
  for (std::size_t d : c.dilations) w.u32(static_cast<std::uint32_t>(d));
  write_params(w, q.input);
  w.u32(static_cast<std::uint32_t>(q.layers.size()));
  for (const QuantizedLayer& l : q.layers) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    w.u32(l.relu ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(l.kernel.size()));
    for (std::size_t k : l.kernel) w.u32(static_cast<std::uint32_t>(k));
    w.u32(static_cast<std::uint32_t>(l.channels_in));
    w.u32(static_cast<std::uint32_t>(l.channels_out));
    w.u32(static_cast<std::uint32_t>(l.dilation));
    write_params(w, l.weight);
    write_params(w, l.input);
    write_params(w, l.output);
    w.f64(l.rescale);
    w.u32(static_cast<std::uint32_t>(l.weight_shape.size()));
    for (std::size_t d : l.weight_shape) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(l.weights.size()));
    for (std::int16_t v : l.weights) w.i16(v);
    w.u32(static_cast<std::uint32_t>(l.bias.size()));
    for (std::int32_t v : l.bias) w.i32(v);
  }
  return std::move(w).take();
}

QuantizedNetwork decode_quantized(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  r.expect_magic("TRQ1", "TRQ1");
  const std::uint32_t version = r.u32("TRQ1 header");
  if (version != kTrq1Version) {
    throw FormatError("TRQ1: unsupported version " + std::to_string(version));
  }
  QuantizedNetwork q;
  ModelConfig& c = q.config;
  c.tw = r.u32("TRQ1 config");
  c.rp = r.u32("TRQ1 config");
  c.sensors = r.u32("TRQ1 config");
  c.classes = r.u32("TRQ1 config");
  c.tcn_filters = r.u32("TRQ1 config");
  c.time_steps = r.u32("TRQ1 config");
  const std::uint32_t nd = r.u32("TRQ1 config");
  if (nd > 64) throw FormatError("TRQ1: implausible dilation count");
  c.dilations.resize(nd);
  for (auto& d : c.dilations) d = r.u32("TRQ1 config");
  c.validate();
  q.input = read_params(r);
  const std::uint32_t n = r.u32("TRQ1 layers");
  if (n > 4096) throw FormatError("TRQ1: implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    QuantizedLayer l;
    const std::uint32_t kind = r.u32("TRQ1 layer");
    if (kind < 1 || kind > 8) throw FormatError("TRQ1: unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.relu = r.u32("TRQ1 layer") != 0;
    const std::uint32_t nk = r.u32("TRQ1 layer");
    if (nk > 2) throw FormatError("TRQ1: bad kernel rank");
    l.kernel.resize(nk);
    for (auto& k : l.kernel) k = r.u32("TRQ1 layer");
    l.channels_in = r.u32("TRQ1 layer");
    l.channels_out = r.u32("TRQ1 layer");
    l.dilation = r.u32("TRQ1 layer");
    l.weight = read_params(r);
    l.input = read_params(r);
    l.output = read_params(r);
    l.rescale = r.f64("TRQ1 layer");
    const std::uint32_t rank = r.u32("TRQ1 layer");
    if (rank > 4) throw FormatError("TRQ1: bad weight rank");
    l.weight_shape.resize(rank);
    for (auto& d : l.weight_shape) d = r.u32("TRQ1 layer");
    const std::uint32_t nw = r.u32("TRQ1 weights");
    r.need(std::size_t{nw} * 2, "TRQ1 weights");
    l.weights.resize(nw);
    for (auto& v : l.weights) v = r.i16("TRQ1 weights");
    const std::uint32_t nb = r.u32("TRQ1 bias");
    r.need(std::size_t{nb} * 4, "TRQ1 bias");
    l.bias.resize(nb);
    for (auto& v : l.bias) v = r.i32("TRQ1 bias");
    if (is_weighted(l.kind) && (shape_volume(l.weight_shape) != l.weights.size() ||
                                l.bias.size() != l.channels_out)) {
      throw FormatError("TRQ1: layer " + std::to_string(i) + " weight payload mismatch");
    }
    if (is_weighted(l.kind) && worst_case_accumulator(l) > kAccMax) {
      throw OverflowError("TRQ1: layer " + std::to_string(i) +
                          " could overflow a 32-bit accumulator");
    }
    q.layers.push_back(std::move(l));
  }
  r.expect_end("TRQ1");
  return q;
}

void save_quantized(const std::string& path, const QuantizedNetwork& qnet) {
  bytes::write_file(path, encode_quantized(qnet));
}

QuantizedNetwork load_quantized(const std::string& path) {
  return decode_quantized(bytes::read_file(path));
}

}  // namespace tinyradar
