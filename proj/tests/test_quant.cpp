#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tinyradar/errors.hpp"
#include "tinyradar/memory_plan.hpp"
#include "tinyradar/quant.hpp"

using namespace tinyradar;

namespace {

ModelConfig toy_config() {
  ModelConfig c;
  c.tw = 8;
  c.rp = 32;
  c.sensors = 1;
  c.classes = 5;
  c.tcn_filters = 8;
  return c;
}

Tensor random_input(const ModelConfig& c, std::mt19937_64& rng) {
  Shape s{c.time_steps, c.tw, c.rp, c.sensors};
  const std::size_t n = shape_volume(s);
  return Tensor(s, oracle::random_vector(n, rng, 0.0, 1.0));
}

// Biases start at zero; give them values so the bias path is exercised.
void randomize_biases(TinyRadarNN& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (std::size_t i = 0; i < m.net.size(); ++i) {
    auto p = m.net.layer(i).parameters();
    if (p.size() == 2)
      for (double& b : p[1]->data) b = u(rng);
  }
}

QuantizedNetwork quantize_toy(TinyRadarNN& m, std::uint64_t seed, std::size_t n_calib = 8) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> calib;
  for (std::size_t i = 0; i < n_calib; ++i) calib.push_back(random_input(m.config, rng));
  return calibrate_and_quantize(m, calib);
}

}  // namespace

TEST_SUITE("quant") {
  TEST_CASE("activation params cover the range and include zero") {
    const QuantParams p = activation_params(0.2, 3.0);
    CHECK(p.bit_width == 8);
    CHECK_FALSE(p.symmetric);
    CHECK(p.quantize(0.0) == p.zero_point);
    CHECK(p.dequantize(p.zero_point) == 0.0);
    CHECK(p.zero_point == -128);
    for (double v = 0.0; v <= 3.0; v += 0.01) {
      const std::int32_t q = p.quantize(v);
      CHECK(q >= -128);
      CHECK(q <= 127);
      CHECK(std::abs(p.dequantize(q) - v) <= p.scale / 2 + 1e-12);
    }
    const QuantParams s = activation_params(-1.0, 2.0);
    CHECK(s.scale == doctest::Approx(3.0 / 255.0));
    CHECK(s.dequantize(s.quantize(0.0)) == 0.0);
    const QuantParams flat = activation_params(0.0, 0.0);
    CHECK(flat.scale > 0.0);
  }

  TEST_CASE("quantize then dequantize is idempotent after one pass") {
    const QuantParams p = activation_params(-0.7, 1.3);
    std::mt19937_64 rng(1);
    for (double v : oracle::random_vector(200, rng, -2.0, 2.0)) {
      const double once = p.dequantize(p.quantize(v));
      CHECK(p.dequantize(p.quantize(once)) == once);
    }
  }

  TEST_CASE("weight params") {
    const QuantParams w = weight_params(1.0);
    CHECK(w.symmetric);
    CHECK(w.bit_width == 16);
    for (double v : {-1.0, 0.0, 1.0}) CHECK(w.dequantize(w.quantize(v)) == v);
    // Every reduced limit still dequantizes max_abs exactly.
    for (std::int32_t limit = 127; limit <= 32767; limit += 97) {
      const QuantParams r = weight_params(1.0, limit);
      CHECK(r.q_limit <= limit);
      for (double v : {-1.0, 0.0, 1.0}) CHECK(r.dequantize(r.quantize(v)) == v);
    }
    const QuantParams z = weight_params(0.0);
    CHECK(z.quantize(0.0) == 0);
  }

  TEST_CASE("ternary network weights dequantize exactly") {
    TinyRadarNN m = build_tinyradarnn(toy_config(), 3);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> tri(-1, 1);
    for (Tensor* p : m.net.parameters())
      for (double& v : p->data) v = tri(rng);
    const QuantizedNetwork q = quantize_toy(m, 5, 2);
    std::size_t li = 0;
    for (std::size_t i = 0; i < m.net.size(); ++i) {
      const auto params = m.net.layer(i).parameters();
      if (params.empty()) continue;
      while (q.layers[li].weights.empty()) ++li;
      const QuantizedLayer& ql = q.layers[li++];
      for (std::size_t k = 0; k < params[0]->size(); ++k)
        CHECK(ql.weight.dequantize(ql.weights[k]) == params[0]->data[k]);
    }
  }

  TEST_CASE("weight round trip within half a step, biases in accumulator scale") {
    TinyRadarNN m = build_tinyradarnn(toy_config(), 6);
    randomize_biases(m, 7);
    const QuantizedNetwork q = quantize_toy(m, 8);
    std::size_t li = 0;
    for (std::size_t i = 0; i < m.net.size(); ++i) {
      const auto params = m.net.layer(i).parameters();
      if (params.empty()) continue;
      while (q.layers[li].weights.empty()) ++li;
      const QuantizedLayer& ql = q.layers[li++];
      for (std::size_t k = 0; k < params[0]->size(); ++k)
        CHECK(std::abs(ql.weight.dequantize(ql.weights[k]) - params[0]->data[k]) <=
              ql.weight.scale / 2 * (1 + 1e-12));
      const double acc_scale = ql.input.scale * ql.weight.scale;
      for (std::size_t k = 0; k < params[1]->size(); ++k)
        CHECK(std::abs(ql.bias[k] * acc_scale - params[1]->data[k]) <= acc_scale / 2 * (1 + 1e-9));
      CHECK(worst_case_accumulator(ql) <= std::numeric_limits<std::int32_t>::max());
    }
  }

  TEST_CASE("quantized inference is reproducible and tracks the float path") {
    TinyRadarNN m = build_tinyradarnn(toy_config(), 9);
    randomize_biases(m, 10);
    const QuantizedNetwork q = quantize_toy(m, 11, 16);
    std::mt19937_64 rng(12);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor x = random_input(m.config, rng);
      const Tensor a = quantized_forward(q, x);
      const Tensor b = quantized_forward(q, x);
      CHECK(a.data == b.data);
      const Tensor f = m.net.forward(x);
      double span = 0.0;
      for (double v : f.data) span = std::max(span, std::abs(v));
      for (std::size_t i = 0; i < f.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - f[i]) / std::max(span, 1e-12));
    }
    MESSAGE("max |quantized - float| / max|float| over 10 random inputs: " << worst);
    CHECK(worst < 0.1);
  }

  TEST_CASE("zero input follows the bias path") {
    TinyRadarNN m = build_tinyradarnn(toy_config(), 13);
    randomize_biases(m, 14);
    const QuantizedNetwork q = quantize_toy(m, 15);
    const Tensor x({5, 8, 32, 1});
    const Tensor f = m.net.forward(x);
    const Tensor a = quantized_forward(q, x);
    // Error budget: one output step of every requantizing layer, propagated
    // by at most the layer's weight magnitude; bounded loosely here.
    double step_sum = 0.0;
    for (const QuantizedLayer& l : q.layers)
      if (!l.weights.empty()) step_sum += l.output.scale;
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(a[i] - f[i]) <= 4.0 * step_sum);
  }

  TEST_CASE("quantized path is causal") {
    TinyRadarNN m = build_tinyradarnn(toy_config(), 16);
    const QuantizedNetwork q = quantize_toy(m, 17);
    std::mt19937_64 rng(18);
    Tensor x = random_input(m.config, rng);
    const Tensor a = quantized_forward(q, x);
    for (std::size_t i = 4 * 8 * 32; i < x.size(); ++i) x[i] = 1.0 - x[i];
    const Tensor b = quantized_forward(q, x);
    for (std::size_t i = 0; i < 4 * 5; ++i) CHECK(a[i] == b[i]);
  }

  TEST_CASE("TRQ1 round trip and errors") {
    TinyRadarNN m = build_tinyradarnn(toy_config(), 19);
    const QuantizedNetwork q = quantize_toy(m, 20, 2);
    const auto bytes = encode_quantized(q);
    CHECK(std::memcmp(bytes.data(), "TRQ1", 4) == 0);
    const QuantizedNetwork back = decode_quantized(bytes);
    CHECK(encode_quantized(back) == bytes);
    std::mt19937_64 rng(21);
    const Tensor x = random_input(m.config, rng);
    CHECK(quantized_forward(back, x).data == quantized_forward(q, x).data);
    auto bad = bytes;
    bad[4] = 7;
    CHECK_THROWS_AS(decode_quantized(bad), FormatError);
    bad = bytes;
    bad.pop_back();
    CHECK_THROWS_AS(decode_quantized(bad), LengthError);
  }

  TEST_CASE("calibration errors") {
    TinyRadarNN m = build_tinyradarnn(toy_config(), 22);
    CHECK_THROWS_AS(calibrate_and_quantize(m, {}), ValidationError);
    auto params = m.net.parameters();
    for (double& b : params.back()->data) b = 1e6;
    CHECK_THROWS_AS(quantize_toy(m, 23, 1), OverflowError);
  }

  TEST_CASE("model size") {
    CHECK(model_size_bytes(QuantizedNetwork{}) == 0);
    TinyRadarNN m = build_tinyradarnn(ModelConfig::eleven_gesture(), 1);
    std::mt19937_64 rng(2);
    std::vector<Tensor> calib{random_input(m.config, rng)};
    const QuantizedNetwork q = calibrate_and_quantize(m, calib);
    CHECK(model_size_bytes(q) == 45376u * 2u + 347u * 4u);
    for (const QuantizedLayer& l : q.layers)
      CHECK(worst_case_accumulator(l) <= std::numeric_limits<std::int32_t>::max());
  }
}

TEST_SUITE("memory_plan") {
  TEST_CASE("eleven-gesture plan") {
    const MemoryPlan p = memory_plan(build_tinyradarnn(ModelConfig::eleven_gesture()));
    CHECK(p.peak_bytes == 47168);
    CHECK(p.peak_block == 0);
    REQUIRE(p.blocks.size() >= 3);
    CHECK(p.blocks[0].input_bytes == 31488);
    CHECK(p.blocks[0].output_bytes == 15680);
    CHECK(p.blocks[1].live_bytes == 17504);
    CHECK(p.blocks[2].live_bytes == 1824 + 384);
    std::size_t peak = 0;
    for (const auto& b : p.blocks) peak = std::max(peak, b.live_bytes);
    CHECK(peak == p.peak_bytes);
  }

  TEST_CASE("peak is independent of filters and time steps") {
    for (std::size_t f : {8u, 32u, 128u})
      for (std::size_t t : {1u, 5u, 10u}) {
        ModelConfig c;
        c.tcn_filters = f;
        c.time_steps = t;
        const MemoryPlan p = memory_plan(build_tinyradarnn(c));
        CHECK(p.peak_bytes == 47168);
        CHECK(p.peak_block == 0);
      }
  }

  TEST_CASE("activation width scales bytes") {
    const TinyRadarNN m = build_tinyradarnn(ModelConfig::eleven_gesture());
    CHECK(memory_plan(m, 16).peak_bytes == 2 * 47168);
    CHECK_THROWS_AS(memory_plan(m, 0), ValidationError);
    CHECK_THROWS_AS(memory_plan(m, 12), ValidationError);
  }
}
