#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tinyradar/errors.hpp"
#include "tinyradar/grad_check.hpp"
#include "tinyradar/kernels.hpp"
#include "tinyradar/model.hpp"
#include "tinyradar/network.hpp"
#include "tinyradar/training.hpp"

using namespace tinyradar;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng) {
  const std::size_t n = shape_volume(s);
  return Tensor(std::move(s), oracle::random_vector(n, rng));
}

LayerSpec conv_spec(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout) {
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.kernel = {kh, kw};
  s.channels_in = cin;
  s.channels_out = cout;
  return s;
}

LayerSpec causal_spec(std::size_t k, std::size_t d, std::size_t cin, std::size_t cout) {
  LayerSpec s;
  s.kind = LayerKind::CausalConv1D;
  s.kernel = {k};
  s.dilation = d;
  s.channels_in = cin;
  s.channels_out = cout;
  return s;
}

LossResult half_squared(const Tensor& y) {
  LossResult r;
  r.grad = Tensor(y.shape);
  for (std::size_t i = 0; i < y.size(); ++i) {
    r.loss += 0.5 * y[i] * y[i];
    r.grad[i] = y[i];
  }
  return r;
}

ModelConfig toy_config() {
  ModelConfig c;
  c.tw = 8;
  c.rp = 32;
  c.sensors = 1;
  c.classes = 5;
  c.tcn_filters = 8;
  return c;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv2d matches the naive loop oracle") {
    std::mt19937_64 rng(1);
    for (auto [kh, kw] : {std::pair<std::size_t, std::size_t>{3, 5}, {1, 7}, {1, 1}, {2, 2}}) {
      const Tensor x = random_tensor({5, 7, 2}, rng);
      const Tensor w = random_tensor({kh, kw, 2, 3}, rng);
      const Tensor b = random_tensor({3}, rng);
      const Tensor y = conv2d_forward(x, conv_spec(kh, kw, 2, 3), w, b);
      CHECK(y.shape == Shape{5, 7, 3});
      const auto ref = oracle::conv2d(x.data, 5, 7, 2, w.data, kh, kw, 3, b.data);
      CHECK(oracle::max_abs_diff(y.data, ref) < 1e-12);
    }
  }

  TEST_CASE("conv2d identity and shape errors") {
    std::mt19937_64 rng(2);
    const Tensor x = random_tensor({4, 6, 3}, rng);
    Tensor w({1, 1, 3, 3});
    for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    CHECK(conv2d_forward(x, conv_spec(1, 1, 3, 3), w, Tensor({3})).data == x.data);
    CHECK_THROWS_AS(conv2d_forward(x, conv_spec(1, 1, 2, 3), w, Tensor({3})), ValidationError);
    CHECK_THROWS_AS(conv2d_forward(x, conv_spec(1, 1, 3, 3), w, Tensor({4})), ValidationError);
  }

  TEST_CASE("conv2d output shape of the first CNN layer") {
    const Tensor x({32, 492, 2}, 0.5);
    const Tensor y = conv2d_forward(x, conv_spec(3, 5, 2, 16), Tensor({3, 5, 2, 16}, 0.01),
                                    Tensor({16}));
    CHECK(y.shape == Shape{32, 492, 16});
  }

  TEST_CASE("maxpool matches the oracle and the table shapes") {
    std::mt19937_64 rng(3);
    const Tensor x = random_tensor({7, 11, 2}, rng);
    std::vector<std::uint32_t> argmax;
    const Tensor y = maxpool2d_forward(x, 3, 5, &argmax);
    CHECK(y.shape == Shape{2, 2, 2});
    CHECK(y.data == oracle::maxpool(x.data, 7, 11, 2, 3, 5));
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(x[argmax[i]] == y[i]);

    CHECK(maxpool2d_forward(Tensor({32, 492, 16}), 3, 5).shape == Shape{10, 98, 16});
    CHECK(maxpool2d_forward(Tensor({10, 98, 32}), 3, 5).shape == Shape{3, 19, 32});
    CHECK(maxpool2d_forward(Tensor({3, 19, 64}), 1, 7).shape == Shape{3, 2, 64});
    const Tensor c = maxpool2d_forward(Tensor({6, 10, 1}, 2.5), 3, 5);
    for (double v : c.data) CHECK(v == 2.5);
    CHECK_THROWS_AS(maxpool2d_forward(Tensor({2, 10, 1}), 3, 5), ValidationError);
  }

  TEST_CASE("maxpool ties go to the first index") {
    MaxPool2DLayer pool(2, 2);
    const Tensor x({1, 2, 2, 1}, 1.0);
    pool.forward(x);
    const Tensor gx = pool.backward(Tensor({1, 1, 1, 1}, 1.0), true);
    CHECK(gx.data == std::vector<double>{1.0, 0.0, 0.0, 0.0});
  }

  TEST_CASE("causal conv matches the oracle and respects padding") {
    std::mt19937_64 rng(4);
    for (std::size_t d : {1u, 2u, 4u}) {
      const Tensor x = random_tensor({5, 3}, rng);
      const Tensor w = random_tensor({2, 3, 3}, rng);
      const Tensor b = random_tensor({3}, rng);
      const Tensor y = causal_conv1d_forward(x, causal_spec(2, d, 3, 3), w, b);
      const auto ref = oracle::causal_conv(x.data, 5, 3, w.data, 2, d, 3, b.data);
      CHECK(oracle::max_abs_diff(y.data, ref) < 1e-12);
    }
    // k=2, d=4: steps 0..3 see only the current input; step 4 mixes x(0) and x(4).
    Tensor x({5, 1});
    for (std::size_t t = 0; t < 5; ++t) x[t] = static_cast<double>(t + 1);
    const Tensor w({2, 1, 1}, std::vector<double>{10.0, 1.0});
    const Tensor y = causal_conv1d_forward(x, causal_spec(2, 4, 1, 1), w, Tensor({1}));
    CHECK(y.data == std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0 + 10.0});
    Tensor id({1, 3, 3});
    for (std::size_t i = 0; i < 3; ++i) id[i * 3 + i] = 1.0;
    const Tensor x3 = random_tensor({4, 3}, rng);
    CHECK(causal_conv1d_forward(x3, causal_spec(1, 1, 3, 3), id, Tensor({3})).data == x3.data);
  }

  TEST_CASE("residual block") {
    std::mt19937_64 rng(5);
    LayerSpec spec = causal_spec(2, 2, 4, 4);
    spec.kind = LayerKind::ResidualBlock;
    const Tensor x = random_tensor({5, 4}, rng);
    CHECK(residual_block_forward(x, spec, Tensor({2, 4, 4}), Tensor({4})).data == x.data);
    const Tensor w = random_tensor({2, 4, 4}, rng);
    const Tensor b = random_tensor({4}, rng);
    const Tensor y = residual_block_forward(x, spec, w, b);
    const auto conv = oracle::causal_conv(x.data, 5, 4, w.data, 2, 2, 4, b.data);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(y[i] - x[i] >= 0.0);
      CHECK(y[i] == doctest::Approx(x[i] + std::max(0.0, conv[i])).epsilon(1e-14));
    }
    CHECK_THROWS_AS(residual_block_forward(x, causal_spec(2, 2, 4, 3), w, b), ValidationError);
    ResidualBlockLayer block(32, 2, 1);
    std::size_t n = 0;
    for (Tensor* p : block.parameters()) n += p->size();
    CHECK(n == 2080);
  }

  TEST_CASE("dense by hand") {
    const Tensor x({4}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
    const Tensor w({4, 3}, std::vector<double>{1, 0, 2, 0, 1, 0, -1, 0, 1, 0.5, 0.5, 0.5});
    const Tensor b({3}, std::vector<double>{0.25, -1.0, 0.0});
    const Tensor y = dense_forward(x, w, b);
    CHECK(y.data == std::vector<double>{1 - 3 + 2 + 0.25, 2 + 2 - 1.0, 2 + 3 + 2});
    Tensor id({4, 4});
    for (std::size_t i = 0; i < 4; ++i) id[i * 4 + i] = 1.0;
    CHECK(dense_forward(x, id, Tensor({4})).data == x.data);
    CHECK_THROWS_AS(dense_forward(Tensor({5}), w, b), ValidationError);
    CHECK(dense_forward(Tensor({5, 384}), Tensor({384, 32}), Tensor({32})).shape == Shape{5, 32});
  }

  TEST_CASE("dense backward: grad W is the outer product of x and upstream") {
    DenseLayer d(3, 2);
    std::mt19937_64 rng(6);
    d.initialize(rng);
    d.weights().enable_grad();
    d.bias().enable_grad();
    const Tensor x({1, 3}, std::vector<double>{1.0, -2.0, 0.5});
    d.forward(x);
    const Tensor up({1, 2}, std::vector<double>{3.0, -1.0});
    d.backward(up, true);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(d.weights().grad[i * 2 + j] == x[i] * up[j]);
    CHECK(d.bias().grad == up.data);
  }

  TEST_CASE("backward before forward and zero upstream") {
    TinyRadarNN model = build_tinyradarnn(toy_config(), 3);
    CHECK_THROWS_AS(model.net.backward(Tensor({5, 5})), StateError);
    std::mt19937_64 rng(7);
    const Tensor x = random_tensor({5, 8, 32, 1}, rng);
    model.net.zero_grad();
    model.net.forward(x);
    model.net.backward(Tensor({5, 5}));
    for (const Tensor* p : model.net.parameters())
      for (double g : p->grad) CHECK(g == 0.0);
  }

  TEST_CASE("grad check: linear net with quadratic loss") {
    Network net;
    net.emplace<DenseLayer>(4, 3, false);
    net.initialize(1);
    std::mt19937_64 rng(8);
    const Tensor x = random_tensor({2, 4}, rng);
    const GradCheckReport rep = grad_check(net, x, half_squared);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-8);
  }

  TEST_CASE("grad check flags a sign-flipped backward") {
    Network net;
    net.emplace<DenseLayer>(4, 3, false);
    net.initialize(1);
    std::mt19937_64 rng(9);
    const Tensor x = random_tensor({2, 4}, rng);
    GradCheckOptions opt;
    opt.analytic_hook = [](std::span<Tensor* const> params, Tensor& gx) {
      for (Tensor* p : params)
        for (double& g : p->grad) g = -g;
      for (double& g : gx.data) g = -g;
    };
    const GradCheckReport rep = grad_check(net, x, half_squared, opt);
    CHECK_FALSE(rep.passed);
    CHECK(rep.max_rel_error == doctest::Approx(2.0).epsilon(1e-6));
  }

  TEST_CASE("grad check: toy TinyRadarNN with cross entropy") {
    TinyRadarNN model = build_tinyradarnn(toy_config(), 11);
    std::mt19937_64 rng(12);
    const Tensor x = random_tensor({5, 8, 32, 1}, rng);
    GradCheckOptions opt;
    opt.samples_per_tensor = 20;
    const GradCheckReport rep =
        grad_check(model.net, x, [](const Tensor& y) { return cross_entropy_loss(y, 2); }, opt);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-5);
  }

  TEST_CASE("network copies are deep") {
    TinyRadarNN a = build_tinyradarnn(toy_config(), 1);
    Network copy = a.net;
    copy.parameters()[0]->data[0] += 1.0;
    CHECK(copy.parameters()[0]->data[0] != a.net.parameters()[0]->data[0]);
    CHECK(copy.parameter_count() == a.net.parameter_count());
  }
}
