#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "cogrl/checkpoint.hpp"
#include "cogrl/error.hpp"
#include "cogrl/layers.hpp"
#include "cogrl/loss.hpp"
#include "cogrl/network.hpp"
#include "cogrl/optim.hpp"
#include "oracles.hpp"

using namespace cogrl;

namespace {

ConvLayer random_conv(std::size_t in, std::size_t out, std::size_t r, std::size_t stride, Rng& rng) {
  ConvLayer layer = ConvLayer::create(in, out, r, stride, rng);
  fill_uniform(layer.gains, 1.5, rng);
  return layer;
}

std::vector<double> as_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::unique_ptr<ImageCnn> small_cnn(Rng& rng, std::size_t channels = 2) {
  auto conv = random_conv(channels, 3, 3, 2, rng);
  const std::size_t flat = shape_product(conv.output_shape({channels, 7, 8}));
  return std::make_unique<ImageCnn>(std::vector<std::size_t>{channels, 7, 8}, std::move(conv),
                                    DenseLayer::create(flat, 5, Activation::kSigmoid, rng),
                                    DenseLayer::create(5, 3, Activation::kIdentity, rng));
}

std::unique_ptr<ClozeLstm> small_lstm(Rng& rng, std::size_t vocab = 6) {
  auto embedding = EmbeddingTable::create(vocab, 4, rng);
  fill_uniform(embedding.vectors, 0.8, rng);
  return std::make_unique<ClozeLstm>(std::move(embedding), LSTMCell::create(4, 3, rng),
                                     LSTMCell::create(4, 3, rng),
                                     DenseLayer::create(6, 6, Activation::kTanh, rng),
                                     DenseLayer::create(6, 5, Activation::kSigmoid, rng),
                                     DenseLayer::create(5, 3, Activation::kIdentity, rng));
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
  t[5] = std::nan("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("conv output extents follow floor((H-R)/stride)+1") {
  for (std::size_t h = 1; h <= 20; ++h)
    for (std::size_t r = 1; r <= h; ++r)
      for (std::size_t s = 1; s <= 6; ++s)
        CHECK(conv_output_extent(h, r, s) == (h - r) / s + 1);
  CHECK_THROWS_AS(conv_output_extent(3, 4, 1), DimensionError);
}

TEST_CASE("conv_forward of all-zero input is zero") {
  Rng rng(1);
  auto layer = random_conv(1, 2, 3, 1, rng);
  layer.gains.fill(2.0);
  const Tensor y = conv_forward(layer, Tensor({1, 5, 5}));
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("conv_forward with a flip-origin unit kernel is elementwise tanh") {
  // (x*k)(a,b) = x(a-p, b-q) k(p,q); a unit at p=q=0 returns x(a,b).
  Rng rng(2);
  ConvLayer layer;
  layer.kernels = Tensor({1, 1, 1, 1}, 1.0);
  layer.gains = Tensor({1}, 1.0);
  layer.stride = 1;
  const Tensor x = oracle::random_tensor({1, 4, 6}, rng, -3, 3);
  const Tensor y = conv_forward(layer, x);
  REQUIRE(y.shape() == x.shape());
  for (std::size_t n = 0; n < x.size(); ++n) CHECK(y[n] == doctest::Approx(std::tanh(x[n])).epsilon(1e-15));

  // Larger kernel: a single 1 at (0,0) picks the bottom-right corner of each window.
  layer.kernels = Tensor({1, 1, 3, 3});
  layer.kernels.at(0, 0, 0, 0) = 1.0;
  const Tensor y3 = conv_forward(layer, x);
  REQUIRE(y3.shape() == std::vector<std::size_t>{1, 2, 4});
  for (std::size_t u = 0; u < 2; ++u)
    for (std::size_t v = 0; v < 4; ++v) CHECK(y3.at(0, u, v) == std::tanh(x.at(0, u + 2, v + 2)));
}

TEST_CASE("conv_forward matches direct summation oracle") {
  Rng rng(3);
  const Tensor x = oracle::random_tensor({1, 5, 5}, rng);
  auto layer = random_conv(1, 1, 2, 1, rng);
  const Tensor y = conv_forward(layer, x);
  const Tensor expect = oracle::conv_direct(layer.kernels, as_vector(layer.gains), 1, x);
  REQUIRE(y.shape() == std::vector<std::size_t>{1, 4, 4});
  for (std::size_t n = 0; n < y.size(); ++n) CHECK(std::abs(y[n] - expect[n]) <= 1e-12);
}

TEST_CASE("kernel flip relates convolution and cross-correlation") {
  Rng rng(4);
  const Tensor k = oracle::random_tensor({2, 3, 4, 4}, rng);
  CHECK(flip_kernels(flip_kernels(k)) == k);
  const Tensor f = flip_kernels(k);
  CHECK(f.at(1, 2, 0, 1) == k.at(1, 2, 3, 2));
}

TEST_CASE("conv_forward rejects mismatched inputs") {
  Rng rng(5);
  auto layer = random_conv(2, 1, 3, 1, rng);
  CHECK_THROWS_AS(conv_forward(layer, Tensor({1, 5, 5})), DimensionError);
  CHECK_THROWS_AS(conv_forward(layer, Tensor({2, 2, 5})), DimensionError);
  layer.gains = Tensor({3});
  CHECK_THROWS_AS(conv_forward(layer, Tensor({2, 5, 5})), DimensionError);
}

TEST_CASE("dense_forward examples") {
  Rng rng(6);
  DenseLayer zero;
  zero.weights = Tensor({4, 3});
  zero.biases = Tensor({4});
  zero.activation = Activation::kSigmoid;
  for (double v : dense_forward(zero, std::vector<double>{1, -2, 3})) CHECK(v == 0.5);

  DenseLayer ident;
  ident.weights = Tensor({3, 3});
  for (std::size_t i = 0; i < 3; ++i) ident.weights.at(i, i) = 1.0;
  ident.biases = Tensor({3});
  const std::vector<double> x{0.25, -7.0, 3.5};
  CHECK(dense_forward(ident, x) == x);

  auto layer = DenseLayer::create(3, 2, Activation::kTanh, rng);
  const auto y = dense_forward(layer, x);
  for (std::size_t o = 0; o < 2; ++o) {
    double z = layer.biases[o];
    for (std::size_t k = 0; k < 3; ++k) z += layer.weights.at(o, k) * x[k];
    CHECK(y[o] == doctest::Approx(std::tanh(z)).epsilon(1e-14));
    CHECK(std::abs(y[o]) < 1.0);
  }
  CHECK_THROWS_AS(dense_forward(layer, std::vector<double>{1, 2}), DimensionError);
}

TEST_CASE("single linear weight gradient matches closed form") {
  // loss = (w x - t)^2 / 2, so dL/dy = (w x - t) and dL/dw = x (w x - t).
  DenseLayer layer;
  layer.weights = Tensor({1, 1}, 0.7);
  layer.biases = Tensor({1});
  const double x = 1.3, t = -0.4;
  const auto y = dense_forward(layer, std::vector<double>{x});
  DenseLayer grads = layer.zeros_like();
  dense_backward(layer, std::vector<double>{x}, y, std::vector<double>{y[0] - t}, grads);
  CHECK(grads.weights[0] == doctest::Approx(x * (0.7 * x - t)).epsilon(1e-15));
}

TEST_CASE("lstm_step analytic cases") {
  Rng rng(7);
  LSTMCell cell = LSTMCell::create(3, 4, rng).zeros_like();
  const std::vector<double> x{0.3, -1.0, 2.0}, zero(4, 0.0);
  auto s = lstm_step(cell, x, zero, zero);
  for (std::size_t u = 0; u < 4; ++u) {
    CHECK(s.h[u] == 0.0);
    CHECK(s.c[u] == 0.0);
  }
  const std::vector<double> c{1.0, -2.0, 0.5, 3.0};
  s = lstm_step(cell, x, zero, c);
  for (std::size_t u = 0; u < 4; ++u) {
    CHECK(s.c[u] == doctest::Approx(0.5 * c[u]));
    CHECK(s.h[u] == doctest::Approx(0.5 * std::tanh(0.5 * c[u])));
  }
  CHECK_THROWS_AS(lstm_step(cell, std::vector<double>{1, 2}, zero, zero), DimensionError);
}

TEST_CASE("lstm_step matches scalar equation oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    LSTMCell cell = LSTMCell::create(5, 4, rng);
    const auto x = as_vector(oracle::random_tensor({5}, rng));
    const auto h = as_vector(oracle::random_tensor({4}, rng));
    const auto c = as_vector(oracle::random_tensor({4}, rng, -2, 2));
    const auto got = lstm_step(cell, x, h, c);
    const auto want = oracle::lstm_direct(cell, x, h, c);
    for (std::size_t u = 0; u < 4; ++u) {
      CHECK(std::abs(got.h[u] - want.h[u]) <= 1e-12);
      CHECK(std::abs(got.c[u] - want.c[u]) <= 1e-12);
      for (std::size_t g = 0; g < 4; ++g) {
        CHECK(got.gates[g][u] > (g == kCellGate ? -1.0 : 0.0));
        CHECK(got.gates[g][u] < 1.0);
      }
      CHECK(std::abs(got.c[u]) <= std::abs(c[u]) + 1.0);
    }
  }
}

TEST_CASE("softmax cross-entropy examples") {
  const std::vector<double> zeros{0.0, 0.0};
  const auto ce = softmax_cross_entropy(zeros, 1);
  CHECK(ce.probs[0] == doctest::Approx(0.5));
  CHECK(ce.loss == doctest::Approx(std::log(2.0)));
  const auto sat = softmax_cross_entropy(std::vector<double>{800.0, -800.0}, 0);
  CHECK(sat.loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(sat.loss));
  CHECK_THROWS_AS(softmax_cross_entropy(zeros, 2), ConfigError);
}

TEST_CASE("forward_loss matches log-sum-exp oracle on a random net") {
  Rng rng(9);
  DenseNet net({DenseLayer::create(4, 6, Activation::kTanh, rng),
                DenseLayer::create(6, 3, Activation::kIdentity, rng)},
               std::nullopt);
  const Tensor x = oracle::random_tensor({4}, rng);
  const auto logits = net.forward(x).logits;
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z);
  for (std::size_t label = 0; label < 3; ++label) {
    const auto r = forward_loss(net, x, label);
    CHECK(r.loss == doctest::Approx(std::log(sum) - logits[label]).epsilon(1e-13));
    CHECK(std::accumulate(r.probs.begin(), r.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.loss >= 0.0);
  }
  CHECK_THROWS_AS(forward_loss(net, x, 3), ConfigError);
}

TEST_CASE("forward pass reports the layer that went non-finite") {
  Rng rng(10);
  auto net = small_cnn(rng);
  net->representation_layer().weights[0] = std::numeric_limits<double>::quiet_NaN();
  const Tensor x = oracle::random_tensor({2, 7, 8}, rng);
  try {
    net->forward(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("representation") != std::string::npos);
  }
}

TEST_CASE("zero input through conv gives zero kernel gradients") {
  Rng rng(11);
  auto net = small_cnn(rng);
  std::vector<Sample> batch{{Tensor({2, 7, 8}), 1}};
  const auto grads = backprop_grads(*net, batch);
  auto& g = dynamic_cast<ImageCnn&>(*grads.values);
  for (double v : g.conv().kernels.values()) CHECK(v == 0.0);
}

TEST_CASE("grad_check on a linear softmax net") {
  Rng rng(12);
  DenseNet net({DenseLayer::create(5, 3, Activation::kIdentity, rng)}, std::nullopt);
  std::vector<Sample> batch;
  for (int k = 0; k < 4; ++k) batch.push_back({oracle::random_tensor({5}, rng), std::size_t(k % 3)});
  const auto report = grad_check(net, batch, 1e-5);
  CHECK(report.checked == 18);
  CHECK(report.max_relative_error < 1e-8);
}

TEST_CASE("grad_check on small CNN and LSTM networks") {
  Rng rng(13);
  auto cnn = small_cnn(rng);
  std::vector<Sample> images;
  for (int k = 0; k < 3; ++k) images.push_back({oracle::random_tensor({2, 7, 8}, rng, 0, 1), std::size_t(k)});
  const auto cnn_report = grad_check(*cnn, images, 1e-5);
  INFO(cnn_report.worst_parameter, " ", cnn_report.analytic, " vs ", cnn_report.numeric);
  CHECK(cnn_report.max_relative_error < 1e-4);

  auto lstm = small_lstm(rng);
  std::vector<Sample> texts{{ClozeTokens{{1, 2, 3}, {4, 5}}, 0},
                            {ClozeTokens{{}, {2, 2, 1, 0}}, 2},
                            {ClozeTokens{{5, 0}, {}}, 1}};
  const auto lstm_report = grad_check(*lstm, texts, 1e-5);
  INFO(lstm_report.worst_parameter, " ", lstm_report.analytic, " vs ", lstm_report.numeric);
  CHECK(lstm_report.max_relative_error < 1e-4);
}

TEST_CASE("cloze network with empty prefix uses a zero forward state") {
  Rng rng(14);
  auto net = small_lstm(rng);
  const auto a = net->forward(ClozeTokens{{}, {1, 2}});
  // A zero forward state equals an input whose forward contribution is
  // cancelled: compare against the combine layer evaluated by hand.
  std::vector<double> h(3, 0.0), c(3, 0.0);
  for (std::size_t token : {2UL, 1UL}) {
    auto s = lstm_step(net->backward_cell(), net->embedding().row(token), h, c);
    h = s.h;
    c = s.c;
  }
  std::vector<double> concat(3, 0.0);
  concat.insert(concat.end(), h.begin(), h.end());
  const auto rep = dense_forward(net->representation_layer(), dense_forward(net->combine_layer(), concat));
  const auto logits = dense_forward(net->output_layer(), rep);
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.logits[k] == doctest::Approx(logits[k]).epsilon(1e-14));
  CHECK(a.representation.size() == 5);
}

TEST_CASE("sgd_update arithmetic") {
  Rng rng(15);
  DenseNet net({DenseLayer::create(1, 1, Activation::kIdentity, rng)}, std::nullopt);
  net.layers()[0].weights[0] = 1.0;
  auto grads = net.zeros_like();
  const auto before = net.layers()[0].biases[0];
  sgd_update(net, *grads, 0.1);
  CHECK(net.layers()[0].weights[0] == 1.0);
  CHECK(net.layers()[0].biases[0] == before);
  dynamic_cast<DenseNet&>(*grads).layers()[0].weights[0] = 0.5;
  sgd_update(net, *grads, 0.1);
  CHECK(net.layers()[0].weights[0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("checkpoint round-trips every architecture exactly") {
  Rng rng(16);
  std::vector<std::unique_ptr<Network>> nets;
  nets.push_back(small_cnn(rng));
  nets.push_back(small_lstm(rng));
  nets.push_back(std::make_unique<DenseNet>(
      std::vector<DenseLayer>{DenseLayer::create(3, 4, Activation::kSigmoid, rng),
                              DenseLayer::create(4, 2, Activation::kIdentity, rng)},
      0));
  for (const auto& net : nets) {
    std::stringstream buffer;
    write_checkpoint(*net, {{"labels", "a an the"}}, buffer);
    const auto loaded = read_checkpoint(buffer);
    CHECK(loaded.meta.at("labels") == "a an the");
    CHECK(loaded.network->architecture() == net->architecture());
    const auto want = net->parameter_views();
    const auto got = loaded.network->parameter_views();
    REQUIRE(want.size() == got.size());
    for (std::size_t k = 0; k < want.size(); ++k) CHECK(*want[k].second == *got[k].second);
  }
  std::stringstream bad("cogrl-checkpoint 7\n");
  CHECK_THROWS_AS(read_checkpoint(bad), InputError);
}
