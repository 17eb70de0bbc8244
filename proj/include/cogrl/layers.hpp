#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cogrl/tensor.hpp"

namespace cogrl {

using Rng = std::mt19937_64;

enum class Activation { kTanh, kSigmoid, kIdentity };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

double sigmoid(double z);
double activate(Activation activation, double z);
// Derivative expressed through the activation's output value.
double activation_slope(Activation activation, double output);

// Fills with U(-bound, +bound).
void fill_uniform(Tensor& tensor, double bound, Rng& rng);

// Output extent of a valid (unpadded) convolution sampled at `stride`.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride);

// Convolution layer computing y_j = g_j * tanh(sum_i k_ij * x_i), where `*` is
// true 2-D convolution ((x*k)(a,b) = sum_{p,q} x(a-p, b-q) k(p,q)) evaluated
// on the valid region and sampled every `stride` pixels. No additive bias.
struct ConvLayer {
  Tensor kernels;  // [out_channels x in_channels x R x R]
  Tensor gains;    // [out_channels]
  std::size_t stride = 1;

  static ConvLayer create(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel_size, std::size_t stride, Rng& rng);

  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t kernel_size() const { return kernels.dim(2); }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& input_shape) const;
  ConvLayer zeros_like() const;
};

// Reverses both spatial axes of a [.. x .. x R x R] kernel bank. Convolving
// with k equals cross-correlating with flip_kernels(k).
Tensor flip_kernels(const Tensor& kernels);

Tensor conv_forward(const ConvLayer& layer, const Tensor& x);
// Same as above but also stores the pre-tanh sums for backprop.
Tensor conv_forward(const ConvLayer& layer, const Tensor& x, Tensor& pre_activation);
// Accumulates dL/dkernels and dL/dgains into `grads`. Returns dL/dx.
Tensor conv_backward(const ConvLayer& layer, const Tensor& x, const Tensor& pre_activation,
                     const Tensor& grad_output, ConvLayer& grads);

struct DenseLayer {
  Tensor weights;  // [out x in]
  Tensor biases;   // [out]
  Activation activation = Activation::kIdentity;

  static DenseLayer create(std::size_t in, std::size_t out, Activation activation, Rng& rng);

  std::size_t in_size() const { return weights.dim(1); }
  std::size_t out_size() const { return weights.dim(0); }
  DenseLayer zeros_like() const;
};

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x);
// `output` is the activated output of the forward pass. Accumulates into
// `grads` and returns dL/dx.
std::vector<double> dense_backward(const DenseLayer& layer, std::span<const double> x,
                                   std::span<const double> output,
                                   std::span<const double> grad_output, DenseLayer& grads);

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCellGate = 2, kOutputGate = 3 };

// LSTM cell with separate input-side and hidden-side weights and biases per
// gate:
//   i = sigmoid(W_ii x + b_ii + W_hi h + b_hi)
//   f = sigmoid(W_if x + b_if + W_hf h + b_hf)
//   g = tanh   (W_ig x + b_ig + W_hc h + b_hg)
//   o = sigmoid(W_io x + b_io + W_ho h + b_ho)
//   c' = f*c + i*g,  h' = o*tanh(c')
struct LSTMCell {
  std::array<Tensor, 4> input_weights;   // W_ii, W_if, W_ig, W_io   [hidden x input]
  std::array<Tensor, 4> hidden_weights;  // W_hi, W_hf, W_hc, W_ho   [hidden x hidden]
  std::array<Tensor, 4> input_biases;    // b_ii, b_if, b_ig, b_io
  std::array<Tensor, 4> hidden_biases;   // b_hi, b_hf, b_hg, b_ho

  static LSTMCell create(std::size_t input_size, std::size_t hidden_size, Rng& rng);

  std::size_t input_size() const { return input_weights[0].dim(1); }
  std::size_t hidden_size() const { return input_weights[0].dim(0); }
  LSTMCell zeros_like() const;

  static const std::array<const char*, 4>& input_weight_names();
  static const std::array<const char*, 4>& hidden_weight_names();
  static const std::array<const char*, 4>& input_bias_names();
  static const std::array<const char*, 4>& hidden_bias_names();
};

// Everything one step produces, kept for backprop through time.
struct LSTMStep {
  std::vector<double> x, h_prev, c_prev;
  std::array<std::vector<double>, 4> gates;  // i, f, g, o (post-activation)
  std::vector<double> c, h;
};

LSTMStep lstm_step(const LSTMCell& cell, std::span<const double> x, std::span<const double> h_prev,
                   std::span<const double> c_prev);

struct LSTMStepGrads {
  std::vector<double> x, h_prev, c_prev;
};

// Backprop through one step given dL/dh_t and dL/dc_t (the latter from step
// t+1 only). Accumulates parameter gradients into `grads`.
LSTMStepGrads lstm_step_backward(const LSTMCell& cell, const LSTMStep& step,
                                 std::span<const double> grad_h, std::span<const double> grad_c,
                                 LSTMCell& grads);

struct EmbeddingTable {
  Tensor vectors;  // [vocab_size x dim]

  static EmbeddingTable create(std::size_t vocab_size, std::size_t dim, Rng& rng);

  std::size_t vocab_size() const { return vectors.dim(0); }
  std::size_t dim() const { return vectors.dim(1); }
  std::span<const double> row(std::size_t token) const;
  EmbeddingTable zeros_like() const;
};

}  // namespace cogrl
