#include "cogrl/layers.hpp"

#include <cmath>

#include "cogrl/error.hpp"

namespace cogrl {

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double activate(Activation activation, double z) {
  switch (activation) {
    case Activation::kTanh: return std::tanh(z);
    case Activation::kSigmoid: return sigmoid(z);
    case Activation::kIdentity: return z;
  }
  return z;
}

double activation_slope(Activation activation, double output) {
  switch (activation) {
    case Activation::kTanh: return 1.0 - output * output;
    case Activation::kSigmoid: return output * (1.0 - output);
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

void fill_uniform(Tensor& tensor, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : tensor.values()) v = dist(rng);
}

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride) {
  if (stride == 0) throw ConfigError("convolution stride must be positive");
  if (kernel == 0 || kernel > input) {
    throw DimensionError("kernel size " + std::to_string(kernel) + " exceeds input extent " +
                         std::to_string(input));
  }
  return (input - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

ConvLayer ConvLayer::create(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel_size, std::size_t stride, Rng& rng) {
  if (in_channels == 0 || out_channels == 0 || kernel_size == 0) {
    throw ConfigError("convolution extents must be positive");
  }
  if (stride == 0) throw ConfigError("convolution stride must be positive");
  ConvLayer layer;
  layer.kernels = Tensor({out_channels, in_channels, kernel_size, kernel_size});
  layer.gains = Tensor({out_channels}, 1.0);
  layer.stride = stride;
  const double fan_in = static_cast<double>(in_channels * kernel_size * kernel_size);
  fill_uniform(layer.kernels, 1.0 / std::sqrt(fan_in), rng);
  return layer;
}

std::vector<std::size_t> ConvLayer::output_shape(const std::vector<std::size_t>& input_shape) const {
  if (input_shape.size() != 3 || input_shape[0] != in_channels()) {
    throw DimensionError("convolution expects [" + std::to_string(in_channels()) +
                         " x H x W] input");
  }
  return {out_channels(), conv_output_extent(input_shape[1], kernel_size(), stride),
          conv_output_extent(input_shape[2], kernel_size(), stride)};
}

ConvLayer ConvLayer::zeros_like() const {
  ConvLayer z;
  z.kernels = Tensor(kernels.shape());
  z.gains = Tensor(gains.shape());
  z.stride = stride;
  return z;
}

Tensor flip_kernels(const Tensor& kernels) {
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
    throw DimensionError("kernel bank must be [out x in x R x R]");
  }
  Tensor flipped(kernels.shape());
  const std::size_t r = kernels.dim(2);
  for (std::size_t j = 0; j < kernels.dim(0); ++j)
    for (std::size_t i = 0; i < kernels.dim(1); ++i)
      for (std::size_t p = 0; p < r; ++p)
        for (std::size_t q = 0; q < r; ++q)
          flipped.at(j, i, p, q) = kernels.at(j, i, r - 1 - p, r - 1 - q);
  return flipped;
}

Tensor conv_forward(const ConvLayer& layer, const Tensor& x) {
  Tensor pre;
  return conv_forward(layer, x, pre);
}

Tensor conv_forward(const ConvLayer& layer, const Tensor& x, Tensor& pre_activation) {
  if (layer.gains.size() != layer.out_channels()) {
    throw DimensionError("convolution gains must have one entry per output channel");
  }
  const auto out_shape = layer.output_shape(x.shape());
  const std::size_t out_h = out_shape[1], out_w = out_shape[2];
  const std::size_t r = layer.kernel_size(), s = layer.stride;
  // Cross-correlation with the flipped bank is the same sum as the convolution.
  const Tensor flipped = flip_kernels(layer.kernels);

  pre_activation = Tensor(out_shape);
  for (std::size_t j = 0; j < layer.out_channels(); ++j) {
    for (std::size_t i = 0; i < layer.in_channels(); ++i) {
      for (std::size_t p = 0; p < r; ++p) {
        for (std::size_t q = 0; q < r; ++q) {
          const double k = flipped.at(j, i, p, q);
          for (std::size_t u = 0; u < out_h; ++u) {
            const double* row = x.data() + (i * x.dim(1) + u * s + p) * x.dim(2) + q;
            double* dst = pre_activation.data() + (j * out_h + u) * out_w;
            for (std::size_t v = 0; v < out_w; ++v) dst[v] += k * row[v * s];
          }
        }
      }
    }
  }

  Tensor y(out_shape);
  for (std::size_t j = 0; j < layer.out_channels(); ++j) {
    const double g = layer.gains[j];
    for (std::size_t n = j * out_h * out_w; n < (j + 1) * out_h * out_w; ++n) {
      y[n] = g * std::tanh(pre_activation[n]);
    }
  }
  return y;
}

Tensor conv_backward(const ConvLayer& layer, const Tensor& x, const Tensor& pre_activation,
                     const Tensor& grad_output, ConvLayer& grads) {
  if (!grad_output.same_shape(pre_activation)) {
    throw DimensionError("convolution gradient shape mismatch");
  }
  const std::size_t out_h = pre_activation.dim(1), out_w = pre_activation.dim(2);
  const std::size_t r = layer.kernel_size(), s = layer.stride;

  Tensor grad_pre(pre_activation.shape());
  for (std::size_t j = 0; j < layer.out_channels(); ++j) {
    const double g = layer.gains[j];
    double grad_gain = 0.0;
    for (std::size_t n = j * out_h * out_w; n < (j + 1) * out_h * out_w; ++n) {
      const double t = std::tanh(pre_activation[n]);
      grad_gain += grad_output[n] * t;
      grad_pre[n] = grad_output[n] * g * (1.0 - t * t);
    }
    grads.gains[j] += grad_gain;
  }

  // In convolution index form: output (u,v) sits at input anchor
  // (a,b) = (R-1+u*s, R-1+v*s) and touches x(a-p, b-q) through k(p,q).
  Tensor grad_x(x.shape());
  for (std::size_t j = 0; j < layer.out_channels(); ++j) {
    for (std::size_t i = 0; i < layer.in_channels(); ++i) {
      for (std::size_t p = 0; p < r; ++p) {
        for (std::size_t q = 0; q < r; ++q) {
          const double k = layer.kernels.at(j, i, p, q);
          double grad_k = 0.0;
          for (std::size_t u = 0; u < out_h; ++u) {
            const std::size_t row = r - 1 + u * s - p;
            for (std::size_t v = 0; v < out_w; ++v) {
              const std::size_t col = r - 1 + v * s - q;
              const double d = grad_pre.at(j, u, v);
              grad_k += d * x.at(i, row, col);
              grad_x.at(i, row, col) += d * k;
            }
          }
          grads.kernels.at(j, i, p, q) += grad_k;
        }
      }
    }
  }
  return grad_x;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

DenseLayer DenseLayer::create(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  if (in == 0 || out == 0) throw ConfigError("dense layer extents must be positive");
  DenseLayer layer;
  layer.weights = Tensor({out, in});
  layer.biases = Tensor({out});
  layer.activation = activation;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(layer.weights, bound, rng);
  fill_uniform(layer.biases, bound, rng);
  return layer;
}

DenseLayer DenseLayer::zeros_like() const {
  DenseLayer z;
  z.weights = Tensor(weights.shape());
  z.biases = Tensor(biases.shape());
  z.activation = activation;
  return z;
}

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
  if (layer.biases.size() != layer.out_size()) {
    throw DimensionError("dense layer biases do not match weight rows");
  }
  if (x.size() != layer.in_size()) {
    throw DimensionError("dense layer expects input of length " + std::to_string(layer.in_size()) +
                         ", got " + std::to_string(x.size()));
  }
  const std::size_t n_in = layer.in_size();
  std::vector<double> y(layer.out_size());
  for (std::size_t o = 0; o < y.size(); ++o) {
    const double* w = layer.weights.data() + o * n_in;
    double z = layer.biases[o];
    for (std::size_t k = 0; k < n_in; ++k) z += w[k] * x[k];
    y[o] = activate(layer.activation, z);
  }
  return y;
}

std::vector<double> dense_backward(const DenseLayer& layer, std::span<const double> x,
                                   std::span<const double> output,
                                   std::span<const double> grad_output, DenseLayer& grads) {
  const std::size_t n_in = layer.in_size();
  if (x.size() != n_in || output.size() != layer.out_size() ||
      grad_output.size() != layer.out_size()) {
    throw DimensionError("dense backward shape mismatch");
  }
  std::vector<double> grad_x(n_in, 0.0);
  for (std::size_t o = 0; o < output.size(); ++o) {
    const double dz = grad_output[o] * activation_slope(layer.activation, output[o]);
    if (dz == 0.0) continue;
    grads.biases[o] += dz;
    const double* w = layer.weights.data() + o * n_in;
    double* gw = grads.weights.data() + o * n_in;
    for (std::size_t k = 0; k < n_in; ++k) {
      gw[k] += dz * x[k];
      grad_x[k] += dz * w[k];
    }
  }
  return grad_x;
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

const std::array<const char*, 4>& LSTMCell::input_weight_names() {
  static const std::array<const char*, 4> names{"W_ii", "W_if", "W_ig", "W_io"};
  return names;
}
const std::array<const char*, 4>& LSTMCell::hidden_weight_names() {
  static const std::array<const char*, 4> names{"W_hi", "W_hf", "W_hc", "W_ho"};
  return names;
}
const std::array<const char*, 4>& LSTMCell::input_bias_names() {
  static const std::array<const char*, 4> names{"b_ii", "b_if", "b_ig", "b_io"};
  return names;
}
const std::array<const char*, 4>& LSTMCell::hidden_bias_names() {
  static const std::array<const char*, 4> names{"b_hi", "b_hf", "b_hg", "b_ho"};
  return names;
}

LSTMCell LSTMCell::create(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  if (input_size == 0 || hidden_size == 0) throw ConfigError("LSTM extents must be positive");
  LSTMCell cell;
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(input_size));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (std::size_t gate = 0; gate < 4; ++gate) {
    cell.input_weights[gate] = Tensor({hidden_size, input_size});
    cell.hidden_weights[gate] = Tensor({hidden_size, hidden_size});
    cell.input_biases[gate] = Tensor({hidden_size});
    cell.hidden_biases[gate] = Tensor({hidden_size});
    fill_uniform(cell.input_weights[gate], in_bound, rng);
    fill_uniform(cell.hidden_weights[gate], hid_bound, rng);
    fill_uniform(cell.input_biases[gate], in_bound, rng);
    fill_uniform(cell.hidden_biases[gate], hid_bound, rng);
  }
  return cell;
}

LSTMCell LSTMCell::zeros_like() const {
  LSTMCell z;
  for (std::size_t gate = 0; gate < 4; ++gate) {
    z.input_weights[gate] = Tensor(input_weights[gate].shape());
    z.hidden_weights[gate] = Tensor(hidden_weights[gate].shape());
    z.input_biases[gate] = Tensor(input_biases[gate].shape());
    z.hidden_biases[gate] = Tensor(hidden_biases[gate].shape());
  }
  return z;
}

LSTMStep lstm_step(const LSTMCell& cell, std::span<const double> x, std::span<const double> h_prev,
                   std::span<const double> c_prev) {
  const std::size_t n_in = cell.input_size(), n_hid = cell.hidden_size();
  if (x.size() != n_in || h_prev.size() != n_hid || c_prev.size() != n_hid) {
    throw DimensionError("LSTM step expects x[" + std::to_string(n_in) + "], h/c[" +
                         std::to_string(n_hid) + "]");
  }
  for (std::size_t gate = 0; gate < 4; ++gate) {
    if (cell.input_weights[gate].shape() != std::vector<std::size_t>{n_hid, n_in} ||
        cell.hidden_weights[gate].shape() != std::vector<std::size_t>{n_hid, n_hid} ||
        cell.input_biases[gate].size() != n_hid || cell.hidden_biases[gate].size() != n_hid) {
      throw DimensionError("LSTM cell parameters have inconsistent shapes");
    }
  }

  LSTMStep step;
  step.x.assign(x.begin(), x.end());
  step.h_prev.assign(h_prev.begin(), h_prev.end());
  step.c_prev.assign(c_prev.begin(), c_prev.end());
  for (std::size_t gate = 0; gate < 4; ++gate) {
    auto& out = step.gates[gate];
    out.resize(n_hid);
    const Tensor& wx = cell.input_weights[gate];
    const Tensor& wh = cell.hidden_weights[gate];
    for (std::size_t u = 0; u < n_hid; ++u) {
      double z = cell.input_biases[gate][u] + cell.hidden_biases[gate][u];
      const double* wxr = wx.data() + u * n_in;
      for (std::size_t k = 0; k < n_in; ++k) z += wxr[k] * x[k];
      const double* whr = wh.data() + u * n_hid;
      for (std::size_t k = 0; k < n_hid; ++k) z += whr[k] * h_prev[k];
      out[u] = gate == kCellGate ? std::tanh(z) : sigmoid(z);
    }
  }
  step.c.resize(n_hid);
  step.h.resize(n_hid);
  const auto& [i, f, g, o] = step.gates;
  for (std::size_t u = 0; u < n_hid; ++u) {
    step.c[u] = f[u] * c_prev[u] + i[u] * g[u];
    step.h[u] = o[u] * std::tanh(step.c[u]);
  }
  return step;
}

LSTMStepGrads lstm_step_backward(const LSTMCell& cell, const LSTMStep& step,
                                 std::span<const double> grad_h, std::span<const double> grad_c,
                                 LSTMCell& grads) {
  const std::size_t n_in = cell.input_size(), n_hid = cell.hidden_size();
  const auto& [i, f, g, o] = step.gates;

  // Gradients with respect to each gate's pre-activation.
  std::array<std::vector<double>, 4> dz;
  for (auto& v : dz) v.assign(n_hid, 0.0);
  LSTMStepGrads out;
  out.c_prev.resize(n_hid);
  for (std::size_t u = 0; u < n_hid; ++u) {
    const double tc = std::tanh(step.c[u]);
    const double dc = grad_c[u] + grad_h[u] * o[u] * (1.0 - tc * tc);
    dz[kOutputGate][u] = grad_h[u] * tc * o[u] * (1.0 - o[u]);
    dz[kInputGate][u] = dc * g[u] * i[u] * (1.0 - i[u]);
    dz[kCellGate][u] = dc * i[u] * (1.0 - g[u] * g[u]);
    dz[kForgetGate][u] = dc * step.c_prev[u] * f[u] * (1.0 - f[u]);
    out.c_prev[u] = dc * f[u];
  }

  out.x.assign(n_in, 0.0);
  out.h_prev.assign(n_hid, 0.0);
  for (std::size_t gate = 0; gate < 4; ++gate) {
    const Tensor& wx = cell.input_weights[gate];
    const Tensor& wh = cell.hidden_weights[gate];
    Tensor& gwx = grads.input_weights[gate];
    Tensor& gwh = grads.hidden_weights[gate];
    for (std::size_t u = 0; u < n_hid; ++u) {
      const double d = dz[gate][u];
      if (d == 0.0) continue;
      grads.input_biases[gate][u] += d;
      grads.hidden_biases[gate][u] += d;
      const double* wxr = wx.data() + u * n_in;
      double* gwxr = gwx.data() + u * n_in;
      for (std::size_t k = 0; k < n_in; ++k) {
        gwxr[k] += d * step.x[k];
        out.x[k] += d * wxr[k];
      }
      const double* whr = wh.data() + u * n_hid;
      double* gwhr = gwh.data() + u * n_hid;
      for (std::size_t k = 0; k < n_hid; ++k) {
        gwhr[k] += d * step.h_prev[k];
        out.h_prev[k] += d * whr[k];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

EmbeddingTable EmbeddingTable::create(std::size_t vocab_size, std::size_t dim, Rng& rng) {
  if (vocab_size == 0 || dim == 0) throw ConfigError("embedding extents must be positive");
  EmbeddingTable table;
  table.vectors = Tensor({vocab_size, dim});
  fill_uniform(table.vectors, 1.0, rng);
  return table;
}

std::span<const double> EmbeddingTable::row(std::size_t token) const {
  if (token >= vocab_size()) {
    throw DimensionError("token id " + std::to_string(token) + " outside vocabulary of " +
                         std::to_string(vocab_size()));
  }
  return {vectors.data() + token * dim(), dim()};
}

EmbeddingTable EmbeddingTable::zeros_like() const {
  EmbeddingTable z;
  z.vectors = Tensor(vectors.shape());
  return z;
}

}  // namespace cogrl
