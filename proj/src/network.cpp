#include "cogrl/network.hpp"

#include <cmath>

#include "cogrl/error.hpp"
#include "cogrl/loss.hpp"

namespace cogrl {

namespace {

void add_dense_params(std::vector<ParamRef>& out, const std::string& prefix, DenseLayer& layer) {
  out.push_back({prefix + ".weights", &layer.weights});
  out.push_back({prefix + ".biases", &layer.biases});
}

void add_lstm_params(std::vector<ParamRef>& out, const std::string& prefix, LSTMCell& cell) {
  for (std::size_t g = 0; g < 4; ++g)
    out.push_back({prefix + "." + LSTMCell::input_weight_names()[g], &cell.input_weights[g]});
  for (std::size_t g = 0; g < 4; ++g)
    out.push_back({prefix + "." + LSTMCell::hidden_weight_names()[g], &cell.hidden_weights[g]});
  for (std::size_t g = 0; g < 4; ++g)
    out.push_back({prefix + "." + LSTMCell::input_bias_names()[g], &cell.input_biases[g]});
  for (std::size_t g = 0; g < 4; ++g)
    out.push_back({prefix + "." + LSTMCell::hidden_bias_names()[g], &cell.hidden_biases[g]});
}

template <typename T>
T& same_type(Network& grads) {
  auto* typed = dynamic_cast<T*>(&grads);
  if (typed == nullptr) throw ConfigError("gradient container has a different architecture");
  return *typed;
}

std::size_t parse_size(const NetworkConfig& config, const std::string& key) {
  const auto it = config.find(key);
  if (it == config.end()) throw ConfigError("network config is missing '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw ConfigError("network config '" + key + "' is not a size: " + it->second);
  }
}

DenseLayer zero_dense(std::size_t in, std::size_t out, Activation activation) {
  DenseLayer layer;
  layer.weights = Tensor({out, in});
  layer.biases = Tensor({out});
  layer.activation = activation;
  return layer;
}

LSTMCell zero_lstm(std::size_t in, std::size_t hidden) {
  LSTMCell cell;
  for (std::size_t g = 0; g < 4; ++g) {
    cell.input_weights[g] = Tensor({hidden, in});
    cell.hidden_weights[g] = Tensor({hidden, hidden});
    cell.input_biases[g] = Tensor({hidden});
    cell.hidden_biases[g] = Tensor({hidden});
  }
  return cell;
}

}  // namespace

void require_finite(std::span<const double> values, const std::string& layer) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite activations in layer '" + layer + "'");
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, tensor] : parameter_views()) n += tensor->size();
  return n;
}

std::vector<std::pair<std::string, const Tensor*>> Network::parameter_views() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& ref : const_cast<Network*>(this)->parameters()) {
    out.emplace_back(ref.name, ref.tensor);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DenseNet
// ---------------------------------------------------------------------------

DenseNet::DenseNet(std::vector<DenseLayer> layers, std::optional<std::size_t> representation_layer)
    : layers_(std::move(layers)), representation_layer_(representation_layer) {
  if (layers_.empty()) throw ConfigError("dense network needs at least one layer");
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l].in_size() != layers_[l - 1].out_size()) {
      throw DimensionError("dense layer " + std::to_string(l) + " input does not match previous output");
    }
  }
  if (representation_layer_ && *representation_layer_ + 1 >= layers_.size()) {
    throw ConfigError("representation layer must precede the output layer");
  }
}

NetworkConfig DenseNet::config() const {
  NetworkConfig c;
  c["layers"] = std::to_string(layers_.size());
  c["input"] = std::to_string(layers_.front().in_size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    c["layer" + std::to_string(l) + ".out"] = std::to_string(layers_[l].out_size());
    c["layer" + std::to_string(l) + ".activation"] = to_string(layers_[l].activation);
  }
  if (representation_layer_) c["representation_layer"] = std::to_string(*representation_layer_);
  return c;
}

std::unique_ptr<Network> DenseNet::clone() const { return std::make_unique<DenseNet>(*this); }

std::unique_ptr<Network> DenseNet::zeros_like() const {
  std::vector<DenseLayer> z;
  for (const auto& layer : layers_) z.push_back(layer.zeros_like());
  return std::make_unique<DenseNet>(std::move(z), representation_layer_);
}

std::vector<ParamRef> DenseNet::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    add_dense_params(out, "dense" + std::to_string(l), layers_[l]);
  }
  return out;
}

std::size_t DenseNet::representation_size() const {
  return representation_layer_ ? layers_[*representation_layer_].out_size() : 0;
}

ForwardResult DenseNet::forward(const NetworkInput& input) const {
  const auto* x = std::get_if<Tensor>(&input);
  if (x == nullptr) throw DimensionError("dense network expects a tensor input");
  ForwardResult result;
  std::vector<double> a(x->values().begin(), x->values().end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    a = dense_forward(layers_[l], a);
    require_finite(a, "dense" + std::to_string(l));
    if (representation_layer_ && *representation_layer_ == l) result.representation = a;
  }
  result.logits = std::move(a);
  return result;
}

double DenseNet::accumulate_gradients(const NetworkInput& input, std::size_t label, double scale,
                                      Network& grads) const {
  auto& g = same_type<DenseNet>(grads);
  const auto* x = std::get_if<Tensor>(&input);
  if (x == nullptr) throw DimensionError("dense network expects a tensor input");
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x->values().begin(), x->values().end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    acts.push_back(dense_forward(layers_[l], acts.back()));
    require_finite(acts.back(), "dense" + std::to_string(l));
  }
  auto ce = softmax_cross_entropy(acts.back(), label);
  std::vector<double> delta = ce.grad_logits;
  for (double& d : delta) d *= scale;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    delta = dense_backward(layers_[l], acts[l], acts[l + 1], delta, g.layers_[l]);
  }
  return ce.loss;
}

// ---------------------------------------------------------------------------
// ImageCnn
// ---------------------------------------------------------------------------

ImageCnn::ImageCnn(std::vector<std::size_t> input_shape, ConvLayer conv, DenseLayer representation,
                   DenseLayer output)
    : input_shape_(std::move(input_shape)),
      conv_(std::move(conv)),
      representation_(std::move(representation)),
      output_(std::move(output)) {
  const auto conv_shape = conv_.output_shape(input_shape_);
  if (representation_.in_size() != shape_product(conv_shape)) {
    throw DimensionError("representation layer input " + std::to_string(representation_.in_size()) +
                         " does not match flattened conv output " +
                         std::to_string(shape_product(conv_shape)));
  }
  if (output_.in_size() != representation_.out_size()) {
    throw DimensionError("output layer input does not match representation size");
  }
}

std::vector<std::size_t> ImageCnn::conv_output_shape() const {
  return conv_.output_shape(input_shape_);
}

NetworkConfig ImageCnn::config() const {
  return {{"channels", std::to_string(input_shape_[0])},
          {"height", std::to_string(input_shape_[1])},
          {"width", std::to_string(input_shape_[2])},
          {"filters", std::to_string(conv_.out_channels())},
          {"kernel", std::to_string(conv_.kernel_size())},
          {"stride", std::to_string(conv_.stride)},
          {"rep_size", std::to_string(representation_.out_size())},
          {"classes", std::to_string(output_.out_size())}};
}

std::unique_ptr<Network> ImageCnn::clone() const { return std::make_unique<ImageCnn>(*this); }

std::unique_ptr<Network> ImageCnn::zeros_like() const {
  return std::make_unique<ImageCnn>(input_shape_, conv_.zeros_like(), representation_.zeros_like(),
                                    output_.zeros_like());
}

std::vector<ParamRef> ImageCnn::parameters() {
  std::vector<ParamRef> out{{"conv.kernels", &conv_.kernels}, {"conv.gains", &conv_.gains}};
  add_dense_params(out, "representation", representation_);
  add_dense_params(out, "output", output_);
  return out;
}

const Tensor& ImageCnn::image_of(const NetworkInput& input) const {
  const auto* x = std::get_if<Tensor>(&input);
  if (x == nullptr) throw DimensionError("image network expects a tensor input");
  if (x->shape() != input_shape_) {
    throw DimensionError("image of shape " + x->shape_string() + " does not match network input");
  }
  return *x;
}

ForwardResult ImageCnn::forward(const NetworkInput& input) const {
  const Tensor& x = image_of(input);
  const Tensor conv_out = conv_forward(conv_, x);
  require_finite(conv_out.values(), "conv");
  ForwardResult result;
  result.representation = dense_forward(representation_, conv_out.values());
  require_finite(result.representation, "representation");
  result.logits = dense_forward(output_, result.representation);
  require_finite(result.logits, "output");
  return result;
}

double ImageCnn::accumulate_gradients(const NetworkInput& input, std::size_t label, double scale,
                                      Network& grads) const {
  auto& g = same_type<ImageCnn>(grads);
  const Tensor& x = image_of(input);
  Tensor pre;
  const Tensor conv_out = conv_forward(conv_, x, pre);
  require_finite(conv_out.values(), "conv");
  const auto rep = dense_forward(representation_, conv_out.values());
  require_finite(rep, "representation");
  const auto logits = dense_forward(output_, rep);
  require_finite(logits, "output");

  auto ce = softmax_cross_entropy(logits, label);
  for (double& d : ce.grad_logits) d *= scale;
  const auto d_rep = dense_backward(output_, rep, logits, ce.grad_logits, g.output_);
  const auto d_conv = dense_backward(representation_, conv_out.values(), rep, d_rep, g.representation_);
  conv_backward(conv_, x, pre, Tensor(conv_out.shape(), d_conv), g.conv_);
  return ce.loss;
}

// ---------------------------------------------------------------------------
// ClozeLstm
// ---------------------------------------------------------------------------

struct ClozeLstm::Trace {
  std::vector<LSTMStep> forward_steps;
  std::vector<LSTMStep> backward_steps;
  std::vector<std::size_t> forward_tokens;   // in processing order
  std::vector<std::size_t> backward_tokens;  // in processing order (reversed suffix)
  std::vector<double> concat, combined, representation, logits;
};

ClozeLstm::ClozeLstm(EmbeddingTable embedding, LSTMCell forward_cell, LSTMCell backward_cell,
                     DenseLayer combine, DenseLayer representation, DenseLayer output)
    : embedding_(std::move(embedding)),
      forward_cell_(std::move(forward_cell)),
      backward_cell_(std::move(backward_cell)),
      combine_(std::move(combine)),
      representation_(std::move(representation)),
      output_(std::move(output)) {
  if (forward_cell_.input_size() != embedding_.dim() || backward_cell_.input_size() != embedding_.dim()) {
    throw DimensionError("LSTM input size must equal embedding dimension");
  }
  if (combine_.in_size() != forward_cell_.hidden_size() + backward_cell_.hidden_size()) {
    throw DimensionError("combine layer input must equal the concatenated hidden sizes");
  }
  if (representation_.in_size() != combine_.out_size() || output_.in_size() != representation_.out_size()) {
    throw DimensionError("cloze network dense layers are not chained consistently");
  }
}

NetworkConfig ClozeLstm::config() const {
  return {{"vocab_size", std::to_string(embedding_.vocab_size())},
          {"embedding_dim", std::to_string(embedding_.dim())},
          {"lstm_hidden", std::to_string(forward_cell_.hidden_size())},
          {"combine_size", std::to_string(combine_.out_size())},
          {"rep_size", std::to_string(representation_.out_size())},
          {"classes", std::to_string(output_.out_size())}};
}

std::unique_ptr<Network> ClozeLstm::clone() const { return std::make_unique<ClozeLstm>(*this); }

std::unique_ptr<Network> ClozeLstm::zeros_like() const {
  return std::make_unique<ClozeLstm>(embedding_.zeros_like(), forward_cell_.zeros_like(),
                                     backward_cell_.zeros_like(), combine_.zeros_like(),
                                     representation_.zeros_like(), output_.zeros_like());
}

std::vector<ParamRef> ClozeLstm::parameters() {
  std::vector<ParamRef> out{{"embedding.vectors", &embedding_.vectors}};
  add_lstm_params(out, "lstm_forward", forward_cell_);
  add_lstm_params(out, "lstm_backward", backward_cell_);
  add_dense_params(out, "combine", combine_);
  add_dense_params(out, "representation", representation_);
  add_dense_params(out, "output", output_);
  return out;
}

ClozeLstm::Trace ClozeLstm::run(const ClozeTokens& tokens) const {
  Trace trace;
  trace.forward_tokens = tokens.prefix;
  trace.backward_tokens.assign(tokens.suffix.rbegin(), tokens.suffix.rend());

  auto unroll = [this](const LSTMCell& cell, const std::vector<std::size_t>& seq,
                       std::vector<LSTMStep>& steps, const char* name) {
    std::vector<double> h(cell.hidden_size(), 0.0), c(cell.hidden_size(), 0.0);
    steps.reserve(seq.size());
    for (std::size_t token : seq) {
      steps.push_back(lstm_step(cell, embedding_.row(token), h, c));
      h = steps.back().h;
      c = steps.back().c;
      require_finite(c, name);
    }
    return h;
  };
  const auto h_fwd = unroll(forward_cell_, trace.forward_tokens, trace.forward_steps, "lstm_forward");
  const auto h_bwd = unroll(backward_cell_, trace.backward_tokens, trace.backward_steps, "lstm_backward");

  trace.concat = h_fwd;
  trace.concat.insert(trace.concat.end(), h_bwd.begin(), h_bwd.end());
  trace.combined = dense_forward(combine_, trace.concat);
  require_finite(trace.combined, "combine");
  trace.representation = dense_forward(representation_, trace.combined);
  require_finite(trace.representation, "representation");
  trace.logits = dense_forward(output_, trace.representation);
  require_finite(trace.logits, "output");
  return trace;
}

ForwardResult ClozeLstm::forward(const NetworkInput& input) const {
  const auto* tokens = std::get_if<ClozeTokens>(&input);
  if (tokens == nullptr) throw DimensionError("cloze network expects tokenized text input");
  auto trace = run(*tokens);
  return {std::move(trace.logits), std::move(trace.representation)};
}

double ClozeLstm::accumulate_gradients(const NetworkInput& input, std::size_t label, double scale,
                                       Network& grads) const {
  auto& g = same_type<ClozeLstm>(grads);
  const auto* tokens = std::get_if<ClozeTokens>(&input);
  if (tokens == nullptr) throw DimensionError("cloze network expects tokenized text input");
  const Trace trace = run(*tokens);

  auto ce = softmax_cross_entropy(trace.logits, label);
  for (double& d : ce.grad_logits) d *= scale;
  const auto d_rep = dense_backward(output_, trace.representation, trace.logits, ce.grad_logits, g.output_);
  const auto d_comb = dense_backward(representation_, trace.combined, trace.representation, d_rep,
                                     g.representation_);
  const auto d_concat = dense_backward(combine_, trace.concat, trace.combined, d_comb, g.combine_);

  auto through_time = [this, &g](const LSTMCell& cell, LSTMCell& cell_grads,
                                 const std::vector<LSTMStep>& steps,
                                 const std::vector<std::size_t>& seq, std::vector<double> dh) {
    std::vector<double> dc(cell.hidden_size(), 0.0);
    for (std::size_t t = steps.size(); t-- > 0;) {
      auto step_grads = lstm_step_backward(cell, steps[t], dh, dc, cell_grads);
      double* row = g.embedding_.vectors.data() + seq[t] * embedding_.dim();
      for (std::size_t k = 0; k < embedding_.dim(); ++k) row[k] += step_grads.x[k];
      dh = std::move(step_grads.h_prev);
      dc = std::move(step_grads.c_prev);
    }
  };
  const std::size_t n_fwd = forward_cell_.hidden_size();
  through_time(forward_cell_, g.forward_cell_, trace.forward_steps, trace.forward_tokens,
               std::vector<double>(d_concat.begin(), d_concat.begin() + n_fwd));
  through_time(backward_cell_, g.backward_cell_, trace.backward_steps, trace.backward_tokens,
               std::vector<double>(d_concat.begin() + n_fwd, d_concat.end()));
  return ce.loss;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Network> make_network_skeleton(const std::string& architecture,
                                               const NetworkConfig& config) {
  if (architecture == "image_cnn") {
    const std::size_t channels = parse_size(config, "channels");
    const std::size_t height = parse_size(config, "height");
    const std::size_t width = parse_size(config, "width");
    const std::size_t filters = parse_size(config, "filters");
    const std::size_t kernel = parse_size(config, "kernel");
    const std::size_t stride = parse_size(config, "stride");
    const std::size_t rep = parse_size(config, "rep_size");
    const std::size_t classes = parse_size(config, "classes");
    ConvLayer conv;
    conv.kernels = Tensor({filters, channels, kernel, kernel});
    conv.gains = Tensor({filters});
    conv.stride = stride;
    const std::size_t flat = shape_product(conv.output_shape({channels, height, width}));
    return std::make_unique<ImageCnn>(std::vector<std::size_t>{channels, height, width}, std::move(conv),
                                      zero_dense(flat, rep, Activation::kSigmoid),
                                      zero_dense(rep, classes, Activation::kIdentity));
  }
  if (architecture == "cloze_lstm") {
    const std::size_t vocab = parse_size(config, "vocab_size");
    const std::size_t dim = parse_size(config, "embedding_dim");
    const std::size_t hidden = parse_size(config, "lstm_hidden");
    const std::size_t combine = parse_size(config, "combine_size");
    const std::size_t rep = parse_size(config, "rep_size");
    const std::size_t classes = parse_size(config, "classes");
    EmbeddingTable embedding;
    embedding.vectors = Tensor({vocab, dim});
    return std::make_unique<ClozeLstm>(std::move(embedding), zero_lstm(dim, hidden), zero_lstm(dim, hidden),
                                       zero_dense(2 * hidden, combine, Activation::kTanh),
                                       zero_dense(combine, rep, Activation::kSigmoid),
                                       zero_dense(rep, classes, Activation::kIdentity));
  }
  if (architecture == "dense") {
    const std::size_t n_layers = parse_size(config, "layers");
    std::size_t in = parse_size(config, "input");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const std::string prefix = "layer" + std::to_string(l);
      const std::size_t out = parse_size(config, prefix + ".out");
      const auto it = config.find(prefix + ".activation");
      if (it == config.end()) throw ConfigError("network config is missing '" + prefix + ".activation'");
      layers.push_back(zero_dense(in, out, activation_from_string(it->second)));
      in = out;
    }
    std::optional<std::size_t> rep;
    if (config.contains("representation_layer")) rep = parse_size(config, "representation_layer");
    return std::make_unique<DenseNet>(std::move(layers), rep);
  }
  throw ConfigError("unknown architecture '" + architecture + "'");
}

}  // namespace cogrl
