#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cogrl/layers.hpp"
#include "cogrl/tensor.hpp"

namespace cogrl {

// Character ids on either side of a cloze blank, in reading order.
struct ClozeTokens {
  std::vector<std::size_t> prefix;
  std::vector<std::size_t> suffix;
};

using NetworkInput = std::variant<Tensor, ClozeTokens>;

struct Sample {
  NetworkInput input;
  std::size_t label = 0;
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ForwardResult {
  std::vector<double> logits;
  std::vector<double> representation;  // empty if the architecture has none
};

using NetworkConfig = std::map<std::string, std::string>;

// A classifier ending in identity logits. Parameters are exposed in a fixed
// order so that two networks of the same architecture can be walked in
// lockstep (gradients are stored in a zeroed network of the same shape).
class Network {
 public:
  virtual ~Network() = default;

  virtual std::string architecture() const = 0;
  virtual NetworkConfig config() const = 0;
  virtual std::unique_ptr<Network> clone() const = 0;
  virtual std::unique_ptr<Network> zeros_like() const = 0;
  virtual std::vector<ParamRef> parameters() = 0;
  virtual std::size_t num_classes() const = 0;
  // Width of the designated pre-output layer, 0 if there is none.
  virtual std::size_t representation_size() const = 0;

  virtual ForwardResult forward(const NetworkInput& input) const = 0;
  // Adds scale * dL/dparam of the softmax cross-entropy loss for one sample to
  // `grads` (a zeros_like() network). Returns the unscaled loss.
  virtual double accumulate_gradients(const NetworkInput& input, std::size_t label, double scale,
                                      Network& grads) const = 0;

  std::size_t parameter_count() const;
  std::vector<std::pair<std::string, const Tensor*>> parameter_views() const;
};

// Plain stack of dense layers over a flattened input tensor.
class DenseNet final : public Network {
 public:
  DenseNet(std::vector<DenseLayer> layers, std::optional<std::size_t> representation_layer);

  std::string architecture() const override { return "dense"; }
  NetworkConfig config() const override;
  std::unique_ptr<Network> clone() const override;
  std::unique_ptr<Network> zeros_like() const override;
  std::vector<ParamRef> parameters() override;
  std::size_t num_classes() const override { return layers_.back().out_size(); }
  std::size_t representation_size() const override;
  ForwardResult forward(const NetworkInput& input) const override;
  double accumulate_gradients(const NetworkInput& input, std::size_t label, double scale,
                              Network& grads) const override;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
  std::optional<std::size_t> representation_layer_;
};

// conv -> flatten -> dense(sigmoid, representation) -> dense(identity logits)
class ImageCnn final : public Network {
 public:
  ImageCnn(std::vector<std::size_t> input_shape, ConvLayer conv, DenseLayer representation,
           DenseLayer output);

  std::string architecture() const override { return "image_cnn"; }
  NetworkConfig config() const override;
  std::unique_ptr<Network> clone() const override;
  std::unique_ptr<Network> zeros_like() const override;
  std::vector<ParamRef> parameters() override;
  std::size_t num_classes() const override { return output_.out_size(); }
  std::size_t representation_size() const override { return representation_.out_size(); }
  ForwardResult forward(const NetworkInput& input) const override;
  double accumulate_gradients(const NetworkInput& input, std::size_t label, double scale,
                              Network& grads) const override;

  const std::vector<std::size_t>& input_shape() const { return input_shape_; }
  std::vector<std::size_t> conv_output_shape() const;
  ConvLayer& conv() { return conv_; }
  const ConvLayer& conv() const { return conv_; }
  DenseLayer& representation_layer() { return representation_; }
  DenseLayer& output_layer() { return output_; }

 private:
  const Tensor& image_of(const NetworkInput& input) const;

  std::vector<std::size_t> input_shape_;
  ConvLayer conv_;
  DenseLayer representation_;
  DenseLayer output_;
};

// Character embedding -> forward LSTM over the text before the blank, backward
// LSTM over the text after the blank (read right to left) -> concatenated
// final hidden states -> dense(tanh) -> dense(sigmoid, representation) ->
// dense(identity logits). An empty side contributes its zero initial state.
class ClozeLstm final : public Network {
 public:
  ClozeLstm(EmbeddingTable embedding, LSTMCell forward_cell, LSTMCell backward_cell,
            DenseLayer combine, DenseLayer representation, DenseLayer output);

  std::string architecture() const override { return "cloze_lstm"; }
  NetworkConfig config() const override;
  std::unique_ptr<Network> clone() const override;
  std::unique_ptr<Network> zeros_like() const override;
  std::vector<ParamRef> parameters() override;
  std::size_t num_classes() const override { return output_.out_size(); }
  std::size_t representation_size() const override { return representation_.out_size(); }
  ForwardResult forward(const NetworkInput& input) const override;
  double accumulate_gradients(const NetworkInput& input, std::size_t label, double scale,
                              Network& grads) const override;

  EmbeddingTable& embedding() { return embedding_; }
  const EmbeddingTable& embedding() const { return embedding_; }
  LSTMCell& forward_cell() { return forward_cell_; }
  const LSTMCell& forward_cell() const { return forward_cell_; }
  LSTMCell& backward_cell() { return backward_cell_; }
  const LSTMCell& backward_cell() const { return backward_cell_; }
  DenseLayer& combine_layer() { return combine_; }
  const DenseLayer& combine_layer() const { return combine_; }
  DenseLayer& representation_layer() { return representation_; }
  const DenseLayer& representation_layer() const { return representation_; }
  DenseLayer& output_layer() { return output_; }
  const DenseLayer& output_layer() const { return output_; }

 private:
  struct Trace;
  Trace run(const ClozeTokens& tokens) const;

  EmbeddingTable embedding_;
  LSTMCell forward_cell_;
  LSTMCell backward_cell_;
  DenseLayer combine_;
  DenseLayer representation_;
  DenseLayer output_;
};

// Builds a network with zero-filled parameters from an architecture tag and a
// config() map. Used by checkpoint loading.
std::unique_ptr<Network> make_network_skeleton(const std::string& architecture,
                                               const NetworkConfig& config);

// Throws NumericError naming `layer` if any value is NaN/Inf.
void require_finite(std::span<const double> values, const std::string& layer);

}  // namespace cogrl
