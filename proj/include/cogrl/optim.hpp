#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cogrl/network.hpp"

namespace cogrl {

struct SGDConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 500;
  std::uint64_t seed = 0;
  double target_loss = 0.01;
  std::size_t jobs = 1;  // threads per batch; results do not depend on it

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> probs;
};

// Softmax cross-entropy of one sample.
LossResult forward_loss(const Network& net, const NetworkInput& input, std::size_t label);

// Mean loss over a batch.
double batch_loss(const Network& net, std::span<const Sample> batch, std::size_t jobs = 1);

struct Gradients {
  std::unique_ptr<Network> values;  // zeros_like(net) filled with dL/dparam
  double mean_loss = 0.0;
};

// Gradient of the mean batch loss with respect to every parameter. The batch
// is cut into fixed chunks of kGradChunk samples, each accumulated into its own
// buffer, and the buffers are summed in chunk order, so the bits are the same
// for every `jobs`.
inline constexpr std::size_t kGradChunk = 4;
Gradients backprop_grads(const Network& net, std::span<const Sample> batch, std::size_t jobs = 1);

// p <- p - learning_rate * grad for every parameter.
void sgd_update(Network& net, const Network& grads, double learning_rate);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Gradients whose magnitude is below this floor are compared on an absolute
// scale: rel = |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

// Compares every analytic gradient entry of the mean batch loss against the
// central difference (L(p+eps) - L(p-eps)) / 2eps. `net` is restored before
// returning.
GradCheckReport grad_check(Network& net, std::span<const Sample> batch, double epsilon);

}  // namespace cogrl
