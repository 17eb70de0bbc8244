#include "cogrl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "cogrl/error.hpp"
#include "cogrl/loss.hpp"
#include "cogrl/parallel.hpp"

namespace cogrl {

void SGDConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (!(target_loss >= 0.0)) throw ConfigError("target loss must be non-negative");
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
}

LossResult forward_loss(const Network& net, const NetworkInput& input, std::size_t label) {
  if (label >= net.num_classes()) {
    throw ConfigError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(net.num_classes()) + " classes");
  }
  const auto out = net.forward(input);
  auto ce = softmax_cross_entropy(out.logits, label);
  return {ce.loss, std::move(ce.probs)};
}

double batch_loss(const Network& net, std::span<const Sample> batch, std::size_t jobs) {
  if (batch.empty()) throw ConfigError("batch must be non-empty");
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), jobs,
               [&](std::size_t i) { losses[i] = forward_loss(net, batch[i].input, batch[i].label).loss; });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(batch.size());
}

Gradients backprop_grads(const Network& net, std::span<const Sample> batch, std::size_t jobs) {
  if (batch.empty()) throw ConfigError("batch must be non-empty");
  for (const auto& sample : batch) {
    if (sample.label >= net.num_classes()) {
      throw ConfigError("label " + std::to_string(sample.label) + " out of range");
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  const std::size_t chunks = (batch.size() + kGradChunk - 1) / kGradChunk;
  std::vector<std::unique_ptr<Network>> parts(chunks);
  std::vector<double> losses(chunks, 0.0);
  parallel_for(chunks, jobs, [&](std::size_t c) {
    parts[c] = net.zeros_like();
    const std::size_t end = std::min(batch.size(), (c + 1) * kGradChunk);
    for (std::size_t i = c * kGradChunk; i < end; ++i) {
      losses[c] += net.accumulate_gradients(batch[i].input, batch[i].label, scale, *parts[c]) * scale;
    }
  });

  Gradients grads{std::move(parts[0]), losses[0]};
  auto total = grads.values->parameters();
  for (std::size_t c = 1; c < chunks; ++c) {
    const auto part = parts[c]->parameter_views();
    for (std::size_t k = 0; k < total.size(); ++k) {
      Tensor& t = *total[k].tensor;
      const Tensor& g = *part[k].second;
      for (std::size_t n = 0; n < t.size(); ++n) t[n] += g[n];
    }
    grads.mean_loss += losses[c];
  }
  return grads;
}

void sgd_update(Network& net, const Network& grads, double learning_rate) {
  auto params = net.parameters();
  const auto grad_params = grads.parameter_views();
  if (params.size() != grad_params.size()) throw DimensionError("gradient set does not match network");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].tensor;
    const Tensor& g = *grad_params[k].second;
    if (!p.same_shape(g)) throw DimensionError("gradient shape mismatch for " + params[k].name);
    for (std::size_t n = 0; n < p.size(); ++n) p[n] -= learning_rate * g[n];
  }
}

GradCheckReport grad_check(Network& net, std::span<const Sample> batch, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("finite-difference epsilon must be positive");
  const Gradients analytic = backprop_grads(net, batch);
  const auto grad_params = analytic.values->parameter_views();
  auto params = net.parameters();

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].tensor;
    const Tensor& g = *grad_params[k].second;
    for (std::size_t n = 0; n < p.size(); ++n) {
      const double saved = p[n];
      p[n] = saved + epsilon;
      const double up = batch_loss(net, batch);
      p[n] = saved - epsilon;
      const double down = batch_loss(net, batch);
      p[n] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({std::abs(g[n]), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(g[n] - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error || report.checked == 1) {
        report.max_relative_error = rel;
        report.worst_parameter = params[k].name;
        report.worst_index = n;
        report.analytic = g[n];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace cogrl
