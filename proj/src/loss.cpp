#include "cogrl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cogrl/error.hpp"

namespace cogrl {

double log_sum_exp(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  return top + std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) p[k] = std::exp(logits[k] - lse);
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw ConfigError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " classes");
  }
  CrossEntropy ce;
  const double lse = log_sum_exp(logits);
  ce.loss = lse - logits[label];
  ce.probs.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) ce.probs[k] = std::exp(logits[k] - lse);
  ce.grad_logits = ce.probs;
  ce.grad_logits[label] -= 1.0;
  if (!std::isfinite(ce.loss)) throw NumericError("non-finite loss in layer 'softmax'");
  return ce;
}

}  // namespace cogrl
