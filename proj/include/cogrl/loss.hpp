#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cogrl {

double log_sum_exp(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> probs;
  std::vector<double> grad_logits;  // probs - onehot(label)
};

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label);

}  // namespace cogrl
