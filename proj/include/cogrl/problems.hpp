#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cogrl/qmatrix.hpp"
#include "cogrl/tensor.hpp"
#include "cogrl/transactions.hpp"

namespace cogrl {

// A fill-in-the-blank question. The blank is the first run of three or more
// underscores; exactly one such run is allowed.
struct ClozeContent {
  std::string text;
  std::size_t blank_begin = 0;
  std::size_t blank_end = 0;  // one past the last underscore

  std::string prefix() const { return text.substr(0, blank_begin); }
  std::string suffix() const { return text.substr(blank_end); }
};

// Throws InputError if the text is empty or has zero or several blanks.
ClozeContent parse_cloze(const std::string& text);

// Images are [channels x H x W] with values in [0, 1].
using ProblemContent = std::variant<Tensor, ClozeContent>;

struct ProblemInstance {
  std::string item_id;
  ProblemContent content;
  std::size_t answer = 0;  // index into DatasetBundle::answer_labels
};

struct DatasetBundle {
  std::vector<ProblemInstance> problems;
  std::optional<TransactionLog> transactions;
  std::optional<QMatrix> human_model;
  std::vector<std::string> answer_labels;

  std::vector<std::string> item_ids() const;
  // Checks answer indices and that every transaction item is a problem.
  void validate() const;
};

}  // namespace cogrl
