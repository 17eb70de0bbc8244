#include "cogrl/problems.hpp"

#include <set>

#include "cogrl/error.hpp"

namespace cogrl {

namespace {
// [begin, end) of the next run of >= 3 underscores at or after `from`.
std::optional<std::pair<std::size_t, std::size_t>> find_blank(const std::string& text, std::size_t from) {
  std::size_t i = from;
  while (i < text.size()) {
    if (text[i] != '_') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] == '_') ++j;
    if (j - i >= 3) return std::pair{i, j};
    i = j;
  }
  return std::nullopt;
}
}  // namespace

ClozeContent parse_cloze(const std::string& text) {
  if (text.empty()) throw InputError("cloze text is empty");
  const auto blank = find_blank(text, 0);
  if (!blank) throw InputError("cloze text has no blank (___): " + text);
  if (find_blank(text, blank->second)) throw InputError("cloze text has more than one blank: " + text);
  return {text, blank->first, blank->second};
}

std::vector<std::string> DatasetBundle::item_ids() const {
  std::vector<std::string> ids;
  ids.reserve(problems.size());
  for (const auto& p : problems) ids.push_back(p.item_id);
  return ids;
}

void DatasetBundle::validate() const {
  std::set<std::string> ids;
  for (const auto& p : problems) {
    if (!ids.insert(p.item_id).second) throw InputError("duplicate problem id '" + p.item_id + "'");
    if (p.answer >= answer_labels.size()) {
      throw InputError("problem '" + p.item_id + "' has an answer index outside the label set");
    }
  }
  if (transactions) {
    for (const auto& t : transactions->rows) {
      if (!ids.contains(t.item_id)) throw InputError("transaction item '" + t.item_id + "' is not a problem");
    }
  }
}

}  // namespace cogrl
