#include "cogrl/transactions.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cogrl/error.hpp"

namespace cogrl {

std::vector<std::string> TransactionLog::students() const {
  std::set<std::string> ids;
  for (const auto& t : rows) ids.insert(t.student_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> TransactionLog::items() const {
  std::set<std::string> ids;
  for (const auto& t : rows) ids.insert(t.item_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::vector<std::size_t>> TransactionLog::student_sequences() const {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < rows.size(); ++r) groups[rows[r].student_id].push_back(r);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& [student, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(),
                     [this](std::size_t a, std::size_t b) { return rows[a].order < rows[b].order; });
    out.push_back(std::move(idx));
  }
  return out;
}

void validate_log(const TransactionLog& log) {
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (std::size_t r = 0; r < log.rows.size(); ++r) {
    const auto& t = log.rows[r];
    if (t.outcome != 0 && t.outcome != 1) {
      throw InputError("transaction " + std::to_string(r) + ": outcome must be 0 or 1");
    }
    if (t.student_id.empty() || t.item_id.empty()) {
      throw InputError("transaction " + std::to_string(r) + ": empty student or item id");
    }
    if (!seen.emplace(t.student_id, t.order).second) {
      throw InputError("transaction " + std::to_string(r) + ": duplicate order " +
                       std::to_string(t.order) + " for student '" + t.student_id + "'");
    }
  }
}

}  // namespace cogrl
