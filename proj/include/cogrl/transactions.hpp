#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cogrl {

// One first-attempt record.
struct Transaction {
  std::string student_id;
  std::string item_id;
  int outcome = 0;          // 0 or 1
  std::uint64_t order = 0;  // strictly increasing per student

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct TransactionLog {
  std::vector<Transaction> rows;

  bool empty() const { return rows.empty(); }
  std::size_t size() const { return rows.size(); }
  // Sorted distinct ids.
  std::vector<std::string> students() const;
  std::vector<std::string> items() const;
  // Row indices grouped per student (students sorted), each group in order.
  std::vector<std::vector<std::size_t>> student_sequences() const;

  friend bool operator==(const TransactionLog&, const TransactionLog&) = default;
};

// Checks outcomes are 0/1 and (student, order) pairs are unique. Throws
// InputError naming the offending row (0-based index + 2 = file line with a
// header, which callers that know line numbers report themselves).
void validate_log(const TransactionLog& log);

}  // namespace cogrl
