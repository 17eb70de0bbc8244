#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cogrl/tsv.hpp"

namespace cogrl {

// Binary item x knowledge-component incidence matrix (a cognitive model).
class QMatrix {
 public:
  QMatrix() = default;
  QMatrix(std::vector<std::string> item_ids, std::vector<std::string> kc_names,
          std::vector<std::uint8_t> cells);

  std::size_t rows() const { return item_ids_.size(); }
  std::size_t cols() const { return kc_names_.size(); }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& kc_names() const { return kc_names_; }

  bool at(std::size_t row, std::size_t col) const { return cells_[row * cols() + col] != 0; }
  std::optional<std::size_t> item_index(const std::string& item_id) const;
  // Throws InputError if the item is unknown.
  std::size_t require_item(const std::string& item_id) const;
  std::vector<std::size_t> kcs_of(std::size_t row) const;
  std::vector<std::uint8_t> column(std::size_t col) const;

  std::size_t row_sum(std::size_t row) const;
  std::size_t col_sum(std::size_t col) const;
  std::size_t ones() const;

  // Every row loads on a KC, no empty columns, no duplicate columns.
  bool is_sanitized() const;

  friend bool operator==(const QMatrix& a, const QMatrix& b) {
    return a.item_ids_ == b.item_ids_ && a.kc_names_ == b.kc_names_ && a.cells_ == b.cells_;
  }

 private:
  std::vector<std::string> item_ids_;
  std::vector<std::string> kc_names_;
  std::vector<std::uint8_t> cells_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One shared KC ("faculty") for every item.
QMatrix faculty_transfer(const std::vector<std::string>& item_ids);
// One KC per item.
QMatrix identical_transfer(const std::vector<std::string>& item_ids);

// Builds a Q-matrix from an (item_id, kc_name) pair table. KC columns appear in
// first-mention order. Every listed item must be known and every known item
// must be listed.
QMatrix load_human_model(const TsvTable& mapping, const std::vector<std::string>& item_ids);
QMatrix load_human_model(const std::filesystem::path& path, const std::vector<std::string>& item_ids);
std::string human_model_tsv(const QMatrix& q);

struct SanitationReport {
  std::vector<std::string> dropped_columns;
  // (original names, merged name)
  std::vector<std::pair<std::vector<std::string>, std::string>> merged_columns;
  std::vector<std::string> residual_items;
  std::string residual_kc;

  bool changed() const {
    return !dropped_columns.empty() || !merged_columns.empty() || !residual_items.empty();
  }
  std::string to_text() const;
};

struct SanitizedQMatrix {
  QMatrix q;
  SanitationReport report;
};

// Drops all-zero columns, merges identical columns (names joined with '+'),
// then gives every all-zero row one shared "residual" KC.
SanitizedQMatrix sanitize_qmatrix(const QMatrix& q);

// Q-matrix TSV: header item_id<TAB>kc..., rows of 0/1.
QMatrix read_qmatrix(const TsvTable& table);
QMatrix read_qmatrix(const std::filesystem::path& path);
std::string qmatrix_tsv(const QMatrix& q);

}  // namespace cogrl
