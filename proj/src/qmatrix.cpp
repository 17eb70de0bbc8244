#include "cogrl/qmatrix.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "cogrl/error.hpp"

namespace cogrl {

QMatrix::QMatrix(std::vector<std::string> item_ids, std::vector<std::string> kc_names,
                 std::vector<std::uint8_t> cells)
    : item_ids_(std::move(item_ids)), kc_names_(std::move(kc_names)), cells_(std::move(cells)) {
  if (cells_.size() != item_ids_.size() * kc_names_.size()) {
    throw DimensionError("Q-matrix cell count does not match items x KCs");
  }
  for (auto& c : cells_) {
    if (c > 1) throw InputError("Q-matrix cells must be 0 or 1");
  }
  for (std::size_t r = 0; r < item_ids_.size(); ++r) {
    if (!index_.emplace(item_ids_[r], r).second) {
      throw InputError("duplicate item id '" + item_ids_[r] + "'");
    }
  }
  std::set<std::string> names;
  for (const auto& name : kc_names_) {
    if (!names.insert(name).second) throw InputError("duplicate KC name '" + name + "'");
  }
}

std::optional<std::size_t> QMatrix::item_index(const std::string& item_id) const {
  const auto it = index_.find(item_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t QMatrix::require_item(const std::string& item_id) const {
  const auto row = item_index(item_id);
  if (!row) throw InputError("item '" + item_id + "' is not in the Q-matrix");
  return *row;
}

std::vector<std::size_t> QMatrix::kcs_of(std::size_t row) const {
  std::vector<std::size_t> kcs;
  for (std::size_t c = 0; c < cols(); ++c) {
    if (at(row, c)) kcs.push_back(c);
  }
  return kcs;
}

std::vector<std::uint8_t> QMatrix::column(std::size_t col) const {
  std::vector<std::uint8_t> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = cells_[r * cols() + col];
  return out;
}

std::size_t QMatrix::row_sum(std::size_t row) const {
  return static_cast<std::size_t>(
      std::count(cells_.begin() + row * cols(), cells_.begin() + (row + 1) * cols(), 1));
}

std::size_t QMatrix::col_sum(std::size_t col) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows(); ++r) n += cells_[r * cols() + col];
  return n;
}

std::size_t QMatrix::ones() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
}

bool QMatrix::is_sanitized() const {
  for (std::size_t r = 0; r < rows(); ++r) {
    if (row_sum(r) == 0) return false;
  }
  std::set<std::vector<std::uint8_t>> seen;
  for (std::size_t c = 0; c < cols(); ++c) {
    auto col = column(c);
    if (std::count(col.begin(), col.end(), 1) == 0) return false;
    if (!seen.insert(std::move(col)).second) return false;
  }
  return true;
}

QMatrix faculty_transfer(const std::vector<std::string>& item_ids) {
  if (item_ids.empty()) throw InputError("faculty transfer needs at least one item");
  return QMatrix(item_ids, {"faculty"}, std::vector<std::uint8_t>(item_ids.size(), 1));
}

QMatrix identical_transfer(const std::vector<std::string>& item_ids) {
  if (item_ids.empty()) throw InputError("identical transfer needs at least one item");
  const std::size_t n = item_ids.size();
  std::vector<std::string> names;
  names.reserve(n);
  for (const auto& id : item_ids) names.push_back("item_" + id);
  std::vector<std::uint8_t> cells(n * n, 0);
  for (std::size_t r = 0; r < n; ++r) cells[r * n + r] = 1;
  return QMatrix(item_ids, std::move(names), std::move(cells));
}

QMatrix load_human_model(const TsvTable& mapping, const std::vector<std::string>& item_ids) {
  const std::size_t item_col = mapping.column("item_id");
  const std::size_t kc_col = mapping.column("kc_name");
  if (mapping.rows.empty()) throw InputError(mapping.source + ": KC mapping has no rows");

  std::map<std::string, std::size_t> known;
  for (std::size_t r = 0; r < item_ids.size(); ++r) known.emplace(item_ids[r], r);

  std::vector<std::string> kc_names;
  std::map<std::string, std::size_t> kc_index;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& row : mapping.rows) {
    const auto& item = row.fields[item_col];
    const auto& kc = row.fields[kc_col];
    if (kc.empty()) {
      throw InputError(mapping.source + ":" + std::to_string(row.line) + ": empty KC name");
    }
    const auto it = known.find(item);
    if (it == known.end()) {
      throw InputError(mapping.source + ":" + std::to_string(row.line) + ": unknown item id '" + item + "'");
    }
    auto [kc_it, inserted] = kc_index.emplace(kc, kc_names.size());
    if (inserted) kc_names.push_back(kc);
    pairs.emplace_back(it->second, kc_it->second);
  }

  std::vector<std::uint8_t> cells(item_ids.size() * kc_names.size(), 0);
  for (auto [r, c] : pairs) cells[r * kc_names.size() + c] = 1;

  std::vector<std::string> missing;
  for (std::size_t r = 0; r < item_ids.size(); ++r) {
    bool any = false;
    for (std::size_t c = 0; c < kc_names.size(); ++c) any = any || cells[r * kc_names.size() + c];
    if (!any) missing.push_back(item_ids[r]);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw InputError(mapping.source + ": items without a KC mapping: " + list);
  }
  return QMatrix(item_ids, std::move(kc_names), std::move(cells));
}

QMatrix load_human_model(const std::filesystem::path& path, const std::vector<std::string>& item_ids) {
  return load_human_model(read_tsv(path), item_ids);
}

std::string human_model_tsv(const QMatrix& q) {
  std::ostringstream out;
  out << "item_id\tkc_name\n";
  for (std::size_t r = 0; r < q.rows(); ++r) {
    for (std::size_t c : q.kcs_of(r)) out << q.item_ids()[r] << '\t' << q.kc_names()[c] << '\n';
  }
  return out.str();
}

std::string SanitationReport::to_text() const {
  std::ostringstream out;
  out << "dropped_empty_columns\t" << dropped_columns.size() << '\n';
  for (const auto& name : dropped_columns) out << "drop\t" << name << '\n';
  out << "merged_duplicate_groups\t" << merged_columns.size() << '\n';
  for (const auto& [names, merged] : merged_columns) {
    out << "merge\t" << merged << "\t" << names.size() << '\n';
  }
  out << "residual_items\t" << residual_items.size() << '\n';
  for (const auto& item : residual_items) out << "residual\t" << residual_kc << '\t' << item << '\n';
  return out.str();
}

SanitizedQMatrix sanitize_qmatrix(const QMatrix& q) {
  SanitationReport report;
  std::vector<std::string> names;
  std::vector<std::vector<std::uint8_t>> columns;
  std::map<std::vector<std::uint8_t>, std::size_t> by_pattern;
  std::vector<std::vector<std::string>> groups;

  for (std::size_t c = 0; c < q.cols(); ++c) {
    auto col = q.column(c);
    if (std::count(col.begin(), col.end(), 1) == 0) {
      report.dropped_columns.push_back(q.kc_names()[c]);
      continue;
    }
    const auto it = by_pattern.find(col);
    if (it != by_pattern.end()) {
      groups[it->second].push_back(q.kc_names()[c]);
      continue;
    }
    by_pattern.emplace(col, columns.size());
    groups.push_back({q.kc_names()[c]});
    columns.push_back(std::move(col));
  }
  for (const auto& group : groups) {
    std::string name = group.front();
    for (std::size_t k = 1; k < group.size(); ++k) name += "+" + group[k];
    names.push_back(name);
    if (group.size() > 1) report.merged_columns.emplace_back(group, name);
  }

  std::vector<std::uint8_t> residual(q.rows(), 0);
  for (std::size_t r = 0; r < q.rows(); ++r) {
    bool any = false;
    for (const auto& col : columns) any = any || col[r];
    if (!any) {
      residual[r] = 1;
      report.residual_items.push_back(q.item_ids()[r]);
    }
  }
  if (!report.residual_items.empty()) {
    std::set<std::string> taken(names.begin(), names.end());
    std::string residual_name = "residual";
    for (int k = 1; taken.contains(residual_name); ++k) residual_name = "residual_" + std::to_string(k);
    report.residual_kc = residual_name;
    names.push_back(residual_name);
    columns.push_back(std::move(residual));
  }

  std::vector<std::uint8_t> cells(q.rows() * columns.size());
  for (std::size_t r = 0; r < q.rows(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) cells[r * columns.size() + c] = columns[c][r];
  }
  return {QMatrix(q.item_ids(), std::move(names), std::move(cells)), std::move(report)};
}

QMatrix read_qmatrix(const TsvTable& table) {
  if (table.header.empty() || table.header[0] != "item_id") {
    throw InputError(table.source + ": Q-matrix header must start with item_id");
  }
  std::vector<std::string> kcs(table.header.begin() + 1, table.header.end());
  std::vector<std::string> items;
  std::vector<std::uint8_t> cells;
  for (const auto& row : table.rows) {
    items.push_back(row.fields[0]);
    for (std::size_t c = 1; c < row.fields.size(); ++c) {
      const auto& f = row.fields[c];
      if (f != "0" && f != "1") {
        throw InputError(table.source + ":" + std::to_string(row.line) + ": Q-matrix cell '" + f +
                         "' is not 0 or 1");
      }
      cells.push_back(f == "1" ? 1 : 0);
    }
  }
  return QMatrix(std::move(items), std::move(kcs), std::move(cells));
}

QMatrix read_qmatrix(const std::filesystem::path& path) { return read_qmatrix(read_tsv(path)); }

std::string qmatrix_tsv(const QMatrix& q) {
  std::ostringstream out;
  out << "item_id";
  for (const auto& name : q.kc_names()) out << '\t' << name;
  out << '\n';
  for (std::size_t r = 0; r < q.rows(); ++r) {
    out << q.item_ids()[r];
    for (std::size_t c = 0; c < q.cols(); ++c) out << '\t' << (q.at(r, c) ? '1' : '0');
    out << '\n';
  }
  return out.str();
}

}  // namespace cogrl
