#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cogrl {

struct TsvRow {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct TsvTable {
  std::vector<std::string> header;
  std::vector<TsvRow> rows;
  std::string source;  // file name for diagnostics

  // Index of a header column; throws InputError naming the source if absent.
  std::size_t column(const std::string& name) const;
};

// Reads a tab-separated file whose first non-empty line is a header. Blank
// lines are skipped; every row must have exactly as many fields as the header.
TsvTable read_tsv(std::istream& in, const std::string& source);
TsvTable read_tsv(const std::filesystem::path& path);

std::vector<std::string> split_tabs(const std::string& line);

// %.17g: round-trips doubles exactly.
std::string format_exact(double value);
// Fixed six decimals for human-facing reports.
std::string format_fixed(double value, int decimals = 6);

// Writes `text` to `path`, throwing InputError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cogrl
