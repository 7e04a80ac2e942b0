#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmshrink/types.hpp"

namespace kmshrink {

struct CsvOptions {
  // Tri-state header handling: unset = auto-detect (header assumed when the
  // first row has any non-numeric cell).
  std::optional<bool> has_header;
  std::optional<Index> drop_column;  // 0-based label column to discard
};

namespace detail {

inline bool parse_double(const std::string& cell, double* out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  if (begin == end) return false;
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

// Rectangular numeric CSV -> sample matrix. Errors name the offending cell
// with 1-based row/column indices (rows counted in the file, header included).
inline Matrix ingest_csv(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open csv file: " + path);
  std::vector<std::vector<std::string>> raw;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    raw.push_back(detail::split_csv_line(line));
  }
  if (raw.empty()) throw std::invalid_argument("empty csv file: " + path);

  std::size_t first_data = 0;
  if (options.has_header.value_or(false)) {
    first_data = 1;
  } else if (!options.has_header.has_value()) {
    for (const auto& cell : raw[0]) {
      double v;
      if (!detail::parse_double(cell, &v)) {
        first_data = 1;
        break;
      }
    }
  }
  if (first_data >= raw.size())
    throw std::invalid_argument("csv file has a header but no data rows: " + path);

  const std::size_t width = raw[first_data].size();
  for (std::size_t r = first_data; r < raw.size(); ++r)
    if (raw[r].size() != width)
      throw std::invalid_argument("ragged csv row " + std::to_string(r + 1) +
                                  ": expected " + std::to_string(width) +
                                  " cells, got " + std::to_string(raw[r].size()));
  if (options.drop_column &&
      (*options.drop_column < 0 || *options.drop_column >= static_cast<Index>(width)))
    throw std::invalid_argument("drop column out of range");
  const Index cols = static_cast<Index>(width) - (options.drop_column ? 1 : 0);
  if (cols < 1) throw std::invalid_argument("csv has no feature columns");

  Matrix m(static_cast<Index>(raw.size() - first_data), cols);
  for (std::size_t r = first_data; r < raw.size(); ++r) {
    Index out_col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (options.drop_column && static_cast<Index>(c) == *options.drop_column)
        continue;
      double v;
      if (!detail::parse_double(raw[r][c], &v))
        throw std::invalid_argument("non-numeric cell at row " +
                                    std::to_string(r + 1) + ", column " +
                                    std::to_string(c + 1));
      m(static_cast<Index>(r - first_data), out_col++) = v;
    }
  }
  validate_data(m, "csv data");
  return m;
}

}  // namespace kmshrink
