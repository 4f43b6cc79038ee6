#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace popproj::csv {

/// Parse failure carrying file, 1-based row (header is row 1) and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string file, std::size_t row, std::string column, const std::string& message);

  const std::string& file() const { return file_; }
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::string file_;
  std::size_t row_;
  std::string column_;
};

struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// File line number of each row, for error messages.
  std::vector<std::size_t> line_numbers;

  std::size_t column(std::string_view name) const;  // throws ParseError if absent
  void require_columns(std::initializer_list<std::string_view> names) const;

  double number(std::size_t row, std::size_t column) const;
  long integer(std::size_t row, std::size_t column) const;
  const std::string& text(std::size_t row, std::size_t column) const;
};

/// RFC 4180 subset: comma separated, optional double quotes, first line is
/// the header. Blank lines are skipped; surrounding whitespace is trimmed.
Table read(const std::filesystem::path& path);
Table parse(std::string_view content, std::string source);

/// Splits one line into fields.
std::vector<std::string> split_line(std::string_view line);

std::string escape(std::string_view field);

}  // namespace popproj::csv
