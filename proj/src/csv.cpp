#include "popproj/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace popproj::csv {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

ParseError::ParseError(std::string file, std::size_t row, std::string column,
                       const std::string& message)
    : std::runtime_error(fmt::format("{}:{}{}: {}", file, row,
                                     column.empty() ? "" : " column '" + column + "'", message)),
      file_(std::move(file)),
      row_(row),
      column_(std::move(column)) {}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

Table parse(std::string_view content, std::string source) {
  Table table;
  table.source = std::move(source);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= content.size()) {
    const auto end = content.find('\n', pos);
    const auto line = content.substr(pos, end == std::string_view::npos ? content.size() - pos
                                                                       : end - pos);
    ++line_no;
    pos = end == std::string_view::npos ? content.size() + 1 : end + 1;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      if (line_no == 1 && !fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        fields[0].erase(0, 3);
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError(table.source, line_no, "",
                       fmt::format("expected {} fields, found {}", table.header.size(),
                                   fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ParseError(table.source, 1, "", "file is empty (no header row)");
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw ParseError(source, 1, std::string(name), "missing required column");
  }
  return static_cast<std::size_t>(it - header.begin());
}

void Table::require_columns(std::initializer_list<std::string_view> names) const {
  for (auto name : names) (void)column(name);
}

const std::string& Table::text(std::size_t row, std::size_t col) const { return rows[row][col]; }

double Table::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows[row][col];
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE ||
      !std::isfinite(value)) {
    throw ParseError(source, line_numbers[row], header[col],
                     fmt::format("'{}' is not a finite number", cell));
  }
  return value;
}

long Table::integer(std::size_t row, std::size_t col) const {
  const std::string& cell = rows[row][col];
  errno = 0;
  char* end = nullptr;
  const long value = std::strtol(cell.c_str(), &end, 10);
  if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE) {
    throw ParseError(source, line_numbers[row], header[col],
                     fmt::format("'{}' is not an integer", cell));
  }
  return value;
}

}  // namespace popproj::csv
