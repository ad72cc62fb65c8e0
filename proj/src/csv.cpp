#include "tabfuse/csv.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tabfuse/errors.hpp"

namespace tabfuse {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  table.header = split_line(line);
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw DataError(path + ": row " + std::to_string(row_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  if (!out) throw DataError("write failed: " + path);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, bool* ok) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  // skip trailing spaces
  while (end && *end == ' ') ++end;
  *ok = !s.empty() && end == begin + s.size();
  return v;
}

void write_csv(const std::string& path, const CsvTable& table) {
  write_csv(path, table.header, table.rows);
}

bool parse_double(const std::string& s, double& out) {
  bool ok = false;
  out = parse_double(s, &ok);
  return ok;
}

}  // namespace tabfuse
