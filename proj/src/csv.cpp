#include "adlearn/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace adlearn {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::size_t CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::runtime_error("missing column '" + name + "'");
}

bool CsvTable::has_col(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') {
      std::size_t start = 1;
      while (start < line.size() && line[start] == ' ') ++start;
      table.comments.push_back(line.substr(start));
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (!header_seen) {
      table.columns = std::move(fields);
      header_seen = true;
      continue;
    }
    if (fields.size() != table.columns.size()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected " << table.columns.size()
          << " fields, got " << fields.size();
      throw std::runtime_error(msg.str());
    }
    table.rows.push_back(std::move(fields));
  }
  if (!header_seen) throw std::runtime_error(path + ": missing header row");
  return table;
}

double parse_double(const std::string& s, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw std::runtime_error(context + ": not a number: '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw std::runtime_error(context + ": not an integer: '" + s + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns,
                     const std::vector<std::string>& comment_lines)
    : out_(path), n_cols_(columns.size()), path_(path) {
  if (!out_) throw std::runtime_error("cannot write " + path);
  for (const auto& c : comment_lines) out_ << "# " << c << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  if (fields.size() != n_cols_)
    throw std::runtime_error(path_ + ": row width mismatch");
  for (std::size_t i = 0; i < fields.size(); ++i)
    out_ << fields[i] << (i + 1 < fields.size() ? "," : "\n");
}

void CsvWriter::close() {
  if (out_.is_open()) {
    out_.close();
    if (out_.fail()) throw std::runtime_error("write failed: " + path_);
  }
}

CsvWriter::~CsvWriter() {
  if (out_.is_open()) out_.close();
}

}  // namespace adlearn
