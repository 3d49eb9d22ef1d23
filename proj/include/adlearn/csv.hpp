#pragma once

// Minimal CSV layer shared by every file boundary. Lines starting with '#'
// are provenance/comment lines and are skipped by readers. Reals are
// serialized with 17 significant digits so round-trips are lossless.

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace adlearn {

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // leading '#' lines, markers stripped

  // Column index by name; throws with the file context if missing.
  std::size_t col(const std::string& name) const;
  bool has_col(const std::string& name) const;
  const std::string& cell(std::size_t row, std::size_t col_idx) const {
    return rows[row][col_idx];
  }
};

CsvTable read_csv(const std::string& path);

// Field parsers carrying row context in error messages (rows are 1-based
// data rows, excluding header and comments).
double parse_double(const std::string& s, const std::string& context);
std::int64_t parse_int(const std::string& s, const std::string& context);

std::string format_double(double v);  // %.17g

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns,
            const std::vector<std::string>& comment_lines = {});
  void write_row(const std::vector<std::string>& fields);
  void close();
  ~CsvWriter();

 private:
  std::ofstream out_;
  std::size_t n_cols_;
  std::string path_;
};

}  // namespace adlearn
