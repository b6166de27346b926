#pragma once

#include <string>
#include <vector>

namespace haid {

/// Shortest round-trippable decimal for a double; fixed "%.12g"-equivalent
/// formatting keeps outputs byte-stable across runs.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> comments;  // leading '#' lines, kept verbatim
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);  // throws std::runtime_error

void write_csv(const std::string& path, const CsvTable& table);

struct CsvDivergence {
  bool diverged = false;
  std::string file;
  int row = 0;     // 1-based, counting data rows
  int column = 0;  // 1-based
  std::string detail;
};

/// Numeric comparison with absolute tolerance; non-numeric cells must match
/// exactly. Stops at the first divergence.
CsvDivergence compare_csv(const std::string& path_a, const std::string& path_b,
                          double tol);

}  // namespace haid
