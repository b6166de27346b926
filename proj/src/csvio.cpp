#include "haid/csvio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace haid {

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open CSV file " + path);
  }
  CsvTable table;
  std::string line;
  bool header_done = false;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_done && !line.empty() && line[0] == '#') {
      table.comments.push_back(line);
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (!header_done) {
      table.header = cells;
      header_done = true;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot write CSV file " + path);
  }
  for (const std::string& c : table.comments) f << c << '\n';
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) f << ',';
    f << table.header[i];
  }
  f << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      f << row[i];
    }
    f << '\n';
  }
}

namespace {

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

CsvDivergence compare_csv(const std::string& path_a, const std::string& path_b,
                          double tol) {
  const CsvTable a = read_csv(path_a);
  const CsvTable b = read_csv(path_b);
  CsvDivergence d;
  d.file = path_a;

  auto fail = [&](int row, int col, const std::string& detail) {
    d.diverged = true;
    d.row = row;
    d.column = col;
    d.detail = detail;
    return d;
  };

  if (a.comments != b.comments) {
    return fail(0, 0, "header comments differ");
  }
  if (a.header != b.header) {
    return fail(0, 0, "column headers differ");
  }
  if (a.rows.size() != b.rows.size()) {
    return fail(static_cast<int>(std::min(a.rows.size(), b.rows.size())) + 1, 0,
                "row counts differ");
  }
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    const auto& ra = a.rows[r];
    const auto& rb = b.rows[r];
    if (ra.size() != rb.size()) {
      return fail(static_cast<int>(r) + 1, 0, "cell counts differ");
    }
    for (std::size_t c = 0; c < ra.size(); ++c) {
      double va = 0.0, vb = 0.0;
      const bool na = parse_number(ra[c], va);
      const bool nb = parse_number(rb[c], vb);
      if (na && nb) {
        if (std::abs(va - vb) > tol) {
          return fail(static_cast<int>(r) + 1, static_cast<int>(c) + 1,
                      "|" + ra[c] + " - " + rb[c] + "| exceeds tolerance");
        }
      } else if (ra[c] != rb[c]) {
        return fail(static_cast<int>(r) + 1, static_cast<int>(c) + 1,
                    "'" + ra[c] + "' vs '" + rb[c] + "'");
      }
    }
  }
  return d;
}

}  // namespace haid
